#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "spfit/sparam_core.hpp"

namespace spfit {

/// Pole-residue rational model h(s) = d + s*e + sum_k c_k / (s - p_k),
/// evaluated at s = j*2*pi*nu with nu in Hz. Poles are kept in the left
/// half-plane and appear as conjugate pairs (adjacent, +Im first) or on the
/// real axis; residues of conjugate poles are entrywise conjugate.
struct RationalModel {
    Eigen::VectorXcd poles;
    std::vector<Eigen::MatrixXcd> residues;  // one p x p matrix per pole
    Eigen::MatrixXd d;
    Eigen::MatrixXd e;

    int pole_count() const { return static_cast<int>(poles.size()); }
    int ports() const { return static_cast<int>(d.rows()); }
    void validate() const;

    /// Text export with 17 significant digits.
    std::string export_text() const;
};

SParamTensor vf_eval(const RationalModel& model, const FrequencyGrid& grid);

struct VfOptions {
    int max_iters = 30;
    double tol = 1e-10;  // relative RMS stop
};

struct VfResult {
    RationalModel model;
    double rel_rms = 0.0;
    int iterations = 0;
    bool converged = false;          // warning flag when false
    bool rank_deficient = false;     // sigma system lost rank at least once
    double condition_estimate = 0.0;
};

/// Iterative pole-relocation fit with K shared poles.
VfResult vf_fit(const MeasurementSet& m, int pole_count, const VfOptions& opts = {});

struct AutoKResult {
    VfResult fit;
    int chosen_k = 0;
    std::vector<std::pair<int, double>> holdout_scores;  // (K, rel RMS)
};

/// Grid search over K in {2, 4, ...} scored by holdout error on ~10% of the
/// observed points, then a refit on all observations with the winner.
AutoKResult vf_fit_auto_k(const MeasurementSet& m, int k_max, const VfOptions& opts = {});

}  // namespace spfit
