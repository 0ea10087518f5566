#pragma once

#include <cstdint>
#include <vector>

#include "spfit/dip_net.hpp"
#include "spfit/rng.hpp"
#include "spfit/sparam_core.hpp"

namespace spfit {

/// SGLD hyperparameters with the published defaults.
struct FitConfig {
    int iterations = 20000;   // T
    double step = 2e-4;       // alpha
    double lambda = 0.1;
    double sigma0_sq = 1e-2;  // input-noise variance at t = 0
    double sigmaT_sq = 1e-6;  // input-noise variance at t = T
    int burn_in = 15000;
    int sample_every = 100;
    std::uint64_t seed = 0;

    // ablation switches; each disables exactly one mechanism
    bool sgld_noise = true;
    bool input_noise = true;
    bool regularizer = true;
    bool causality_layer = true;

    bool sample_at_clean_latent = false;  // sample G(Z) instead of G(Z_t)
    bool reg_separate_real_imag = false;
    double leaky_slope = 0.01;

    int expected_samples() const { return (iterations - burn_in) / sample_every; }
    void validate() const;
};

struct LossPoint {
    double data_loss = 0.0;
    double reg_value = 0.0;
};

struct PosteriorSummary {
    std::vector<SParamTensor> samples;
    SParamTensor mean;
    Eigen::MatrixXd std_magnitude;  // p^2 x f, std of |S_ij| over samples
    RealChannels std_channels;      // r x f, std of each real channel entry
    std::vector<LossPoint> loss_trace;
};

/// Z = A^dagger(flatten(Y)): observed columns filled, the rest zero.
RealChannels make_latent(const MeasurementSet& m);

/// Geometric input-noise schedule sigma_t^2 = s0 * (sT/s0)^(t/T).
double input_noise_variance(int t, const FitConfig& cfg);

/// theta -= (alpha/2) * (grad_data + grad_reg) + n, n ~ N(0, alpha * I) when
/// a noise stream is given. grad_reg may be null (treated as zero).
void sgld_update_array(ad::Matrix& theta, const ad::Matrix& grad_data,
                       const ad::Matrix* grad_reg, double alpha, GaussianStream* noise);

/// Array-list form of the update, matching the layout of a WeightStore.
void sgld_step(std::vector<ad::Matrix>& weights, const std::vector<ad::Matrix>& grad_data,
               const std::vector<ad::Matrix>& grad_reg, double alpha, GaussianStream* noise);

/// Runs the full fit: latent construction, noise schedule, SGLD updates,
/// burn-in, posterior sampling, summaries. Deterministic in (m, cfg).
PosteriorSummary fit(const MeasurementSet& m, const FitConfig& cfg);

}  // namespace spfit
