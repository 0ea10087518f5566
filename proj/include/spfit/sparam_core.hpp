#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <vector>

namespace spfit {

using Complex = std::complex<double>;

/// Real-valued channel matrix, rows = channels, cols = frequency samples.
/// When holding a flattened S-parameter tensor the layout is: row 2k is the
/// real part and row 2k+1 the imaginary part of the k-th (row-major) entry.
using RealChannels = Eigen::MatrixXd;

/// Ordered frequency axis in Hz.
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::vector<double> values_hz);

    static FrequencyGrid linspace(double lo_hz, double hi_hz, int count);

    int size() const { return static_cast<int>(values_.size()); }
    double operator[](int k) const { return values_[static_cast<std::size_t>(k)]; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const FrequencyGrid& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

/// Dense complex S-parameter frequency series: p ports, f frequencies.
/// Entries are stored as a p^2 x f complex matrix, entry (i,j) in row i*p+j.
class SParamTensor {
public:
    SParamTensor() = default;
    SParamTensor(int ports, FrequencyGrid grid, Eigen::MatrixXcd data);

    int ports() const { return ports_; }
    int freq_count() const { return grid_.size(); }
    const FrequencyGrid& grid() const { return grid_; }

    Complex operator()(int i, int j, int k) const { return data_(i * ports_ + j, k); }
    Complex& at(int i, int j, int k) { return data_(i * ports_ + j, k); }

    /// p^2 x f matrix, row-major entry order.
    const Eigen::MatrixXcd& entries() const { return data_; }
    Eigen::MatrixXcd& entries() { return data_; }

private:
    int ports_ = 0;
    FrequencyGrid grid_;
    Eigen::MatrixXcd data_;  // p^2 x f
};

/// Observed subset of a full frequency sweep.
struct MeasurementSet {
    std::vector<int> indices;  // strictly increasing, within [0, f)
    SParamTensor data;         // p x p x f' on the observed sub-grid
    FrequencyGrid full_grid;   // the f-point grid being reconstructed

    int ports() const { return data.ports(); }
    int observed_count() const { return static_cast<int>(indices.size()); }
    int full_count() const { return full_grid.size(); }

    void validate() const;
};

/// Builds a MeasurementSet by sub-sampling a full tensor at the given indices.
MeasurementSet subsample_tensor(const SParamTensor& x, const std::vector<int>& indices);

/// Complex p x p x f tensor -> real 2p^2 x f channel matrix.
RealChannels flatten(const SParamTensor& x);

/// Inverse of flatten. The grid labels the f columns.
SParamTensor unflatten(const RealChannels& x, int ports, const FrequencyGrid& grid);

/// Keeps the selected frequency columns, in order.
RealChannels subsample(const RealChannels& x, const std::vector<int>& indices);

/// Lifts observed columns back to an r x f matrix, zeros elsewhere.
RealChannels subsample_adjoint(const RealChannels& y, const std::vector<int>& indices, int full_cols);

/// `count` equally spaced indices over [0, f), always containing 0 and f-1.
std::vector<int> uniform_indices(int f, int count);

/// Peak signal-to-noise ratio in dB over all real channel entries.
/// Peak is the maximum absolute entry of the reference. Returns +infinity
/// when the estimate matches the reference exactly.
double psnr(const RealChannels& reference, const RealChannels& estimate);

inline double psnr_infinity() { return std::numeric_limits<double>::infinity(); }

/// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace spfit
