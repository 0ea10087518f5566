#include "spfit/sparam_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spfit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

FrequencyGrid::FrequencyGrid(std::vector<double> values_hz) : values_(std::move(values_hz)) {
    if (values_.empty()) fail("FrequencyGrid: empty");
    if (values_.front() < 0.0) fail("FrequencyGrid: negative frequency");
    for (std::size_t k = 1; k < values_.size(); ++k) {
        if (!(values_[k] > values_[k - 1])) {
            std::ostringstream os;
            os << "FrequencyGrid: not strictly increasing at index " << k << " (" << values_[k - 1]
               << " -> " << values_[k] << ")";
            fail(os.str());
        }
    }
    for (double v : values_) {
        if (!std::isfinite(v)) fail("FrequencyGrid: non-finite frequency");
    }
}

FrequencyGrid FrequencyGrid::linspace(double lo_hz, double hi_hz, int count) {
    if (count < 2) fail("FrequencyGrid::linspace: count must be >= 2");
    if (!(hi_hz > lo_hz)) fail("FrequencyGrid::linspace: requires hi > lo");
    std::vector<double> v(static_cast<std::size_t>(count));
    const double step = (hi_hz - lo_hz) / (count - 1);
    for (int k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = lo_hz + step * k;
    v.back() = hi_hz;
    return FrequencyGrid(std::move(v));
}

SParamTensor::SParamTensor(int ports, FrequencyGrid grid, Eigen::MatrixXcd data)
    : ports_(ports), grid_(std::move(grid)), data_(std::move(data)) {
    if (ports_ < 1) fail("SParamTensor: ports must be >= 1");
    if (data_.rows() != static_cast<Eigen::Index>(ports_) * ports_ ||
        data_.cols() != grid_.size()) {
        std::ostringstream os;
        os << "SParamTensor: data shape " << data_.rows() << "x" << data_.cols()
           << " does not match p^2 x f = " << ports_ * ports_ << "x" << grid_.size();
        fail(os.str());
    }
    if (!data_.allFinite()) fail("SParamTensor: non-finite entry");
}

void MeasurementSet::validate() const {
    const int f = full_grid.size();
    if (static_cast<int>(indices.size()) != data.freq_count())
        fail("MeasurementSet: index count does not match data columns");
    int prev = -1;
    for (int idx : indices) {
        if (idx <= prev) fail("MeasurementSet: indices not strictly increasing");
        if (idx < 0 || idx >= f) fail("MeasurementSet: index out of range");
        prev = idx;
    }
}

MeasurementSet subsample_tensor(const SParamTensor& x, const std::vector<int>& indices) {
    const int fp = static_cast<int>(indices.size());
    Eigen::MatrixXcd sub(x.entries().rows(), fp);
    std::vector<double> freqs(static_cast<std::size_t>(fp));
    int prev = -1;
    for (int c = 0; c < fp; ++c) {
        const int idx = indices[static_cast<std::size_t>(c)];
        if (idx <= prev || idx >= x.freq_count())
            fail("subsample_tensor: indices must be strictly increasing and in range");
        prev = idx;
        sub.col(c) = x.entries().col(idx);
        freqs[static_cast<std::size_t>(c)] = x.grid()[idx];
    }
    MeasurementSet m;
    m.indices = indices;
    m.data = SParamTensor(x.ports(), FrequencyGrid(std::move(freqs)), std::move(sub));
    m.full_grid = x.grid();
    return m;
}

RealChannels flatten(const SParamTensor& x) {
    const Eigen::Index e = x.entries().rows();
    RealChannels out(2 * e, x.freq_count());
    for (Eigen::Index i = 0; i < e; ++i) {
        out.row(2 * i) = x.entries().row(i).real();
        out.row(2 * i + 1) = x.entries().row(i).imag();
    }
    return out;
}

SParamTensor unflatten(const RealChannels& x, int ports, const FrequencyGrid& grid) {
    const Eigen::Index e = static_cast<Eigen::Index>(ports) * ports;
    if (x.rows() != 2 * e) {
        std::ostringstream os;
        os << "unflatten: " << x.rows() << " rows does not match 2*p^2 = " << 2 * e;
        fail(os.str());
    }
    Eigen::MatrixXcd data(e, x.cols());
    for (Eigen::Index i = 0; i < e; ++i) {
        data.row(i).real() = x.row(2 * i);
        data.row(i).imag() = x.row(2 * i + 1);
    }
    return SParamTensor(ports, grid, std::move(data));
}

RealChannels subsample(const RealChannels& x, const std::vector<int>& indices) {
    RealChannels out(x.rows(), static_cast<Eigen::Index>(indices.size()));
    int prev = -1;
    for (std::size_t c = 0; c < indices.size(); ++c) {
        const int idx = indices[c];
        if (idx <= prev) fail("subsample: indices not strictly increasing");
        if (idx < 0 || idx >= x.cols()) fail("subsample: index out of range");
        prev = idx;
        out.col(static_cast<Eigen::Index>(c)) = x.col(idx);
    }
    return out;
}

RealChannels subsample_adjoint(const RealChannels& y, const std::vector<int>& indices,
                               int full_cols) {
    if (y.cols() != static_cast<Eigen::Index>(indices.size()))
        fail("subsample_adjoint: column count does not match indices");
    RealChannels out = RealChannels::Zero(y.rows(), full_cols);
    int prev = -1;
    for (std::size_t c = 0; c < indices.size(); ++c) {
        const int idx = indices[c];
        if (idx <= prev) fail("subsample_adjoint: indices not strictly increasing");
        if (idx < 0 || idx >= full_cols) fail("subsample_adjoint: index out of range");
        prev = idx;
        out.col(idx) = y.col(static_cast<Eigen::Index>(c));
    }
    return out;
}

std::vector<int> uniform_indices(int f, int count) {
    if (count < 2 || count > f) {
        std::ostringstream os;
        os << "uniform_indices: count " << count << " outside [2, " << f << "]";
        fail(os.str());
    }
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        idx[static_cast<std::size_t>(i)] =
            static_cast<int>(std::llround(static_cast<double>(i) * (f - 1) / (count - 1)));
    }
    return idx;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        fail("spearman: needs two equal-length series of at least 2 points");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> rank(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t q = i; q <= j; ++q) rank[order[q]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double psnr(const RealChannels& reference, const RealChannels& estimate) {
    if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
        fail("psnr: shape mismatch");
    const double peak = reference.cwiseAbs().maxCoeff();
    if (peak == 0.0) fail("psnr: all-zero reference");
    const double mse = (reference - estimate).squaredNorm() /
                       static_cast<double>(reference.size());
    if (mse == 0.0) return psnr_infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace spfit
