#include "spfit/vector_fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace spfit {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

struct PoleSet {
    // conjugate pairs first (stored once, +Im member), then real poles
    std::vector<Complex> pairs;
    std::vector<double> reals;

    int count() const { return 2 * static_cast<int>(pairs.size()) + static_cast<int>(reals.size()); }
    int coeff_count() const { return count(); }  // real coefficients in the basis
};

// Partial-fraction basis with real coefficients: a conjugate pair (p, conj p)
// contributes phi1 = 1/(s-p) + 1/(s-conj p) and phi2 = j/(s-p) - j/(s-conj p);
// a real pole contributes 1/(s-p).
Eigen::MatrixXcd pole_basis(const PoleSet& poles, const Eigen::VectorXcd& s) {
    const int n = static_cast<int>(s.size());
    Eigen::MatrixXcd phi(n, poles.coeff_count());
    int col = 0;
    for (const Complex& p : poles.pairs) {
        for (int t = 0; t < n; ++t) {
            const Complex a = 1.0 / (s(t) - p);
            const Complex b = 1.0 / (s(t) - std::conj(p));
            phi(t, col) = a + b;
            phi(t, col + 1) = Complex(0.0, 1.0) * (a - b);
        }
        col += 2;
    }
    for (double pr : poles.reals) {
        for (int t = 0; t < n; ++t) phi(t, col) = 1.0 / (s(t) - pr);
        ++col;
    }
    return phi;
}

// Stacks the real and imaginary parts of a complex LS block.
Eigen::MatrixXd stack_real(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXd out(2 * m.rows(), m.cols());
    out.topRows(m.rows()) = m.real();
    out.bottomRows(m.rows()) = m.imag();
    return out;
}

Eigen::VectorXd stack_real(const Eigen::VectorXcd& v) {
    Eigen::VectorXd out(2 * v.size());
    out.head(v.size()) = v.real();
    out.tail(v.size()) = v.imag();
    return out;
}

PoleSet initial_poles(int pole_count, double w_lo, double w_hi) {
    PoleSet ps;
    const int npairs = pole_count / 2;
    const bool has_real = pole_count % 2 != 0;
    const double lo = std::max(w_lo, w_hi / (2.0 * pole_count));  // keep off the origin
    for (int k = 0; k < npairs; ++k) {
        const double w =
            npairs == 1 ? w_hi : lo + (w_hi - lo) * static_cast<double>(k) / (npairs - 1);
        ps.pairs.emplace_back(-w / 100.0, w);
    }
    if (has_real) ps.reals.push_back(-0.5 * (lo + w_hi));
    return ps;
}

// Eigenvalues of the sigma zero matrix A - b*ct' in the realified pole basis.
PoleSet relocate_poles(const PoleSet& poles, const Eigen::VectorXd& sigma_coeffs) {
    const int k = poles.coeff_count();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    int idx = 0;
    for (const Complex& p : poles.pairs) {
        a(idx, idx) = p.real();
        a(idx, idx + 1) = p.imag();
        a(idx + 1, idx) = -p.imag();
        a(idx + 1, idx + 1) = p.real();
        b(idx) = 2.0;
        b(idx + 1) = 0.0;
        idx += 2;
    }
    for (double pr : poles.reals) {
        a(idx, idx) = pr;
        b(idx) = 1.0;
        ++idx;
    }
    const Eigen::MatrixXd h = a - b * sigma_coeffs.transpose();
    Eigen::EigenSolver<Eigen::MatrixXd> eig(h);
    Eigen::VectorXcd zeros = eig.eigenvalues();

    // enforce stability and exact conjugate pairing
    PoleSet out;
    const double scale = zeros.cwiseAbs().maxCoeff();
    const double imag_tol = 1e-9 * std::max(scale, 1.0);
    std::vector<Complex> complex_zeros;
    for (int i = 0; i < zeros.size(); ++i) {
        Complex z = zeros(i);
        z = Complex(-std::abs(z.real()), z.imag());
        if (std::abs(z.imag()) <= imag_tol)
            out.reals.push_back(z.real());
        else if (z.imag() > 0.0)
            complex_zeros.push_back(z);
    }
    std::sort(complex_zeros.begin(), complex_zeros.end(), [](Complex a2, Complex b2) {
        return a2.imag() < b2.imag();
    });
    std::sort(out.reals.begin(), out.reals.end());
    out.pairs = std::move(complex_zeros);

    // eigenvalues of a real matrix come in conjugate pairs, so the counts
    // match except for roundoff ties; pad with band-center reals if needed
    while (out.count() > poles.count()) {
        if (!out.reals.empty())
            out.reals.pop_back();
        else
            out.pairs.pop_back();
    }
    while (out.count() < poles.count()) out.reals.push_back(-0.5 * std::max(scale, 1.0));
    return out;
}

struct EntrySolve {
    Eigen::VectorXd coeffs;  // K residue coefficients, then d, then e
};

// Per-entry least squares with fixed poles: h ~ phi*c + d + s*e.
std::vector<EntrySolve> solve_residues(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& s,
                                       const Eigen::MatrixXcd& samples, double* rel_rms) {
    const int n = static_cast<int>(s.size());
    const int k = static_cast<int>(phi.cols());
    Eigen::MatrixXcd m(n, k + 2);
    m.leftCols(k) = phi;
    m.col(k).setOnes();
    m.col(k + 1) = s;
    const Eigen::MatrixXd mr = stack_real(m);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(mr);

    std::vector<EntrySolve> out(static_cast<std::size_t>(samples.rows()));
    double err2 = 0.0;
    double ref2 = 0.0;
    for (Eigen::Index e = 0; e < samples.rows(); ++e) {
        const Eigen::VectorXd rhs = stack_real(Eigen::VectorXcd(samples.row(e).transpose()));
        out[static_cast<std::size_t>(e)].coeffs = qr.solve(rhs);
        err2 += (mr * out[static_cast<std::size_t>(e)].coeffs - rhs).squaredNorm();
        ref2 += rhs.squaredNorm();
    }
    if (rel_rms != nullptr) *rel_rms = std::sqrt(err2 / std::max(ref2, 1e-300));
    return out;
}

RationalModel assemble_model(const PoleSet& poles, const std::vector<EntrySolve>& entries,
                             int ports, double w_scale) {
    RationalModel model;
    const int k = poles.count();
    model.poles.resize(k);
    model.residues.assign(static_cast<std::size_t>(k), Eigen::MatrixXcd::Zero(ports, ports));
    model.d.resize(ports, ports);
    model.e.resize(ports, ports);
    int pi = 0;
    for (const Complex& p : poles.pairs) {
        model.poles(pi) = w_scale * p;
        model.poles(pi + 1) = w_scale * std::conj(p);
        pi += 2;
    }
    for (double pr : poles.reals) model.poles(pi++) = Complex(w_scale * pr, 0.0);

    for (int i = 0; i < ports; ++i)
        for (int j = 0; j < ports; ++j) {
            const auto& c = entries[static_cast<std::size_t>(i * ports + j)].coeffs;
            int idx = 0;
            int pole_idx = 0;
            for (std::size_t q = 0; q < poles.pairs.size(); ++q) {
                const Complex res(c(idx), c(idx + 1));
                model.residues[static_cast<std::size_t>(pole_idx)](i, j) = w_scale * res;
                model.residues[static_cast<std::size_t>(pole_idx + 1)](i, j) =
                    w_scale * std::conj(res);
                idx += 2;
                pole_idx += 2;
            }
            for (std::size_t q = 0; q < poles.reals.size(); ++q) {
                model.residues[static_cast<std::size_t>(pole_idx)](i, j) =
                    Complex(w_scale * c(idx), 0.0);
                ++idx;
                ++pole_idx;
            }
            model.d(i, j) = c(idx);
            model.e(i, j) = c(idx + 1) / w_scale;
        }
    return model;
}

}  // namespace

void RationalModel::validate() const {
    const int k = pole_count();
    if (static_cast<int>(residues.size()) != k)
        throw std::invalid_argument("RationalModel: residue count mismatch");
    for (int i = 0; i < k; ++i) {
        if (poles(i).real() >= 0.0)
            throw std::invalid_argument("RationalModel: pole in the right half-plane");
        if (poles(i).imag() != 0.0) {
            // conjugate partner must follow (pairs stored adjacently)
            if (i + 1 >= k || std::abs(poles(i + 1) - std::conj(poles(i))) >
                                  1e-9 * std::max(1.0, std::abs(poles(i))))
                throw std::invalid_argument("RationalModel: unpaired complex pole");
            ++i;
        }
    }
}

SParamTensor vf_eval(const RationalModel& model, const FrequencyGrid& grid) {
    const int p = model.ports();
    const int f = grid.size();
    const int k = model.pole_count();
    Eigen::MatrixXcd data(p * p, f);
    for (int t = 0; t < f; ++t) {
        const Complex s(0.0, kTwoPi * grid[t]);
        Eigen::MatrixXcd acc = model.d.cast<Complex>() + s * model.e.cast<Complex>();
        for (int q = 0; q < k; ++q) {
            const Complex denom = s - model.poles(q);
            const double near = std::max({1.0, std::abs(s), std::abs(model.poles(q))});
            if (std::abs(denom) < 1e-12 * near) {
                std::ostringstream os;
                os << "vf_eval: pole " << q << " lies on the evaluation grid at " << grid[t]
                   << " Hz";
                throw std::runtime_error(os.str());
            }
            acc += model.residues[static_cast<std::size_t>(q)] / denom;
        }
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) data(i * p + j, t) = acc(i, j);
    }
    return SParamTensor(p, grid, std::move(data));
}

VfResult vf_fit(const MeasurementSet& m, int pole_count, const VfOptions& opts) {
    m.validate();
    const int ports = m.ports();
    const int fp = m.observed_count();
    if (pole_count < 1) throw std::invalid_argument("vf_fit: pole count must be >= 1");
    if (fp < 2 * pole_count + 2)
        throw std::invalid_argument("vf_fit: needs f' >= 2K + 2 observed points");

    // frequency normalization keeps the basis well conditioned at GHz scales
    Eigen::VectorXd w(fp);
    for (int t = 0; t < fp; ++t) w(t) = kTwoPi * m.data.grid()[t];
    const double w_scale = w.maxCoeff();
    if (!(w_scale > 0.0)) throw std::invalid_argument("vf_fit: degenerate frequency band");
    Eigen::VectorXcd s(fp);
    for (int t = 0; t < fp; ++t) s(t) = Complex(0.0, w(t) / w_scale);

    // per-entry sample rows, weighted so each entry contributes comparably
    Eigen::MatrixXcd samples = m.data.entries();
    Eigen::VectorXd entry_weight(samples.rows());
    for (Eigen::Index e = 0; e < samples.rows(); ++e) {
        const double rms = samples.row(e).norm() / std::sqrt(static_cast<double>(fp));
        entry_weight(e) = 1.0 / std::max(rms, 1e-12);
    }

    PoleSet poles = initial_poles(pole_count, w.minCoeff() / w_scale, 1.0);
    const int k = pole_count;

    VfResult result;
    std::vector<EntrySolve> entries;
    for (int it = 1; it <= opts.max_iters; ++it) {
        // sigma identification: per-entry QR compression of
        // [phi, 1, s, -diag(h)*phi], keeping the rows that couple the shared
        // sigma coefficients
        const Eigen::MatrixXcd phi = pole_basis(poles, s);
        Eigen::MatrixXd sigma_rows(static_cast<Eigen::Index>(samples.rows()) * k, k);
        Eigen::VectorXd sigma_rhs(static_cast<Eigen::Index>(samples.rows()) * k);
        for (Eigen::Index e = 0; e < samples.rows(); ++e) {
            Eigen::MatrixXcd block(fp, 2 * k + 2);
            block.leftCols(k) = phi;
            block.col(k).setOnes();
            block.col(k + 1) = s;
            for (int c = 0; c < k; ++c)
                block.col(k + 2 + c) =
                    (-samples.row(e).transpose().array() * phi.col(c).array()).matrix();
            Eigen::MatrixXd br = entry_weight(e) * stack_real(block);
            Eigen::VectorXd rhs =
                entry_weight(e) * stack_real(Eigen::VectorXcd(samples.row(e).transpose()));
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(br);
            Eigen::MatrixXd rr = qr.matrixQR()
                                     .topRows(2 * k + 2)
                                     .triangularView<Eigen::Upper>();
            Eigen::VectorXd qtb = (qr.householderQ().transpose() * rhs).head(2 * k + 2);
            sigma_rows.middleRows(e * k, k) = rr.bottomRightCorner(k, k);
            sigma_rhs.segment(e * k, k) = qtb.tail(k);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sigma_qr(sigma_rows);
        if (sigma_qr.rank() < k) {
            result.rank_deficient = true;
            const auto& qrm = sigma_qr.matrixQR();
            const double dmax = std::abs(qrm(0, 0));
            const double dmin = std::abs(qrm(k - 1, k - 1));
            result.condition_estimate = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();
        }
        const Eigen::VectorXd sigma_coeffs = sigma_qr.solve(sigma_rhs);

        poles = relocate_poles(poles, sigma_coeffs);

        const Eigen::MatrixXcd phi_new = pole_basis(poles, s);
        entries = solve_residues(phi_new, s, samples, &result.rel_rms);
        result.iterations = it;
        if (result.rel_rms < opts.tol) {
            result.converged = true;
            break;
        }
    }

    result.model = assemble_model(poles, entries, ports, w_scale);
    if (!result.model.d.allFinite() || !result.model.e.allFinite())
        throw std::runtime_error("vf_fit: rank-deficient system produced non-finite parameters");
    return result;
}

AutoKResult vf_fit_auto_k(const MeasurementSet& m, int k_max, const VfOptions& opts) {
    m.validate();
    const int fp = m.observed_count();
    if (fp < 8) throw std::invalid_argument("vf_fit_auto_k: too few observations");

    // deterministic ~10% holdout: observed positions 5, 15, 25, ...
    std::vector<int> hold_pos, train_pos;
    for (int i = 0; i < fp; ++i)
        ((i % 10) == 5 ? hold_pos : train_pos).push_back(i);
    if (hold_pos.empty()) {
        hold_pos.push_back(fp / 2);
        train_pos.erase(train_pos.begin() + fp / 2);
    }

    auto take = [&](const std::vector<int>& pos) {
        std::vector<int> idx;
        idx.reserve(pos.size());
        for (int i : pos) idx.push_back(m.indices[static_cast<std::size_t>(i)]);
        MeasurementSet sub;
        sub.indices = idx;
        Eigen::MatrixXcd data(m.data.entries().rows(), static_cast<Eigen::Index>(pos.size()));
        std::vector<double> freqs;
        freqs.reserve(pos.size());
        for (std::size_t c = 0; c < pos.size(); ++c) {
            data.col(static_cast<Eigen::Index>(c)) = m.data.entries().col(pos[c]);
            freqs.push_back(m.data.grid()[pos[c]]);
        }
        sub.data = SParamTensor(m.ports(), FrequencyGrid(std::move(freqs)), std::move(data));
        sub.full_grid = m.full_grid;
        return sub;
    };

    const MeasurementSet train = take(train_pos);
    const MeasurementSet hold = take(hold_pos);

    const int fit_max = (train.observed_count() - 2) / 2;
    AutoKResult out;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= std::min(k_max, fit_max); k += 2) {
        double score = std::numeric_limits<double>::infinity();
        try {
            const VfResult fit = vf_fit(train, k, opts);
            const SParamTensor pred = vf_eval(fit.model, hold.data.grid());
            score = (pred.entries() - hold.data.entries()).norm() /
                    std::max(hold.data.entries().norm(), 1e-300);
        } catch (const std::exception&) {
            // unusable K (singular or diverged); keep +inf score
        }
        out.holdout_scores.emplace_back(k, score);
        if (score < best) {
            best = score;
            out.chosen_k = k;
        }
    }
    if (out.chosen_k == 0) throw std::runtime_error("vf_fit_auto_k: no pole count succeeded");
    out.fit = vf_fit(m, out.chosen_k, opts);
    return out;
}

std::string RationalModel::export_text() const {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.16e", v);
        return std::string(buf);
    };
    std::ostringstream os;
    const int p = ports();
    os << "ports " << p << "\n";
    os << "poles " << pole_count() << "\n";
    for (int k = 0; k < pole_count(); ++k)
        os << "pole " << k << " " << num(poles(k).real()) << " " << num(poles(k).imag()) << "\n";
    for (int k = 0; k < pole_count(); ++k) {
        os << "residue " << k << "\n";
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < p; ++j) {
                const Complex c = residues[static_cast<std::size_t>(k)](i, j);
                os << num(c.real()) << " " << num(c.imag());
                os << (j + 1 == p ? "\n" : " ");
            }
        }
    }
    os << "d\n";
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) os << num(d(i, j)) << (j + 1 == p ? "\n" : " ");
    os << "e\n";
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) os << num(e(i, j)) << (j + 1 == p ? "\n" : " ");
    return os.str();
}

}  // namespace spfit
