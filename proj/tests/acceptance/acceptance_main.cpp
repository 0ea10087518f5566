// Acceptance suite: one checked criterion per section, one PASS/FAIL line
// each. Criteria 7-9 run reduced-budget fits on a long-channel synthetic
// preset and take the bulk of the runtime; --only and --jobs control that.
//
//   spfit_acceptance [--only 1,2,...] [--jobs N] [--seeds K]

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "spfit/dip_net.hpp"
#include "spfit/regularizer.hpp"
#include "spfit/rng.hpp"
#include "spfit/sgld.hpp"
#include "spfit/sparam_core.hpp"
#include "spfit/synth.hpp"
#include "spfit/touchstone.hpp"
#include "spfit/vector_fit.hpp"

using namespace spfit;

namespace {

constexpr double kPi = 3.14159265358979323846;
using Clock = std::chrono::steady_clock;

int g_jobs = 2;
int g_trend_seeds = 5;

double elapsed_sec(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- utilities

ad::Matrix random_matrix(int rows, int cols, std::mt19937& rng, double away_from_zero = 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ad::Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) {
            double v = normal(rng);
            if (away_from_zero > 0.0 && std::abs(v) < away_from_zero)
                v = v < 0.0 ? v - away_from_zero : v + away_from_zero;
            m(r, c) = v;
        }
    return m;
}

// worst relative error of tape gradients vs central finite differences
double fd_check(ad::Tape& tape, ad::Node root, const std::vector<ad::Node>& leaves,
                std::mt19937& rng, int coords_per_leaf = 6) {
    tape.forward();
    tape.backward(root);
    std::vector<ad::Matrix> grads;
    for (ad::Node leaf : leaves) grads.push_back(tape.grad(leaf));
    double err2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        ad::Matrix& x = tape.value(leaves[li]);
        for (int c = 0; c < coords_per_leaf; ++c) {
            const Eigen::Index i = static_cast<Eigen::Index>(rng() % x.size());
            const double x0 = x.data()[i];
            const double h = 1e-5 * (1.0 + std::abs(x0));
            x.data()[i] = x0 + h;
            tape.forward();
            const double lp = tape.value(root)(0, 0);
            x.data()[i] = x0 - h;
            tape.forward();
            const double lm = tape.value(root)(0, 0);
            x.data()[i] = x0;
            const double fd = (lp - lm) / (2.0 * h);
            const double g = grads[li].data()[i];
            err2 += (fd - g) * (fd - g);
            ref2 += fd * fd;
        }
    }
    tape.forward();
    // 2-norm relative error over the sampled coordinates; individual entries
    // below the finite-difference noise floor wash out
    return std::sqrt(err2) / std::max(std::sqrt(ref2), 1e-8);
}

void naive_dft(const std::vector<std::complex<double>>& in,
               std::vector<std::complex<double>>& out, int sign) {
    const int n = static_cast<int>(in.size());
    out.assign(static_cast<std::size_t>(n), {0.0, 0.0});
    for (int t = 0; t < n; ++t) {
        std::complex<double> acc(0.0, 0.0);
        for (int j = 0; j < n; ++j)
            acc += in[static_cast<std::size_t>(j)] *
                   std::exp(std::complex<double>(0.0, sign * 2.0 * kPi * j * t / n));
        out[static_cast<std::size_t>(t)] = acc;
    }
}

std::vector<double> mirror_even_vec(const std::vector<double>& r) {
    const int L = static_cast<int>(r.size());
    std::vector<double> m(static_cast<std::size_t>(2 * L));
    for (int k = 0; k < L; ++k) m[static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(k)];
    m[static_cast<std::size_t>(L)] = r[static_cast<std::size_t>(L - 1)];
    for (int k = 1; k < L; ++k)
        m[static_cast<std::size_t>(2 * L - k)] = r[static_cast<std::size_t>(k)];
    return m;
}

// discrete Hilbert transform via a naive DFT (independent oracle)
std::vector<double> hilbert_oracle(const std::vector<double>& m) {
    const int n = static_cast<int>(m.size());
    std::vector<std::complex<double>> x(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = {m[static_cast<std::size_t>(j)], 0.0};
    std::vector<std::complex<double>> spec;
    naive_dft(x, spec, -1);
    const int half = n / 2;
    for (int t = 0; t < n; ++t) {
        std::complex<double> mult(0.0, 0.0);
        if (t >= 1 && t <= half - 1) mult = {0.0, -1.0};
        if (t >= half + 1) mult = {0.0, 1.0};
        spec[static_cast<std::size_t>(t)] *= mult;
    }
    std::vector<std::complex<double>> time;
    naive_dft(spec, time, +1);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = time[static_cast<std::size_t>(j)].real() / n;
    return out;
}

// negative-time energy fraction of a complex half-spectrum (zero Nyquist bin)
double negative_time_fraction(const std::vector<std::complex<double>>& h) {
    const int f = static_cast<int>(h.size());
    std::vector<std::complex<double>> g(static_cast<std::size_t>(2 * f), {0.0, 0.0});
    for (int k = 0; k < f; ++k) {
        g[static_cast<std::size_t>(k)] = h[static_cast<std::size_t>(k)];
        if (k >= 1) g[static_cast<std::size_t>(2 * f - k)] = std::conj(h[static_cast<std::size_t>(k)]);
    }
    std::vector<std::complex<double>> time;
    naive_dft(g, time, +1);
    double total = 0.0, negative = 0.0;
    for (int t = 0; t < 2 * f; ++t) {
        const double e = std::norm(time[static_cast<std::size_t>(t)]);
        total += e;
        if (t > f) negative += e;
    }
    return negative / total;
}

void run_parallel(int task_count, const std::function<void(int)>& task) {
    if (g_jobs <= 1) {
        for (int i = 0; i < task_count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < std::min(g_jobs, task_count); ++w)
        workers.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= task_count) return;
                task(i);
            }
        });
    for (auto& t : workers) t.join();
}

// ------------------------------------------------------------ the preset

SynthResult long_channel_preset() {
    SynthSpec spec;
    spec.ports = 2;
    spec.freq_count = 1500;
    spec.freq_min_hz = 0.0;
    spec.freq_max_hz = 2e10;
    spec.pole_pairs = 40;
    spec.damping_min = 1e-3;
    spec.damping_max = 1e-2;
    spec.amplitude = 1.0;
    spec.reciprocal = true;
    spec.seed = 1;
    return generate(spec);
}

FitConfig reduced_budget_config(std::uint64_t seed) {
    FitConfig cfg;
    cfg.iterations = 5000;  // reduced budget; 20000 is the overnight default
    cfg.burn_in = 3750;
    cfg.sample_every = 25;  // keeps the 50-sample protocol
    cfg.seed = seed;
    return cfg;
}

struct PresetFit {
    double psnr_db = 0.0;
    double spearman_std_err = 0.0;
    bool ok = false;
    std::string error;
};

PresetFit run_preset_fit(const SynthResult& preset, double rate, const FitConfig& cfg) {
    PresetFit out;
    try {
        const int f = preset.tensor.freq_count();
        const int count = static_cast<int>(std::lround(rate * f));
        MeasurementSet m = subsample_tensor(preset.tensor, uniform_indices(f, count));
        PosteriorSummary s = fit(m, cfg);
        out.psnr_db = psnr(flatten(preset.tensor), flatten(s.mean));

        const int p = preset.tensor.ports();
        std::vector<double> std_agg(static_cast<std::size_t>(f), 0.0);
        std::vector<double> err_agg(static_cast<std::size_t>(f), 0.0);
        for (int k = 0; k < f; ++k) {
            double se = 0.0, ee = 0.0;
            for (int e = 0; e < p * p; ++e) {
                se += s.std_magnitude(e, k);
                ee += std::abs(s.mean.entries()(e, k) - preset.tensor.entries()(e, k));
            }
            std_agg[static_cast<std::size_t>(k)] = se / (p * p);
            err_agg[static_cast<std::size_t>(k)] = ee / (p * p);
        }
        out.spearman_std_err = spearman(std_agg, err_agg);
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

// ------------------------------------------------------------- criteria

struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::string&)> run;
};

bool criterion1(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937 rng(20260811);
    int cases = 0;
    double worst = 0.0;
    const char* worst_op = "";
    auto record = [&](const char* op, double err) {
        ++cases;
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    for (int rep = 0; rep < 24; ++rep) {
        const int ci = 1 + static_cast<int>(rng() % 6);
        const int co = 1 + static_cast<int>(rng() % 6);
        const int L = 8 + static_cast<int>(rng() % 48);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(ci, L, rng));
        ad::Node w = t.param(random_matrix(co, 3 * ci, rng));
        ad::Node b = t.param(random_matrix(co, 1, rng));
        record("conv1d", fd_check(t, t.sum_squares(t.conv1d(x, w, b)), {x, w, b}, rng));
    }
    for (int rep = 0; rep < 24; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 6);
        const int L = 8 + static_cast<int>(rng() % 48);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng));
        ad::Node gamma = t.param(random_matrix(c, 1, rng, 0.2));
        ad::Node beta = t.param(random_matrix(c, 1, rng));
        ad::Node target = t.constant(random_matrix(c, L, rng));
        record("batchnorm", fd_check(t, t.sum_squares(t.sub(t.batchnorm(x, gamma, beta), target)),
                        {x, gamma, beta}, rng));
    }
    for (int rep = 0; rep < 24; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 8);
        const int L = 8 + static_cast<int>(rng() % 56);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng, 1e-3));
        record("leaky_relu", fd_check(t, t.sum_squares(t.leaky_relu(x, 0.01)), {x}, rng));
    }
    for (int rep = 0; rep < 20; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 8);
        const int L = 2 * (4 + static_cast<int>(rng() % 28));
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng));
        record("avg_pool", fd_check(t, t.sum_squares(t.avg_pool(x)), {x}, rng));
    }
    for (int rep = 0; rep < 20; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 8);
        const int L = 4 + static_cast<int>(rng() % 28);
        const int out_len = L + static_cast<int>(rng() % (2 * L));
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng));
        record("upsample", fd_check(t, t.sum_squares(t.upsample_linear(x, out_len)), {x}, rng));
    }
    for (int rep = 0; rep < 16; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 4);
        const int L = 8 + static_cast<int>(rng() % 40);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng));
        record("rfft", fd_check(t, t.sum_squares(t.rfft_pair(x)), {x}, rng));
    }
    for (int rep = 0; rep < 16; ++rep) {
        const int c = 2 * (1 + static_cast<int>(rng() % 2));
        const int L = 8 + static_cast<int>(rng() % 40);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng));
        record("cdft", fd_check(t, t.sum_squares(t.cdft(t.cdft(x, false), true)), {x}, rng));
        ad::Tape t2;
        ad::Node x2 = t2.param(random_matrix(c, L, rng));
        record("irfft", fd_check(t2, t2.sum_squares(t2.irfft_pair(x2)), {x2}, rng));
    }
    for (int rep = 0; rep < 16; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 8);
        const int L = 8 + static_cast<int>(rng() % 56);
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, L, rng, 1e-3));
        record("sum_abs", fd_check(t, t.sum_abs(x), {x}, rng));
        ad::Tape t2;
        ad::Node x2 = t2.param(random_matrix(c, L, rng));
        record("sum_squares", fd_check(t2, t2.sum_squares(x2), {x2}, rng));
    }
    for (int rep = 0; rep < 16; ++rep) {
        const int c = 1 + static_cast<int>(rng() % 3);
        const int f = 2 * (8 + static_cast<int>(rng() % 24));
        ad::Tape t;
        ad::Node x = t.param(random_matrix(c, 2 * f, rng));
        record("cel", fd_check(t, t.sum_squares(build_cel(t, x, 1)), {x}, rng));
    }
    for (int rep = 0; rep < 16; ++rep) {
        const int pairs = 1 + static_cast<int>(rng() % 4);
        const int L = 8 + static_cast<int>(rng() % 40);
        ad::Tape t;
        // keep third differences away from the |.| kink
        ad::Matrix x = random_matrix(2 * pairs, L, rng);
        x *= 3.0;
        ad::Node xn = t.param(x);
        record("third_diff", fd_check(t, build_third_diff_penalty(t, xn, {0.37, false}), {xn}, rng));
    }

    const double sec = elapsed_sec(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d cases, worst rel err %.3g (%s), %.1f s", cases, worst,
                  worst_op, sec);
    detail = buf;
    return cases >= 200 && worst <= 1e-4 && sec < 60.0;
}

bool criterion2(std::string& detail) {
    // constant input: imaginary residual
    const int f0 = 64;
    RealChannels constant = RealChannels::Constant(1, 2 * f0, 0.8);
    RealChannels const_out = cel_forward(constant);
    double const_resid = const_out.row(1).cwiseAbs().maxCoeff();

    // cosine Hilbert identity vs the naive-DFT oracle
    double cos_err = 0.0;
    {
        const int f = 96;
        const int L = 2 * f;
        for (int m : {2, 6, 14, 30}) {
            std::vector<double> r(static_cast<std::size_t>(L));
            for (int k = 0; k < L; ++k)
                r[static_cast<std::size_t>(k)] = std::cos(2.0 * kPi * m * k / (2.0 * L));
            RealChannels rc(1, L);
            for (int k = 0; k < L; ++k) rc(0, k) = r[static_cast<std::size_t>(k)];
            RealChannels out = cel_forward(rc);
            const std::vector<double> h = hilbert_oracle(mirror_even_vec(r));
            for (int k = 0; k < f; ++k)
                cos_err = std::max(cos_err,
                                   std::abs(out(1, k) + h[static_cast<std::size_t>(k)]));
        }
    }

    // analytic causality: Nyquist-cancelling cosine pair
    double analytic_neg = 0.0;
    {
        const int f = 128;
        const int L = 2 * f;
        RealChannels rc(1, L);
        for (int k = 0; k < L; ++k)
            rc(0, k) = std::cos(2.0 * kPi * 20 * k / (2.0 * f)) +
                       std::cos(2.0 * kPi * 33 * k / (2.0 * f));
        RealChannels out = cel_forward(rc);
        std::vector<std::complex<double>> h(static_cast<std::size_t>(f));
        for (int k = 0; k < f; ++k) h[static_cast<std::size_t>(k)] = {out(0, k), out(1, k)};
        analytic_neg = negative_time_fraction(h);
    }

    // synthetic spectra pushed through the CEL, resonances inside half band
    double synth_neg = 0.0;
    for (unsigned seed : {11u, 12u, 13u}) {
        SynthSpec spec;
        spec.ports = 1;
        spec.freq_count = 192;
        spec.freq_min_hz = 0.0;
        spec.freq_max_hz = 5e9;
        spec.pole_pairs = 5;
        spec.damping_min = 0.02;
        spec.damping_max = 0.08;
        spec.seed = seed;
        auto synth = generate(spec);
        const int f = spec.freq_count;
        SParamTensor extended =
            vf_eval(synth.model, FrequencyGrid::linspace(0.0, 2e10, 2 * f));
        RealChannels real_part(1, 2 * f);
        for (int k = 0; k < 2 * f; ++k) real_part(0, k) = extended(0, 0, k).real();
        RealChannels out = cel_forward(real_part);
        std::vector<std::complex<double>> h(static_cast<std::size_t>(f));
        for (int k = 0; k < f; ++k) h[static_cast<std::size_t>(k)] = {out(0, k), out(1, k)};
        synth_neg = std::max(synth_neg, negative_time_fraction(h));
    }

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "const imag %.2e, cosine vs oracle %.2e, neg-time analytic %.2e synth %.2e",
                  const_resid, cos_err, analytic_neg, synth_neg);
    detail = buf;
    return const_resid <= 1e-10 && cos_err <= 1e-6 && analytic_neg <= 1e-6 &&
           synth_neg <= 1e-2;
}

bool criterion3(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst_rms = 0.0;
    double worst_pole = 0.0;
    int failures = 0;

    for (int model_idx = 0; model_idx < 20; ++model_idx) {
        const int p = 1 + static_cast<int>(rng() % 4);
        const int pairs = 1 + static_cast<int>(rng() % 6);
        const bool add_real_pole = model_idx % 4 == 0;
        const int K = 2 * pairs + (add_real_pole ? 1 : 0);
        if (K > 12) {
            --model_idx;
            continue;
        }

        RationalModel truth;
        truth.poles.resize(K);
        truth.residues.assign(static_cast<std::size_t>(K), Eigen::MatrixXcd::Zero(p, p));
        truth.d.resize(p, p);
        truth.e = Eigen::MatrixXd::Zero(p, p);
        const double w_max = 2.0 * kPi * 2e10;
        for (int q = 0; q < pairs; ++q) {
            const double w = w_max * (0.08 + 0.84 * uni(rng));
            const double damp = 0.01 + 0.08 * uni(rng);
            truth.poles(2 * q) = Complex(-damp * w, w);
            truth.poles(2 * q + 1) = std::conj(truth.poles(2 * q));
            Eigen::MatrixXcd res(p, p);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j)
                    res(i, j) = damp * w * Complex(uni(rng) - 0.5, uni(rng) - 0.5);
            truth.residues[static_cast<std::size_t>(2 * q)] = res;
            truth.residues[static_cast<std::size_t>(2 * q + 1)] = res.conjugate();
        }
        if (add_real_pole) {
            const double w = w_max * (0.05 + 0.4 * uni(rng));
            truth.poles(K - 1) = Complex(-w, 0.0);
            Eigen::MatrixXcd res(p, p);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) res(i, j) = Complex(w * (uni(rng) - 0.5), 0.0);
            truth.residues[static_cast<std::size_t>(K - 1)] = res;
        }
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) truth.d(i, j) = uni(rng) - 0.5;
        if (model_idx % 2 == 0)
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) truth.e(i, j) = (uni(rng) - 0.5) / w_max;

        const int samples = std::max(60, 4 * K + 4);
        FrequencyGrid grid = FrequencyGrid::linspace(1e8, 2e10, samples);
        SParamTensor data = vf_eval(truth, grid);
        MeasurementSet m = subsample_tensor(data, uniform_indices(samples, samples));

        try {
            VfResult r = vf_fit(m, K);
            worst_rms = std::max(worst_rms, r.rel_rms);
            for (int q = 0; q < K; ++q) {
                double best = std::numeric_limits<double>::infinity();
                for (int q2 = 0; q2 < K; ++q2)
                    best = std::min(best, std::abs(r.model.poles(q2) - truth.poles(q)) /
                                              std::abs(truth.poles(q)));
                worst_pole = std::max(worst_pole, best);
            }
        } catch (const std::exception&) {
            ++failures;
        }
    }

    const double sec = elapsed_sec(t0);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "20 models, worst rel RMS %.2e, worst pole err %.2e, %d failures, %.1f s",
                  worst_rms, worst_pole, failures, sec);
    detail = buf;
    return failures == 0 && worst_rms <= 1e-6 && worst_pole <= 1e-6 && sec < 120.0;
}

bool criterion4(std::string& detail) {
    std::mt19937 rng(9001);
    std::normal_distribution<double> normal(0.0, 1.0);

    // adjoint identity, exact to 1e-12
    double worst_adjoint = 0.0;
    for (int rep = 0; rep < 30; ++rep) {
        const int r = 2 + static_cast<int>(rng() % 8);
        const int f = 12 + static_cast<int>(rng() % 64);
        const int fp = 2 + static_cast<int>(rng() % (f - 2));
        auto idx = uniform_indices(f, fp);
        RealChannels x(r, f), y(r, fp);
        for (int c = 0; c < f; ++c)
            for (int i = 0; i < r; ++i) x(i, c) = normal(rng);
        for (int c = 0; c < fp; ++c)
            for (int i = 0; i < r; ++i) y(i, c) = normal(rng);
        double lhs = 0.0, rhs = 0.0;
        RealChannels ax = subsample(x, idx);
        for (int i = 0; i < r; ++i)
            for (int c = 0; c < fp; ++c) lhs += ax(i, c) * y(i, c);
        RealChannels aty = subsample_adjoint(y, idx, f);
        for (int i = 0; i < r; ++i)
            for (int c = 0; c < f; ++c) rhs += x(i, c) * aty(i, c);
        worst_adjoint =
            std::max(worst_adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }

    // flatten/unflatten exactness
    double flatten_err = 0.0;
    for (int p : {1, 2, 3, 4}) {
        const int f = 16 + p;
        Eigen::MatrixXcd data(p * p, f);
        for (int e = 0; e < p * p; ++e)
            for (int k = 0; k < f; ++k) data(e, k) = Complex(normal(rng), normal(rng));
        SParamTensor x(p, FrequencyGrid::linspace(1e9, 2e10, f), data);
        SParamTensor back = unflatten(flatten(x), p, x.grid());
        flatten_err = std::max(flatten_err, (back.entries() - x.entries()).cwiseAbs().maxCoeff());
    }

    // touchstone round-trips across formats and port counts
    double touchstone_err = 0.0;
    for (int p : {1, 2, 3, 4}) {
        for (auto fmt : {TouchstoneFormat::RI, TouchstoneFormat::MA, TouchstoneFormat::DB}) {
            const int f = 16;
            Eigen::MatrixXcd data(p * p, f);
            for (int e = 0; e < p * p; ++e)
                for (int k = 0; k < f; ++k) data(e, k) = Complex(normal(rng), normal(rng));
            SParamTensor x(p, FrequencyGrid::linspace(1e9, 2e10, f), data);
            TouchstoneOptions opts;
            opts.format = fmt;
            auto [back, ropts] = parse_touchstone(write_touchstone(x, opts), p);
            for (int e = 0; e < p * p; ++e)
                for (int k = 0; k < f; ++k) {
                    const Complex a = x.entries()(e, k);
                    const Complex b = back.entries()(e, k);
                    touchstone_err =
                        std::max(touchstone_err, std::abs(a - b) / std::max(1e-30, std::abs(a)));
                }
        }
    }

    char buf[200];
    std::snprintf(buf, sizeof(buf), "adjoint %.2e, flatten %.2e, touchstone %.2e",
                  worst_adjoint, flatten_err, touchstone_err);
    detail = buf;
    return worst_adjoint <= 1e-12 && flatten_err == 0.0 && touchstone_err <= 1e-12;
}

bool criterion5(std::string& detail) {
    // integer-coefficient quadratics: exactly zero
    const int f = 24;
    Eigen::MatrixXcd quad(1, f);
    for (int k = 0; k < f; ++k)
        quad(0, k) = Complex(3.0, -2.0) * static_cast<double>(k) * static_cast<double>(k) +
                     Complex(-2.0, 1.0) * static_cast<double>(k) + Complex(5.0, 5.0);
    SParamTensor quad_tensor(1, FrequencyGrid::linspace(1e9, 2e9, f), quad);
    const double quad_penalty = third_diff_penalty(quad_tensor, {0.1, false});

    // cubic channel: lambda * 6 * (f - 3), exactly
    const int fc = 10;
    Eigen::MatrixXcd cubic(1, fc);
    for (int k = 0; k < fc; ++k)
        cubic(0, k) = Complex(static_cast<double>(k) * k * k, 0.0);
    SParamTensor cubic_tensor(1, FrequencyGrid::linspace(1e9, 2e9, fc), cubic);
    const double cubic_penalty = third_diff_penalty(cubic_tensor, {0.1, false});
    const double cubic_expected = 0.1 * (6.0 * (fc - 3));
    const bool cubic_exact = cubic_penalty == cubic_expected;

    // brute-force oracle agreement
    std::mt19937 rng(5150);
    std::normal_distribution<double> normal(0.0, 1.0);
    double oracle_err = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
        const int p = 1 + static_cast<int>(rng() % 3);
        const int ff = 12 + static_cast<int>(rng() % 48);
        Eigen::MatrixXcd data(p * p, ff);
        for (int e = 0; e < p * p; ++e)
            for (int k = 0; k < ff; ++k) data(e, k) = Complex(normal(rng), normal(rng));
        SParamTensor x(p, FrequencyGrid::linspace(1e9, 2e10, ff), data);
        const double lambda = 0.05 + 0.5 * (rep + 1) / 6.0;
        double brute = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                for (int k = 0; k + 3 < ff; ++k)
                    brute += std::abs(x(i, j, k + 3) - 3.0 * x(i, j, k + 2) +
                                      3.0 * x(i, j, k + 1) - x(i, j, k));
        brute *= lambda;
        const double got = third_diff_penalty(x, {lambda, false});
        oracle_err = std::max(oracle_err, std::abs(got - brute) / std::max(1.0, brute));
    }

    char buf[200];
    std::snprintf(buf, sizeof(buf), "quadratic %.3g, cubic %s (%.17g), oracle err %.2e",
                  quad_penalty, cubic_exact ? "exact" : "off", cubic_penalty, oracle_err);
    detail = buf;
    return quad_penalty == 0.0 && cubic_exact && oracle_err <= 1e-10;
}

bool criterion6(std::string& detail) {
    // tiny instance shared by the three checks
    SynthSpec spec;
    spec.ports = 1;
    spec.freq_count = 32;
    spec.freq_min_hz = 1e9;
    spec.freq_max_hz = 2e10;
    spec.pole_pairs = 2;
    spec.damping_min = 0.02;
    spec.damping_max = 0.08;
    spec.seed = 5;
    auto synth = generate(spec);
    MeasurementSet m = subsample_tensor(synth.tensor, uniform_indices(32, 16));

    // (a) bitwise equality with plain gradient descent
    FitConfig gd_cfg;
    gd_cfg.iterations = 40;
    gd_cfg.burn_in = 20;
    gd_cfg.sample_every = 20;
    gd_cfg.lambda = 0.0;
    gd_cfg.sgld_noise = false;
    gd_cfg.input_noise = false;
    gd_cfg.seed = 11;
    PosteriorSummary got = fit(m, gd_cfg);

    DipNetwork net(2, 32, derive_seed(gd_cfg.seed, 0), true, gd_cfg.leaky_slope);
    ad::Tape& tape = net.tape();
    ad::Node observed = tape.gather_cols(net.output(), m.indices);
    ad::Node target = tape.constant(flatten(m.data));
    ad::Node loss = tape.sum_squares(tape.sub(observed, target));
    const RealChannels z = make_latent(m);
    bool gd_identical = true;
    RealChannels final_gd;
    for (int t = 1; t <= gd_cfg.iterations; ++t) {
        tape.set_value(net.input(), z);
        tape.forward();
        if (tape.value(loss)(0, 0) != got.loss_trace[static_cast<std::size_t>(t - 1)].data_loss)
            gd_identical = false;
        if (t == gd_cfg.iterations) final_gd = tape.value(net.output());
        tape.backward(loss);
        for (int i = 0; i < net.param_array_count(); ++i)
            tape.value(net.param(i)) -= (gd_cfg.step / 2.0) * tape.grad(net.param(i));
    }
    if ((flatten(got.samples.back()) - final_gd).cwiseAbs().maxCoeff() != 0.0)
        gd_identical = false;

    // (b) the published default schedule records exactly 50 samples
    FitConfig defaults;
    defaults.seed = 3;
    PosteriorSummary full = fit(m, defaults);
    const bool fifty = full.samples.size() == 50;

    // (c) bitwise reproducibility with every mechanism on
    FitConfig noisy;
    noisy.iterations = 120;
    noisy.burn_in = 60;
    noisy.sample_every = 20;
    noisy.seed = 77;
    PosteriorSummary a = fit(m, noisy);
    PosteriorSummary b = fit(m, noisy);
    bool reproducible = (a.mean.entries() - b.mean.entries()).cwiseAbs().maxCoeff() == 0.0 &&
                        (a.std_channels - b.std_channels).cwiseAbs().maxCoeff() == 0.0;
    for (std::size_t i = 0; i < a.samples.size() && reproducible; ++i)
        reproducible = (a.samples[i].entries() - b.samples[i].entries()).cwiseAbs().maxCoeff() == 0.0;

    char buf[200];
    std::snprintf(buf, sizeof(buf), "gd bitwise %s, default samples %zu, reproducible %s",
                  gd_identical ? "yes" : "NO", full.samples.size(),
                  reproducible ? "yes" : "NO");
    detail = buf;
    return gd_identical && fifty && reproducible;
}

// shared between criteria 7 and 9
struct TrendResults {
    bool ran = false;
    std::vector<double> dip_means;  // one per rate
    double vf_psnr_at_5 = 0.0;
    std::vector<double> spearman_at_5;  // one per seed
    std::string error;
};
TrendResults g_trend;

void run_trend(const SynthResult& preset) {
    const auto t0 = Clock::now();
    const std::vector<double> rates{0.05, 0.10, 0.15};
    struct Task {
        int rate_idx;
        int seed_idx;
        PresetFit result;
    };
    std::vector<Task> tasks;
    for (int ri = 0; ri < 3; ++ri)
        for (int si = 0; si < g_trend_seeds; ++si) tasks.push_back({ri, si, {}});

    run_parallel(static_cast<int>(tasks.size()), [&](int i) {
        Task& t = tasks[static_cast<std::size_t>(i)];
        FitConfig cfg = reduced_budget_config(
            derive_seed(101 + static_cast<std::uint64_t>(t.seed_idx),
                        static_cast<std::uint64_t>(t.rate_idx)));
        t.result = run_preset_fit(preset, rates[static_cast<std::size_t>(t.rate_idx)], cfg);
        std::printf("  [trend] rate %.2f seed %d: %s psnr %.2f dB (%.0f s)\n",
                    rates[static_cast<std::size_t>(t.rate_idx)], t.seed_idx,
                    t.result.ok ? "ok" : t.result.error.c_str(), t.result.psnr_db,
                    elapsed_sec(t0));
        std::fflush(stdout);
    });

    g_trend.dip_means.assign(3, 0.0);
    for (int ri = 0; ri < 3; ++ri) {
        double sum = 0.0;
        int n = 0;
        for (const Task& t : tasks)
            if (t.rate_idx == ri && t.result.ok) {
                sum += t.result.psnr_db;
                ++n;
            }
        g_trend.dip_means[static_cast<std::size_t>(ri)] = n > 0 ? sum / n : -1e9;
    }
    for (const Task& t : tasks)
        if (t.rate_idx == 0 && t.result.ok) g_trend.spearman_at_5.push_back(t.result.spearman_std_err);

    // VF baseline at the 5% rate (deterministic given the measurement set)
    try {
        const int f = preset.tensor.freq_count();
        const int count = static_cast<int>(std::lround(0.05 * f));
        MeasurementSet m = subsample_tensor(preset.tensor, uniform_indices(f, count));
        AutoKResult vf = vf_fit_auto_k(m, 40);
        SParamTensor pred = vf_eval(vf.fit.model, preset.tensor.grid());
        g_trend.vf_psnr_at_5 = psnr(flatten(preset.tensor), flatten(pred));
    } catch (const std::exception& e) {
        g_trend.error = e.what();
        g_trend.vf_psnr_at_5 = -1e9;
    }
    g_trend.ran = true;
}

bool criterion7(std::string& detail) {
    SynthResult preset = long_channel_preset();
    if (!g_trend.ran) run_trend(preset);
    const auto& m = g_trend.dip_means;
    const bool monotone = m[0] <= m[1] && m[1] <= m[2];
    const bool beats_vf = m[0] >= g_trend.vf_psnr_at_5;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "DIP mean PSNR {%.2f, %.2f, %.2f} dB at {5, 10, 15}%%; VF auto-K at 5%%: "
                  "%.2f dB (T=5000 budget)",
                  m[0], m[1], m[2], g_trend.vf_psnr_at_5);
    detail = buf;
    return monotone && beats_vf;
}

bool criterion8(std::string& detail) {
    SynthResult preset = long_channel_preset();
    const double rate = 0.10;
    struct Task {
        bool vanilla;
        int seed_idx;
        PresetFit result;
    };
    std::vector<Task> tasks;
    for (int si = 0; si < g_trend_seeds; ++si) {
        tasks.push_back({false, si, {}});
        tasks.push_back({true, si, {}});
    }
    const auto t0 = Clock::now();
    run_parallel(static_cast<int>(tasks.size()), [&](int i) {
        Task& t = tasks[static_cast<std::size_t>(i)];
        FitConfig cfg = reduced_budget_config(
            derive_seed(301 + static_cast<std::uint64_t>(t.seed_idx), t.vanilla ? 1 : 0));
        if (t.vanilla) {
            cfg.sgld_noise = false;
            cfg.input_noise = false;
            cfg.regularizer = false;
            cfg.causality_layer = false;
        }
        t.result = run_preset_fit(preset, rate, cfg);
        std::printf("  [ablate] %s seed %d: %s psnr %.2f dB (%.0f s)\n",
                    t.vanilla ? "vanilla" : "full   ", t.seed_idx,
                    t.result.ok ? "ok" : t.result.error.c_str(), t.result.psnr_db,
                    elapsed_sec(t0));
        std::fflush(stdout);
    });

    double full_mean = 0.0, vanilla_mean = 0.0;
    int nf = 0, nv = 0;
    for (const Task& t : tasks) {
        if (!t.result.ok) continue;
        if (t.vanilla) {
            vanilla_mean += t.result.psnr_db;
            ++nv;
        } else {
            full_mean += t.result.psnr_db;
            ++nf;
        }
    }
    full_mean = nf > 0 ? full_mean / nf : -1e9;
    vanilla_mean = nv > 0 ? vanilla_mean / nv : -1e9;

    char buf[200];
    std::snprintf(buf, sizeof(buf), "full %.2f dB vs vanilla %.2f dB over %d seeds at 10%%",
                  full_mean, vanilla_mean, g_trend_seeds);
    detail = buf;
    return nf > 0 && nv > 0 && full_mean >= vanilla_mean;
}

bool criterion9(std::string& detail) {
    SynthResult preset = long_channel_preset();
    if (!g_trend.ran) run_trend(preset);
    std::vector<double> corr(g_trend.spearman_at_5.begin(),
                             g_trend.spearman_at_5.begin() +
                                 std::min<std::size_t>(3, g_trend.spearman_at_5.size()));
    if (corr.size() < 3) {
        detail = "fewer than 3 successful fits at the 5% rate";
        return false;
    }
    const double mean = (corr[0] + corr[1] + corr[2]) / 3.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "rank corr(std, |err|) = {%.3f, %.3f, %.3f}, mean %.3f", corr[0], corr[1],
                  corr[2], mean);
    detail = buf;
    return mean > 0.0;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::string list = argv[++i];
            for (std::size_t pos = 0; pos < list.size();) {
                std::size_t comma = list.find(',', pos);
                if (comma == std::string::npos) comma = list.size();
                only.insert(std::stoi(list.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        } else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) {
            g_jobs = std::max(1, std::stoi(argv[++i]));
        } else if (std::strcmp(argv[i], "--seeds") == 0 && i + 1 < argc) {
            g_trend_seeds = std::max(5, std::stoi(argv[++i]));
        } else {
            std::fprintf(stderr,
                         "usage: spfit_acceptance [--only 1,2,...] [--jobs N] [--seeds K>=5]\n");
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "autodiff gradient suite", criterion1},
        {2, "causality / Hilbert suite", criterion2},
        {3, "vector-fitting exact recovery", criterion3},
        {4, "operator algebra and round-trips", criterion4},
        {5, "regularizer correctness", criterion5},
        {6, "SGLD reductions and reproducibility", criterion6},
        {7, "PSNR vs rate trend and VF comparison", criterion7},
        {8, "ablation ordering (full vs vanilla)", criterion8},
        {9, "uncertainty predicts error", criterion9},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && only.count(c.id) == 0) continue;
        std::string detail;
        bool pass = false;
        try {
            pass = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", c.id, c.title,
                    detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
