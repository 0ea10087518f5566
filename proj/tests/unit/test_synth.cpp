#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "spfit/synth.hpp"
#include "test_helpers.hpp"

using namespace spfit;

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// negative-time energy fraction of the band-limited impulse response,
// via a conjugate-symmetric extension (zero Nyquist bin) and a naive IDFT
double negative_time_fraction(const SParamTensor& x, int entry) {
    const int f = x.freq_count();
    const int i = entry / x.ports();
    const int j = entry % x.ports();
    std::vector<std::complex<double>> g(static_cast<std::size_t>(2 * f), {0.0, 0.0});
    for (int k = 0; k < f; ++k) {
        g[static_cast<std::size_t>(k)] = x(i, j, k);
        if (k >= 1) g[static_cast<std::size_t>(2 * f - k)] = std::conj(x(i, j, k));
    }
    double total = 0.0;
    double negative = 0.0;
    for (int t = 0; t < 2 * f; ++t) {
        std::complex<double> acc(0.0, 0.0);
        for (int k = 0; k < 2 * f; ++k)
            acc += g[static_cast<std::size_t>(k)] *
                   std::exp(std::complex<double>(0.0, kTwoPi * k * t / (2.0 * f)));
        const double e = std::norm(acc);
        total += e;
        if (t > f) negative += e;
    }
    return negative / total;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("reciprocal models are exactly symmetric") {
    SynthSpec spec;
    spec.ports = 3;
    spec.freq_count = 64;
    spec.pole_pairs = 4;
    spec.seed = 2;
    spec.reciprocal = true;
    auto out = generate(spec);
    for (int k = 0; k < 64; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(out.tensor(i, j, k) == out.tensor(j, i, k));
}

TEST_CASE("all poles are stable and conjugate-paired") {
    SynthSpec spec;
    spec.ports = 2;
    spec.freq_count = 48;
    spec.pole_pairs = 6;
    spec.seed = 4;
    auto out = generate(spec);
    out.model.validate();
    for (int k = 0; k < out.model.pole_count(); ++k)
        CHECK(out.model.poles(k).real() < 0.0);
    CHECK(out.model.pole_count() == 12);
}

TEST_CASE("deterministic under seed") {
    SynthSpec spec;
    spec.ports = 2;
    spec.freq_count = 40;
    spec.pole_pairs = 3;
    spec.seed = 9;
    auto a = generate(spec);
    auto b = generate(spec);
    CHECK((a.tensor.entries() - b.tensor.entries()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.model.poles - b.model.poles).cwiseAbs().maxCoeff() == 0.0);

    spec.seed = 10;
    auto c = generate(spec);
    CHECK((a.tensor.entries() - c.tensor.entries()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("impulse response from the pole expansion is real") {
    SynthSpec spec;
    spec.ports = 2;
    spec.freq_count = 32;
    spec.pole_pairs = 5;
    spec.seed = 12;
    auto out = generate(spec);
    // h(t) = sum_k c_k exp(p_k t); conjugate pairing must cancel imag parts
    const double t_max = 32.0 / (kTwoPi * spec.freq_max_hz);
    for (int step = 1; step <= 8; ++step) {
        const double t = t_max * step / 8.0;
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 2);
        for (int k = 0; k < out.model.pole_count(); ++k)
            h += out.model.residues[static_cast<std::size_t>(k)] *
                 std::exp(out.model.poles(k) * t);
        const double scale = h.cwiseAbs().maxCoeff();
        CHECK(h.imag().cwiseAbs().maxCoeff() <= 1e-10 * std::max(scale, 1e-30));
    }
}

TEST_CASE("spectra are causal and improve with band width") {
    // truncation-limited: the bound applies once the evaluation band extends
    // past the resonances; widening the band must shrink the leakage
    for (unsigned seed : {21u, 22u, 23u, 24u}) {
        SynthSpec spec;
        spec.ports = 1;
        spec.freq_count = 192;
        spec.freq_min_hz = 0.0;
        spec.freq_max_hz = 2e10;
        spec.pole_pairs = 4;
        spec.damping_min = 0.01;
        spec.damping_max = 0.05;
        spec.seed = seed;
        auto narrow = generate(spec);
        const double frac_narrow = negative_time_fraction(narrow.tensor, 0);

        // same model evaluated over a twice-wider band
        SParamTensor wide =
            vf_eval(narrow.model, FrequencyGrid::linspace(0.0, 2.0 * spec.freq_max_hz, 384));
        const double frac_wide = negative_time_fraction(wide, 0);
        CHECK(frac_wide <= 1e-2);
        CHECK(frac_wide < frac_narrow);
    }
}

TEST_CASE("spec validation") {
    SynthSpec spec;
    spec.ports = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SynthSpec{};
    spec.freq_count = 16;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SynthSpec{};
    spec.freq_min_hz = 2e10;
    spec.freq_max_hz = 1e10;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SynthSpec{};
    spec.pole_pairs = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

}  // TEST_SUITE
