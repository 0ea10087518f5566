#include "spfit/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "spfit/rng.hpp"

namespace spfit {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

void SynthSpec::validate() const {
    if (ports < 1 || ports > 16) throw std::invalid_argument("SynthSpec: ports must be in 1..16");
    if (freq_count < 32) throw std::invalid_argument("SynthSpec: freq_count must be >= 32");
    if (pole_pairs < 1) throw std::invalid_argument("SynthSpec: pole_pairs must be >= 1");
    if (!(freq_min_hz < freq_max_hz))
        throw std::invalid_argument("SynthSpec: requires freq_min < freq_max");
    if (freq_min_hz < 0.0) throw std::invalid_argument("SynthSpec: negative band edge");
    if (!(damping_min > 0.0) || !(damping_max >= damping_min))
        throw std::invalid_argument("SynthSpec: bad damping range");
    if (!(amplitude > 0.0)) throw std::invalid_argument("SynthSpec: amplitude must be positive");
}

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    GaussianStream rng(derive_seed(spec.seed, 7));

    const int p = spec.ports;
    const int kp = spec.pole_pairs;
    const double w_lo = kTwoPi * spec.freq_min_hz;
    const double w_hi = kTwoPi * spec.freq_max_hz;

    RationalModel model;
    model.poles.resize(2 * kp);
    model.residues.assign(static_cast<std::size_t>(2 * kp), Eigen::MatrixXcd::Zero(p, p));
    model.d.resize(p, p);
    model.e = Eigen::MatrixXd::Zero(p, p);

    for (int k = 0; k < kp; ++k) {
        double w = w_lo + (w_hi - w_lo) * rng.uniform();
        w = std::max(w, 1e-3 * w_hi);  // keep resonances off the origin
        const double damping =
            spec.damping_min + (spec.damping_max - spec.damping_min) * rng.uniform();
        const Complex pole(-damping * w, w);
        model.poles(2 * k) = pole;
        model.poles(2 * k + 1) = std::conj(pole);

        // residue magnitudes scaled so each resonance peaks near `amplitude`
        const double scale = spec.amplitude * damping * w / std::sqrt(2.0);
        Eigen::MatrixXcd res(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) res(i, j) = scale * Complex(rng(), rng());
        if (spec.reciprocal) res = 0.5 * (res + res.transpose()).eval();
        model.residues[static_cast<std::size_t>(2 * k)] = res;
        model.residues[static_cast<std::size_t>(2 * k + 1)] = res.conjugate();
    }

    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) model.d(i, j) = 0.05 * spec.amplitude * rng();
    if (spec.reciprocal) model.d = (0.5 * (model.d + model.d.transpose())).eval();

    const FrequencyGrid grid =
        FrequencyGrid::linspace(spec.freq_min_hz, spec.freq_max_hz, spec.freq_count);
    SynthResult out{vf_eval(model, grid), std::move(model)};
    return out;
}

}  // namespace spfit
