#pragma once

#include <cstdint>

#include "spfit/sparam_core.hpp"
#include "spfit/vector_fit.hpp"

namespace spfit {

/// Recipe for a randomized causal pole-residue ground truth.
struct SynthSpec {
    int ports = 2;
    int freq_count = 1000;
    double freq_min_hz = 0.0;
    double freq_max_hz = 2e10;
    int pole_pairs = 8;  // conjugate pairs shared by all entries
    double damping_min = 1e-3;
    double damping_max = 1e-2;  // real part = -damping * |imag part|
    double amplitude = 1.0;     // resonance peak scale
    bool reciprocal = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    SParamTensor tensor;
    RationalModel model;  // the generating oracle
};

/// Draws a stable rational model and evaluates it on a uniform grid over the
/// band. The model is returned so fits can be checked against the truth.
SynthResult generate(const SynthSpec& spec);

}  // namespace spfit
