#pragma once

#include "spfit/autodiff.hpp"
#include "spfit/sparam_core.hpp"

namespace spfit {

struct RegConfig {
    double lambda = 0.1;
    /// Penalize |re| + |im| of the third difference instead of the complex
    /// modulus. Off by default.
    bool separate_real_imag = false;
};

/// Appends lambda * sum over S-parameter channels of sum_k |D3 x[k]| to the
/// tape, where D3 is the unit-spacing third-order difference along frequency
/// and |.| the complex modulus. x holds interleaved (re, im) channel rows.
ad::Node build_third_diff_penalty(ad::Tape& tape, ad::Node x, const RegConfig& cfg);

/// Scalar penalty value for a tensor.
double third_diff_penalty(const SParamTensor& x, const RegConfig& cfg = {});

}  // namespace spfit
