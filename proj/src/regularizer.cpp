#include "spfit/regularizer.hpp"

#include <stdexcept>

namespace spfit {

ad::Node build_third_diff_penalty(ad::Tape& tape, ad::Node x, const RegConfig& cfg) {
    if (cfg.lambda < 0.0)
        throw std::invalid_argument("third_diff_penalty: lambda must be non-negative");
    if (tape.cols(x) < 4)
        throw std::invalid_argument("third_diff_penalty: needs at least 4 frequency samples");
    ad::Node d3 = tape.third_diff(x);
    ad::Node total = cfg.separate_real_imag ? tape.sum_abs(d3) : tape.complex_abs_sum(d3);
    return tape.scale(total, cfg.lambda);
}

double third_diff_penalty(const SParamTensor& x, const RegConfig& cfg) {
    const RealChannels flat = flatten(x);
    ad::Tape tape;
    ad::Node in = tape.input(static_cast<int>(flat.rows()), static_cast<int>(flat.cols()));
    ad::Node penalty = build_third_diff_penalty(tape, in, cfg);
    tape.set_value(in, flat);
    tape.forward();
    return tape.value(penalty)(0, 0);
}

}  // namespace spfit
