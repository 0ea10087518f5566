#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spfit/autodiff.hpp"
#include "spfit/sparam_core.hpp"

namespace spfit {

/// Topology of the 1-D U-Net generator.
struct NetworkSpec {
    int depth = 0;                      // N = ceil(log2 f) - 4
    int input_filters = 0;              // c0
    std::vector<int> encoder_filters;   // c_E[i], i = 1..N
    std::vector<int> decoder_filters;   // c_D[i]
    std::vector<int> upsample_filters;  // c_U[i]
    int output_filters = 0;             // r/2 before the CEL (r without it)
    int kernel = 3;
    int channels = 0;                   // r = 2*p^2
    int freq_count = 0;                 // f
    int padded_freq_count = 0;          // smallest multiple of 2^N >= f
    int extrapolation = 2;              // n_e
    int interpolation = 1;              // n_k
    double leaky_slope = 0.01;
    bool causality_layer = true;

    /// key = value lines for experiment records
    std::string to_config_text() const;
};

/// Filter-count and depth formulas; throws for f < 32 or odd r.
NetworkSpec make_network_spec(int r, int f, bool causality_layer = true,
                              double leaky_slope = 0.01);

/// Untrained convolutional generator G_theta wired onto a Tape. Weights are
/// drawn once at construction from the seed; the tape can be extended with
/// loss nodes by the fitter.
class DipNetwork {
public:
    DipNetwork(int r, int f, std::uint64_t seed, bool causality_layer = true,
               double leaky_slope = 0.01);

    const NetworkSpec& spec() const { return spec_; }
    ad::Tape& tape() { return tape_; }
    ad::Node input() const { return input_; }
    ad::Node output() const { return output_; }
    /// The real-spectrum stage feeding the CEL (or the crop without it).
    ad::Node pre_output() const { return pre_output_; }

    int param_array_count() const { return static_cast<int>(params_.size()); }
    std::int64_t scalar_param_count() const;
    const std::string& param_name(int i) const { return names_[static_cast<std::size_t>(i)]; }
    ad::Node param(int i) const { return params_[static_cast<std::size_t>(i)]; }

    std::vector<ad::Matrix> snapshot_weights() const;
    void restore_weights(const std::vector<ad::Matrix>& w);

    /// Evaluates G_theta(z); z must be r x f.
    SParamTensor forward(const RealChannels& z, const FrequencyGrid& grid);

    /// The r x f real channel view of the last forward pass.
    const RealChannels& output_channels() const { return tape_.value(output_); }

private:
    ad::Node conv_block(ad::Node x, int out_channels, const std::string& name, bool bn_act);

    NetworkSpec spec_;
    ad::Tape tape_;
    ad::Node input_, output_, pre_output_;
    std::vector<ad::Node> params_;
    std::vector<std::string> names_;
    class InitStream;
    InitStream* init_ = nullptr;  // only alive during construction
};

/// Appends the causality enforcement chain to a tape. x must hold c real
/// channels of even length L = 2f; the result is 2c rows (re, im interleaved)
/// of length (L/2)*n_k.
ad::Node build_cel(ad::Tape& tape, ad::Node x, int n_k);

/// Standalone causality enforcement layer. Input: c x 2f real spectrum
/// channels. Output: 2c x f*n_k interleaved (re, im) rows of the causal
/// complex spectrum.
RealChannels cel_forward(const RealChannels& real_spectrum, int n_k = 1);

}  // namespace spfit
