#include "spfit/dip_net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spfit/rng.hpp"

namespace spfit {

namespace {

int ceil_log2(int f) {
    int k = 0;
    int v = 1;
    while (v < f) {
        v *= 2;
        ++k;
    }
    return k;
}

}  // namespace

NetworkSpec make_network_spec(int r, int f, bool causality_layer, double leaky_slope) {
    if (f < 32)
        throw std::invalid_argument("make_network_spec: f must be >= 32 (depth formula)");
    if (r < 2 || r % 2 != 0)
        throw std::invalid_argument("make_network_spec: r must be a positive even number");
    NetworkSpec s;
    s.channels = r;
    s.freq_count = f;
    s.depth = ceil_log2(f) - 4;
    s.input_filters = static_cast<int>(std::llround(25.0 * std::sqrt(static_cast<double>(r))));
    s.encoder_filters.assign(static_cast<std::size_t>(s.depth), s.input_filters);
    s.decoder_filters.assign(static_cast<std::size_t>(s.depth), s.input_filters);
    s.upsample_filters.assign(static_cast<std::size_t>(s.depth), s.input_filters);
    s.output_filters = causality_layer ? r / 2 : r;
    const int block = 1 << s.depth;
    s.padded_freq_count = ((f + block - 1) / block) * block;
    s.leaky_slope = leaky_slope;
    s.causality_layer = causality_layer;
    return s;
}

std::string NetworkSpec::to_config_text() const {
    std::ostringstream os;
    os << "depth = " << depth << "\n";
    os << "input_filters = " << input_filters << "\n";
    os << "encoder_filters = " << (encoder_filters.empty() ? 0 : encoder_filters[0]) << "\n";
    os << "decoder_filters = " << (decoder_filters.empty() ? 0 : decoder_filters[0]) << "\n";
    os << "upsample_filters = " << (upsample_filters.empty() ? 0 : upsample_filters[0]) << "\n";
    os << "output_filters = " << output_filters << "\n";
    os << "kernel = " << kernel << "\n";
    os << "channels = " << channels << "\n";
    os << "freq_count = " << freq_count << "\n";
    os << "padded_freq_count = " << padded_freq_count << "\n";
    os << "extrapolation = " << extrapolation << "\n";
    os << "interpolation = " << interpolation << "\n";
    os << "leaky_slope = " << leaky_slope << "\n";
    os << "causality_layer = " << (causality_layer ? 1 : 0) << "\n";
    return os.str();
}

ad::Node build_cel(ad::Tape& tape, ad::Node x, int n_k) {
    const int L = tape.cols(x);
    if (L % 2 != 0)
        throw std::invalid_argument("cel: input length must be even (n_e * f with n_e = 2)");
    if (n_k < 1) throw std::invalid_argument("cel: n_k must be >= 1");
    const int f = L / 2;

    ad::Node mirrored = tape.mirror_even(x);  // c x 2L, even under index negation mod 2L
    ad::Node spectrum = tape.rfft_pair(mirrored);

    // one-sided (analytic) window over pseudo-time: DC and the midpoint stay,
    // positive indices double, negative indices vanish
    ad::Vector window = ad::Vector::Zero(2 * L);
    window(0) = 1.0;
    for (int t = 1; t < L; ++t) window(t) = 2.0;
    window(L) = 1.0;
    ad::Node windowed = tape.scale_cols(spectrum, window);

    ad::Node padded = n_k > 1 ? tape.zero_pad_cols(windowed, 2 * L * n_k) : windowed;
    ad::Node analytic = tape.cdft(padded, /*inverse=*/true);
    ad::Node cropped = tape.crop_cols(analytic, f * n_k);

    // real part scaled by n_k, imaginary part by -n_k
    ad::Vector signs(tape.rows(cropped));
    for (int i = 0; i < signs.size(); ++i) signs(i) = (i % 2 == 0) ? n_k : -n_k;
    return tape.scale_rows(cropped, signs);
}

RealChannels cel_forward(const RealChannels& real_spectrum, int n_k) {
    ad::Tape tape;
    ad::Node x = tape.input(static_cast<int>(real_spectrum.rows()),
                            static_cast<int>(real_spectrum.cols()));
    ad::Node out = build_cel(tape, x, n_k);
    tape.set_value(x, real_spectrum);
    tape.forward();
    return tape.value(out);
}

class DipNetwork::InitStream {
public:
    explicit InitStream(std::uint64_t seed) : rng_(seed) {}

    ad::Matrix gaussian(int rows, int cols, double std) {
        ad::Matrix m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) m(r, c) = std * rng_();
        return m;
    }

private:
    GaussianStream rng_;
};

ad::Node DipNetwork::conv_block(ad::Node x, int out_channels, const std::string& name,
                                bool bn_act) {
    const int in_channels = tape_.rows(x);
    // He initialization: std = sqrt(2 / fan_in), fan_in = kernel * c_in
    const double std = std::sqrt(2.0 / (3.0 * in_channels));
    ad::Node w = tape_.param(init_->gaussian(out_channels, 3 * in_channels, std));
    ad::Node b = tape_.param(ad::Matrix::Zero(out_channels, 1));
    params_.push_back(w);
    names_.push_back(name + ".weight");
    params_.push_back(b);
    names_.push_back(name + ".bias");
    ad::Node y = tape_.conv1d(x, w, b);
    if (!bn_act) return y;
    ad::Node gamma = tape_.param(ad::Matrix::Ones(out_channels, 1));
    ad::Node beta = tape_.param(ad::Matrix::Zero(out_channels, 1));
    params_.push_back(gamma);
    names_.push_back(name + ".bn_gamma");
    params_.push_back(beta);
    names_.push_back(name + ".bn_beta");
    y = tape_.batchnorm(y, gamma, beta);
    return tape_.leaky_relu(y, spec_.leaky_slope);
}

DipNetwork::DipNetwork(int r, int f, std::uint64_t seed, bool causality_layer,
                       double leaky_slope)
    : spec_(make_network_spec(r, f, causality_layer, leaky_slope)) {
    InitStream init(seed);
    init_ = &init;

    const int f_pad = spec_.padded_freq_count;
    input_ = tape_.input(r, f);
    ad::Node h = (f_pad > f) ? tape_.pad_edge_cols(input_, f_pad) : input_;

    h = conv_block(h, spec_.input_filters, "input", true);
    std::vector<ad::Node> skips;
    skips.push_back(h);
    for (int i = 1; i <= spec_.depth; ++i) {
        const int c = spec_.encoder_filters[static_cast<std::size_t>(i - 1)];
        std::ostringstream nm;
        nm << "enc" << i;
        h = tape_.avg_pool(h);
        h = conv_block(h, c, nm.str() + ".conv1", true);
        h = conv_block(h, c, nm.str() + ".conv2", true);
        skips.push_back(h);
    }

    ad::Node d = skips.back();
    for (int i = spec_.depth; i >= 1; --i) {
        std::ostringstream nm;
        nm << "dec" << i;
        d = tape_.upsample_linear(d, f_pad >> (i - 1));
        d = conv_block(d, spec_.upsample_filters[static_cast<std::size_t>(i - 1)],
                       nm.str() + ".up_conv", true);
        d = tape_.concat(d, skips[static_cast<std::size_t>(i - 1)]);
        d = conv_block(d, spec_.decoder_filters[static_cast<std::size_t>(i - 1)],
                       nm.str() + ".conv", true);
    }

    if (spec_.causality_layer) {
        d = tape_.upsample_linear(d, spec_.extrapolation * f);
        pre_output_ = conv_block(d, spec_.output_filters, "output", false);
        output_ = build_cel(tape_, pre_output_, spec_.interpolation);
    } else {
        pre_output_ = conv_block(d, spec_.output_filters, "output", false);
        output_ = tape_.crop_cols(pre_output_, f);
    }
    init_ = nullptr;
}

std::int64_t DipNetwork::scalar_param_count() const {
    std::int64_t n = 0;
    for (ad::Node p : params_) {
        const auto& v = tape_.value(p);
        n += static_cast<std::int64_t>(v.rows()) * v.cols();
    }
    return n;
}

std::vector<ad::Matrix> DipNetwork::snapshot_weights() const {
    std::vector<ad::Matrix> out;
    out.reserve(params_.size());
    for (ad::Node p : params_) out.push_back(tape_.value(p));
    return out;
}

void DipNetwork::restore_weights(const std::vector<ad::Matrix>& w) {
    if (w.size() != params_.size())
        throw std::invalid_argument("restore_weights: array count mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) tape_.set_value(params_[i], w[i]);
}

SParamTensor DipNetwork::forward(const RealChannels& z, const FrequencyGrid& grid) {
    if (z.rows() != spec_.channels || z.cols() != spec_.freq_count)
        throw std::invalid_argument("DipNetwork::forward: z must be r x f");
    tape_.set_value(input_, z);
    tape_.forward();
    const int p = static_cast<int>(std::llround(std::sqrt(spec_.channels / 2.0)));
    return unflatten(tape_.value(output_), p, grid);
}

}  // namespace spfit
