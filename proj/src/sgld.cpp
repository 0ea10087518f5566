#include "spfit/sgld.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spfit/regularizer.hpp"

namespace spfit {

void FitConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("FitConfig: iterations must be >= 1");
    if (!(step > 0.0)) throw std::invalid_argument("FitConfig: step must be positive");
    if (lambda < 0.0) throw std::invalid_argument("FitConfig: lambda must be >= 0");
    if (!(sigma0_sq > 0.0) || !(sigmaT_sq > 0.0))
        throw std::invalid_argument("FitConfig: noise variances must be positive");
    if (burn_in < 0 || burn_in >= iterations)
        throw std::invalid_argument("FitConfig: burn_in must be in [0, iterations)");
    if (sample_every < 1) throw std::invalid_argument("FitConfig: sample_every must be >= 1");
    if (expected_samples() < 1)
        throw std::invalid_argument("FitConfig: schedule yields no posterior samples");
}

RealChannels make_latent(const MeasurementSet& m) {
    m.validate();
    return subsample_adjoint(flatten(m.data), m.indices, m.full_count());
}

double input_noise_variance(int t, const FitConfig& cfg) {
    if (t < 0 || t > cfg.iterations)
        throw std::invalid_argument("input_noise_variance: t outside [0, T]");
    const double ratio = cfg.sigmaT_sq / cfg.sigma0_sq;
    return cfg.sigma0_sq * std::pow(ratio, static_cast<double>(t) / cfg.iterations);
}

void sgld_update_array(ad::Matrix& theta, const ad::Matrix& grad_data,
                       const ad::Matrix* grad_reg, double alpha, GaussianStream* noise) {
    if (!grad_data.allFinite() || (grad_reg != nullptr && !grad_reg->allFinite()))
        throw std::runtime_error("sgld_step: non-finite gradient");
    theta.noalias() -= (alpha / 2.0) * grad_data;
    if (grad_reg != nullptr) theta.noalias() -= (alpha / 2.0) * (*grad_reg);
    if (noise != nullptr) {
        const double sd = std::sqrt(alpha);
        double* data = theta.data();
        const Eigen::Index n = theta.size();
        for (Eigen::Index i = 0; i < n; ++i) data[i] += sd * (*noise)();
    }
}

void sgld_step(std::vector<ad::Matrix>& weights, const std::vector<ad::Matrix>& grad_data,
               const std::vector<ad::Matrix>& grad_reg, double alpha, GaussianStream* noise) {
    if (weights.size() != grad_data.size() || weights.size() != grad_reg.size())
        throw std::invalid_argument("sgld_step: gradient arrays must align with weights");
    for (std::size_t i = 0; i < weights.size(); ++i)
        sgld_update_array(weights[i], grad_data[i], &grad_reg[i], alpha, noise);
}

namespace {

void add_gaussian_noise(RealChannels& zt, const RealChannels& z0, double sd,
                        GaussianStream& rng) {
    const Eigen::Index n = z0.size();
    const double* src = z0.data();
    double* dst = zt.data();
    for (Eigen::Index i = 0; i < n; ++i) dst[i] = src[i] + sd * rng();
}

}  // namespace

PosteriorSummary fit(const MeasurementSet& m, const FitConfig& cfg) {
    cfg.validate();
    m.validate();
    const int p = m.ports();
    const int r = 2 * p * p;
    const int f = m.full_count();
    if (f < 32) throw std::invalid_argument("fit: needs at least 32 frequency points");
    if (m.observed_count() < 2) throw std::invalid_argument("fit: needs at least 2 observations");

    DipNetwork net(r, f, derive_seed(cfg.seed, 0), cfg.causality_layer, cfg.leaky_slope);
    ad::Tape& tape = net.tape();

    const RealChannels z0 = make_latent(m);
    ad::Node observed = tape.gather_cols(net.output(), m.indices);
    ad::Node target = tape.constant(flatten(m.data));
    ad::Node data_loss = tape.sum_squares(tape.sub(observed, target));
    ad::Node reg_loss{};
    ad::Node root = data_loss;
    if (cfg.regularizer && cfg.lambda > 0.0) {
        reg_loss = build_third_diff_penalty(tape, net.output(),
                                            {cfg.lambda, cfg.reg_separate_real_imag});
        root = tape.add(data_loss, reg_loss);
    }

    GaussianStream latent_noise(derive_seed(cfg.seed, 1));
    GaussianStream weight_noise(derive_seed(cfg.seed, 2));
    GaussianStream* weight_noise_ptr = cfg.sgld_noise ? &weight_noise : nullptr;

    PosteriorSummary out;
    out.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));
    std::vector<RealChannels> channel_samples;
    channel_samples.reserve(static_cast<std::size_t>(cfg.expected_samples()));

    RealChannels zt = z0;
    for (int t = 1; t <= cfg.iterations; ++t) {
        if (cfg.input_noise)
            add_gaussian_noise(zt, z0, std::sqrt(input_noise_variance(t, cfg)), latent_noise);
        tape.set_value(net.input(), zt);
        try {
            tape.forward();
        } catch (const std::runtime_error& e) {
            std::ostringstream os;
            os << "fit: diverged at iteration " << t << " (" << e.what() << ");";
            os << " recent losses:";
            const std::size_t n = out.loss_trace.size();
            for (std::size_t i = n > 5 ? n - 5 : 0; i < n; ++i)
                os << " " << out.loss_trace[i].data_loss + out.loss_trace[i].reg_value;
            throw std::runtime_error(os.str());
        }

        LossPoint lp;
        lp.data_loss = tape.value(data_loss)(0, 0);
        lp.reg_value = reg_loss.valid() ? tape.value(reg_loss)(0, 0) : 0.0;
        out.loss_trace.push_back(lp);

        tape.backward(root);
        for (int i = 0; i < net.param_array_count(); ++i) {
            ad::Node pn = net.param(i);
            sgld_update_array(tape.value(pn), tape.grad(pn), nullptr, cfg.step, weight_noise_ptr);
        }

        if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.sample_every == 0) {
            if (cfg.sample_at_clean_latent) {
                tape.set_value(net.input(), z0);
                tape.forward();
            }
            channel_samples.push_back(tape.value(net.output()));
        }
    }

    // posterior summaries
    const int n_samples = static_cast<int>(channel_samples.size());
    RealChannels mean_channels = RealChannels::Zero(r, f);
    for (const auto& s : channel_samples) mean_channels += s;
    mean_channels /= n_samples;
    out.mean = unflatten(mean_channels, p, m.full_grid);

    out.std_channels = RealChannels::Zero(r, f);
    for (const auto& s : channel_samples)
        out.std_channels.array() += (s - mean_channels).array().square();
    out.std_channels = (out.std_channels / n_samples).cwiseSqrt();

    Eigen::MatrixXd mean_mag = Eigen::MatrixXd::Zero(p * p, f);
    std::vector<Eigen::MatrixXd> mags;
    mags.reserve(channel_samples.size());
    out.samples.reserve(channel_samples.size());
    for (const auto& s : channel_samples) {
        SParamTensor tensor = unflatten(s, p, m.full_grid);
        mags.push_back(tensor.entries().cwiseAbs());
        mean_mag += mags.back();
        out.samples.push_back(std::move(tensor));
    }
    mean_mag /= n_samples;
    out.std_magnitude = Eigen::MatrixXd::Zero(p * p, f);
    for (const auto& mg : mags) out.std_magnitude.array() += (mg - mean_mag).array().square();
    out.std_magnitude = (out.std_magnitude / n_samples).cwiseSqrt();

    return out;
}

}  // namespace spfit
