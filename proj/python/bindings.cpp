#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spfit/dip_net.hpp"
#include "spfit/regularizer.hpp"
#include "spfit/sgld.hpp"
#include "spfit/sparam_core.hpp"
#include "spfit/synth.hpp"
#include "spfit/touchstone.hpp"
#include "spfit/vector_fit.hpp"

namespace py = pybind11;
using namespace spfit;

namespace {

using ComplexArray =
    py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

SParamTensor tensor_from_numpy(const ComplexArray& arr, const std::vector<double>& freqs_hz) {
    if (arr.ndim() != 3) throw std::invalid_argument("expected a (p, p, f) complex array");
    const int p = static_cast<int>(arr.shape(0));
    const int f = static_cast<int>(arr.shape(2));
    if (arr.shape(1) != p) throw std::invalid_argument("expected a square port dimension");
    if (static_cast<int>(freqs_hz.size()) != f)
        throw std::invalid_argument("frequency list does not match the array length");
    Eigen::MatrixXcd data(p * p, f);
    auto view = arr.unchecked<3>();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            for (int k = 0; k < f; ++k) data(i * p + j, k) = view(i, j, k);
    return SParamTensor(p, FrequencyGrid(freqs_hz), std::move(data));
}

py::array_t<std::complex<double>> tensor_to_numpy(const SParamTensor& t) {
    const int p = t.ports();
    const int f = t.freq_count();
    py::array_t<std::complex<double>> out({p, p, f});
    auto view = out.mutable_unchecked<3>();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            for (int k = 0; k < f; ++k) view(i, j, k) = t(i, j, k);
    return out;
}

FitConfig config_from_kwargs(const py::kwargs& kwargs) {
    FitConfig cfg;
    for (auto item : kwargs) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "iterations") cfg.iterations = py::cast<int>(item.second);
        else if (key == "step") cfg.step = py::cast<double>(item.second);
        else if (key == "lambda_" || key == "lam") cfg.lambda = py::cast<double>(item.second);
        else if (key == "sigma0_sq") cfg.sigma0_sq = py::cast<double>(item.second);
        else if (key == "sigmaT_sq") cfg.sigmaT_sq = py::cast<double>(item.second);
        else if (key == "burn_in") cfg.burn_in = py::cast<int>(item.second);
        else if (key == "sample_every") cfg.sample_every = py::cast<int>(item.second);
        else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(item.second);
        else if (key == "sgld_noise") cfg.sgld_noise = py::cast<bool>(item.second);
        else if (key == "input_noise") cfg.input_noise = py::cast<bool>(item.second);
        else if (key == "regularizer") cfg.regularizer = py::cast<bool>(item.second);
        else if (key == "causality_layer") cfg.causality_layer = py::cast<bool>(item.second);
        else if (key == "sample_at_clean_latent")
            cfg.sample_at_clean_latent = py::cast<bool>(item.second);
        else if (key == "reg_separate_real_imag")
            cfg.reg_separate_real_imag = py::cast<bool>(item.second);
        else if (key == "leaky_slope") cfg.leaky_slope = py::cast<double>(item.second);
        else throw std::invalid_argument("unknown fit option '" + key + "'");
    }
    return cfg;
}

py::dict model_to_dict(const RationalModel& model) {
    py::dict out;
    out["poles"] = model.poles;
    py::list residues;
    for (const auto& r : model.residues) residues.append(Eigen::MatrixXcd(r));
    out["residues"] = residues;
    out["d"] = model.d;
    out["e"] = model.e;
    out["text"] = model.export_text();
    return out;
}

RationalModel model_from_parts(const Eigen::VectorXcd& poles,
                               const std::vector<Eigen::MatrixXcd>& residues,
                               const Eigen::MatrixXd& d, const Eigen::MatrixXd& e) {
    RationalModel m;
    m.poles = poles;
    m.residues = residues;
    m.d = d;
    m.e = e;
    m.validate();
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "S-parameter curve fitting: untrained convolutional prior with SGLD, "
              "vector fitting, synthetic ground truth";

    m.def("flatten",
          [](const ComplexArray& arr, const std::vector<double>& freqs) {
              return Eigen::MatrixXd(flatten(tensor_from_numpy(arr, freqs)));
          },
          py::arg("tensor"), py::arg("freqs_hz"),
          "Complex (p, p, f) tensor -> real (2p^2, f) channel matrix");

    m.def("unflatten",
          [](const Eigen::MatrixXd& channels, int ports, const std::vector<double>& freqs) {
              return tensor_to_numpy(unflatten(channels, ports, FrequencyGrid(freqs)));
          },
          py::arg("channels"), py::arg("ports"), py::arg("freqs_hz"));

    m.def("subsample", [](const Eigen::MatrixXd& x, const std::vector<int>& idx) {
        return Eigen::MatrixXd(subsample(x, idx));
    });
    m.def("subsample_adjoint",
          [](const Eigen::MatrixXd& y, const std::vector<int>& idx, int full_cols) {
              return Eigen::MatrixXd(subsample_adjoint(y, idx, full_cols));
          });
    m.def("uniform_indices", &uniform_indices, py::arg("f"), py::arg("count"));
    m.def("psnr", &psnr, py::arg("reference"), py::arg("estimate"),
          "PSNR in dB over real channel entries; +inf for an exact match");
    m.def("spearman", &spearman);

    m.def("parse_touchstone",
          [](const std::string& text, int ports) {
              auto [tensor, opts] = parse_touchstone(text, ports);
              py::dict options;
              options["freq_unit_hz"] = opts.freq_unit_hz;
              options["format"] = TouchstoneOptions::format_name(opts.format);
              options["reference_resistance"] = opts.reference_resistance;
              return py::make_tuple(tensor_to_numpy(tensor), tensor.grid().values(), options);
          },
          py::arg("text"), py::arg("ports"));

    m.def("write_touchstone",
          [](const ComplexArray& arr, const std::vector<double>& freqs,
             const std::string& format) {
              TouchstoneOptions opts;
              opts.freq_unit_hz = 1e9;
              if (format == "RI") opts.format = TouchstoneFormat::RI;
              else if (format == "MA") opts.format = TouchstoneFormat::MA;
              else if (format == "DB") opts.format = TouchstoneFormat::DB;
              else throw std::invalid_argument("format must be RI, MA or DB");
              return write_touchstone(tensor_from_numpy(arr, freqs), opts);
          },
          py::arg("tensor"), py::arg("freqs_hz"), py::arg("format") = "RI");

    m.def("generate",
          [](int ports, int freq_count, double freq_min_hz, double freq_max_hz, int pole_pairs,
             double damping_min, double damping_max, double amplitude, bool reciprocal,
             std::uint64_t seed) {
              SynthSpec spec;
              spec.ports = ports;
              spec.freq_count = freq_count;
              spec.freq_min_hz = freq_min_hz;
              spec.freq_max_hz = freq_max_hz;
              spec.pole_pairs = pole_pairs;
              spec.damping_min = damping_min;
              spec.damping_max = damping_max;
              spec.amplitude = amplitude;
              spec.reciprocal = reciprocal;
              spec.seed = seed;
              SynthResult r = generate(spec);
              py::dict out;
              out["tensor"] = tensor_to_numpy(r.tensor);
              out["freqs_hz"] = r.tensor.grid().values();
              out["model"] = model_to_dict(r.model);
              return out;
          },
          py::arg("ports") = 2, py::arg("freq_count") = 1000, py::arg("freq_min_hz") = 0.0,
          py::arg("freq_max_hz") = 2e10, py::arg("pole_pairs") = 8,
          py::arg("damping_min") = 1e-3, py::arg("damping_max") = 1e-2,
          py::arg("amplitude") = 1.0, py::arg("reciprocal") = true, py::arg("seed") = 0);

    m.def("vf_eval",
          [](const Eigen::VectorXcd& poles, const std::vector<Eigen::MatrixXcd>& residues,
             const Eigen::MatrixXd& d, const Eigen::MatrixXd& e,
             const std::vector<double>& freqs) {
              return tensor_to_numpy(
                  vf_eval(model_from_parts(poles, residues, d, e), FrequencyGrid(freqs)));
          },
          py::arg("poles"), py::arg("residues"), py::arg("d"), py::arg("e"),
          py::arg("freqs_hz"));

    m.def("vf_fit",
          [](const ComplexArray& arr, const std::vector<double>& freqs,
             const std::vector<int>& indices, int poles, int max_iters, double tol) {
              SParamTensor full = tensor_from_numpy(arr, freqs);
              MeasurementSet ms = subsample_tensor(full, indices);
              VfOptions opts;
              opts.max_iters = max_iters;
              opts.tol = tol;
              VfResult r = vf_fit(ms, poles, opts);
              py::dict out = model_to_dict(r.model);
              out["rel_rms"] = r.rel_rms;
              out["iterations"] = r.iterations;
              out["converged"] = r.converged;
              return out;
          },
          py::arg("tensor"), py::arg("freqs_hz"), py::arg("indices"), py::arg("poles"),
          py::arg("max_iters") = 30, py::arg("tol") = 1e-10);

    m.def("cel_forward",
          [](const Eigen::MatrixXd& real_spectrum, int n_k) {
              const RealChannels out = cel_forward(real_spectrum, n_k);
              const Eigen::Index pairs = out.rows() / 2;
              Eigen::MatrixXcd packed(pairs, out.cols());
              for (Eigen::Index i = 0; i < pairs; ++i) {
                  packed.row(i).real() = out.row(2 * i);
                  packed.row(i).imag() = out.row(2 * i + 1);
              }
              return packed;
          },
          py::arg("real_spectrum"), py::arg("n_k") = 1,
          "Causality enforcement: (c, 2f) real spectrum -> (c, f) causal complex spectrum");

    m.def("third_diff_penalty",
          [](const ComplexArray& arr, const std::vector<double>& freqs, double lambda,
             bool separate_real_imag) {
              return third_diff_penalty(tensor_from_numpy(arr, freqs),
                                        {lambda, separate_real_imag});
          },
          py::arg("tensor"), py::arg("freqs_hz"), py::arg("lambda_") = 0.1,
          py::arg("separate_real_imag") = false);

    m.def("make_latent", [](const ComplexArray& arr, const std::vector<double>& full_freqs,
                            const std::vector<int>& indices) {
        SParamTensor full = tensor_from_numpy(arr, full_freqs);
        return Eigen::MatrixXd(make_latent(subsample_tensor(full, indices)));
    });

    m.def("input_noise_variance", [](int t, int iterations, double sigma0_sq, double sigmaT_sq) {
        FitConfig cfg;
        cfg.iterations = iterations;
        cfg.sigma0_sq = sigma0_sq;
        cfg.sigmaT_sq = sigmaT_sq;
        return input_noise_variance(t, cfg);
    }, py::arg("t"), py::arg("iterations") = 20000, py::arg("sigma0_sq") = 1e-2,
       py::arg("sigmaT_sq") = 1e-6);

    m.def("network_config",
          [](int r, int f, bool causality_layer) {
              return make_network_spec(r, f, causality_layer).to_config_text();
          },
          py::arg("r"), py::arg("f"), py::arg("causality_layer") = true);

    m.def("fit_dip",
          [](const ComplexArray& arr, const std::vector<double>& freqs,
             const std::vector<int>& indices, const py::kwargs& kwargs) {
              SParamTensor full = tensor_from_numpy(arr, freqs);
              MeasurementSet ms = subsample_tensor(full, indices);
              FitConfig cfg = config_from_kwargs(kwargs);
              PosteriorSummary s;
              {
                  py::gil_scoped_release release;
                  s = fit(ms, cfg);
              }
              py::dict out;
              out["mean"] = tensor_to_numpy(s.mean);
              out["std_magnitude"] = Eigen::MatrixXd(s.std_magnitude);
              out["std_channels"] = Eigen::MatrixXd(s.std_channels);
              out["sample_count"] = s.samples.size();
              std::vector<double> data_loss, reg_value;
              data_loss.reserve(s.loss_trace.size());
              for (const auto& lp : s.loss_trace) {
                  data_loss.push_back(lp.data_loss);
                  reg_value.push_back(lp.reg_value);
              }
              out["data_loss"] = data_loss;
              out["reg_value"] = reg_value;
              return out;
          },
          py::arg("tensor"), py::arg("freqs_hz"), py::arg("indices"),
          "Runs the SGLD fit; keyword arguments mirror the FitConfig fields");

#ifdef SPFIT_VERSION_STRING
    m.attr("__version__") = SPFIT_VERSION_STRING;
#else
    m.attr("__version__") = "dev";
#endif
}
