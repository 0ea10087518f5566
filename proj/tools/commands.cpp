#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "manifest.hpp"
#include "spfit/touchstone.hpp"
#include "spfit/vector_fit.hpp"

namespace spfit::cli {

namespace {

#ifndef SPFIT_VERSION_STRING
#define SPFIT_VERSION_STRING "0.0.0"
#endif

using Clock = std::chrono::steady_clock;

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string tensor_filename(const std::string& stem, int ports) {
    return stem + ".s" + std::to_string(ports) + "p";
}

SParamTensor load_reference(const std::string& path) {
    const int ports = ports_from_filename(path);
    auto [tensor, opts] = parse_touchstone(read_file(path), ports);
    return tensor;
}

int resolve_count(int f, double rate, int count) {
    if (count > 0) {
        if (count < 2 || count > f)
            throw std::runtime_error("observation count must be in [2, f]");
        return count;
    }
    if (!(rate > 0.0) || rate > 1.0) throw std::runtime_error("rate must be in (0, 1]");
    return std::max(2, static_cast<int>(std::lround(rate * f)));
}

nlohmann::json fit_config_json(const FitConfig& cfg) {
    nlohmann::json j;
    j["iterations"] = cfg.iterations;
    j["step"] = cfg.step;
    j["lambda"] = cfg.lambda;
    j["sigma0_sq"] = cfg.sigma0_sq;
    j["sigmaT_sq"] = cfg.sigmaT_sq;
    j["burn_in"] = cfg.burn_in;
    j["sample_every"] = cfg.sample_every;
    j["seed"] = cfg.seed;
    j["sgld_noise"] = cfg.sgld_noise;
    j["input_noise"] = cfg.input_noise;
    j["regularizer"] = cfg.regularizer;
    j["causality_layer"] = cfg.causality_layer;
    j["sample_at_clean_latent"] = cfg.sample_at_clean_latent;
    j["reg_separate_real_imag"] = cfg.reg_separate_real_imag;
    j["leaky_slope"] = cfg.leaky_slope;
    return j;
}

nlohmann::json json_psnr(double v) {
    if (std::isinf(v)) return "+inf";
    return v;
}

std::string loss_trace_csv(const std::vector<LossPoint>& trace) {
    std::string out = "iteration,data_loss,reg_value\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += fmt(trace[i].data_loss, "%.17g");
        out += ',';
        out += fmt(trace[i].reg_value, "%.17g");
        out += '\n';
    }
    return out;
}

std::string std_csv(const FrequencyGrid& grid, int ports, const Eigen::MatrixXd& std_mag,
                    const RealChannels& std_channels) {
    std::ostringstream os;
    os << "frequency_hz";
    for (int i = 0; i < ports; ++i)
        for (int j = 0; j < ports; ++j) os << ",s" << (i + 1) << (j + 1) << "_mag_std";
    os << ",channel_std_mean\n";
    for (int k = 0; k < grid.size(); ++k) {
        os << fmt(grid[k], "%.16e");
        for (int e = 0; e < ports * ports; ++e) os << "," << fmt(std_mag(e, k));
        os << "," << fmt(std_channels.col(k).mean());
        os << "\n";
    }
    return os.str();
}

struct FitOutcome {
    bool ok = false;
    double psnr_db = 0.0;
    std::string error;
};

FitOutcome run_dip_fit(const SParamTensor& reference, double rate, FitConfig cfg) {
    FitOutcome out;
    try {
        const int f = reference.freq_count();
        const int count = resolve_count(f, rate, 0);
        MeasurementSet m = subsample_tensor(reference, uniform_indices(f, count));
        PosteriorSummary s = fit(m, cfg);
        out.psnr_db = psnr(flatten(reference), flatten(s.mean));
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

FitOutcome run_vf_fit(const SParamTensor& reference, double rate, int k_max) {
    FitOutcome out;
    try {
        const int f = reference.freq_count();
        const int count = resolve_count(f, rate, 0);
        MeasurementSet m = subsample_tensor(reference, uniform_indices(f, count));
        AutoKResult r = vf_fit_auto_k(m, k_max);
        const SParamTensor pred = vf_eval(r.fit.model, reference.grid());
        out.psnr_db = psnr(flatten(reference), flatten(pred));
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

void run_parallel(int jobs, int task_count, const std::function<void(int)>& task) {
    if (jobs <= 1) {
        for (int i = 0; i < task_count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    const int n = std::min(jobs, task_count);
    workers.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
        workers.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= task_count) return;
                task(i);
            }
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace

FitConfig variant_config(const FitConfig& base, const AblationVariant& v) {
    FitConfig cfg = base;
    cfg.regularizer = v.regularizer;
    cfg.input_noise = v.input_noise;
    cfg.sgld_noise = v.sgld_noise;
    cfg.causality_layer = v.causality_layer;
    return cfg;
}

int cmd_synth(const SynthArgs& args) {
    const auto t0 = Clock::now();
    args.spec.validate();
    ensure_directory(args.out_dir);
    SynthResult result = generate(args.spec);

    const std::string snp = tensor_filename(args.out_dir + "/" + args.name, args.spec.ports);
    write_file_atomic(snp, write_touchstone(result.tensor));
    const std::string sidecar = args.out_dir + "/" + args.name + ".model.txt";
    write_file_atomic(sidecar, result.model.export_text());

    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = args.spec.seed;
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = {
        {"ports", args.spec.ports},         {"freqs", args.spec.freq_count},
        {"freq_min_hz", args.spec.freq_min_hz}, {"freq_max_hz", args.spec.freq_max_hz},
        {"pole_pairs", args.spec.pole_pairs},   {"damping_min", args.spec.damping_min},
        {"damping_max", args.spec.damping_max}, {"amplitude", args.spec.amplitude},
        {"reciprocal", args.spec.reciprocal},   {"seed", args.spec.seed},
        {"out", args.out_dir},              {"name", args.name},
    };
    manifest.outputs = {snp, sidecar};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

int cmd_fit_dip(const FitDipArgs& args) {
    const auto t0 = Clock::now();
    ensure_directory(args.out_dir);
    const SParamTensor reference = load_reference(args.input);
    const int f = reference.freq_count();
    const int count = resolve_count(f, args.rate, args.count);
    MeasurementSet m = subsample_tensor(reference, uniform_indices(f, count));

    PosteriorSummary summary = fit(m, args.fit);

    const int p = reference.ports();
    const std::string mean_snp = tensor_filename(args.out_dir + "/dip_mean", p);
    write_file_atomic(mean_snp, write_touchstone(summary.mean));
    const std::string std_path = args.out_dir + "/dip_std.csv";
    write_file_atomic(std_path,
                      std_csv(reference.grid(), p, summary.std_magnitude, summary.std_channels));
    const std::string loss_path = args.out_dir + "/dip_loss.csv";
    write_file_atomic(loss_path, loss_trace_csv(summary.loss_trace));

    // PSNR of every posterior checkpoint against the reference
    std::string sample_csv = "sample,iteration,psnr_db\n";
    const RealChannels ref_flat = flatten(reference);
    for (std::size_t i = 0; i < summary.samples.size(); ++i) {
        const int iteration = args.fit.burn_in + static_cast<int>(i + 1) * args.fit.sample_every;
        sample_csv += std::to_string(i) + ',' + std::to_string(iteration) + ',' +
                      fmt(psnr(ref_flat, flatten(summary.samples[i]))) + '\n';
    }
    const std::string sample_path = args.out_dir + "/dip_sample_psnr.csv";
    write_file_atomic(sample_path, sample_csv);

    const double psnr_db = psnr(ref_flat, flatten(summary.mean));
    const double data_rms =
        std::sqrt(summary.loss_trace.back().data_loss /
                  static_cast<double>(flatten(m.data).size()));

    nlohmann::json metrics;
    metrics["psnr_db"] = json_psnr(psnr_db);
    metrics["data_rms"] = data_rms;
    metrics["reg_value"] = summary.loss_trace.back().reg_value;
    metrics["samples"] = summary.samples.size();
    metrics["seed"] = args.fit.seed;
    metrics["observed_count"] = count;
    metrics["psnr_on"] = "real_channels";
    const std::string metrics_path = args.out_dir + "/metrics.json";
    write_file_atomic(metrics_path, metrics.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "fit-dip";
    manifest.seed = args.fit.seed;
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = fit_config_json(args.fit);
    manifest.config["input"] = args.input;
    manifest.config["rate"] = args.rate;
    manifest.config["count"] = args.count;
    manifest.config["resolved_count"] = count;
    manifest.config["out"] = args.out_dir;
    manifest.input_hashes = {{args.input, sha256_file(args.input)}};
    manifest.outputs = {mean_snp, std_path, loss_path, sample_path, metrics_path};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

int cmd_fit_vf(const FitVfArgs& args) {
    const auto t0 = Clock::now();
    ensure_directory(args.out_dir);
    const SParamTensor reference = load_reference(args.input);
    const int f = reference.freq_count();
    const int count = resolve_count(f, args.rate, args.count);
    MeasurementSet m = subsample_tensor(reference, uniform_indices(f, count));

    VfResult result;
    int chosen_k = args.poles;
    nlohmann::json holdout = nlohmann::json::array();
    if (args.poles > 0) {
        result = vf_fit(m, args.poles);
    } else {
        AutoKResult auto_result = vf_fit_auto_k(m, args.k_max);
        result = auto_result.fit;
        chosen_k = auto_result.chosen_k;
        for (const auto& [k, score] : auto_result.holdout_scores)
            holdout.push_back({{"k", k}, {"holdout_rms", score}});
    }

    const SParamTensor pred = vf_eval(result.model, reference.grid());
    const int p = reference.ports();
    const std::string fit_snp = tensor_filename(args.out_dir + "/vf_fit", p);
    write_file_atomic(fit_snp, write_touchstone(pred));
    const std::string model_path = args.out_dir + "/vf_model.txt";
    write_file_atomic(model_path, result.model.export_text());

    nlohmann::json metrics;
    metrics["psnr_db"] = json_psnr(psnr(flatten(reference), flatten(pred)));
    metrics["rel_rms"] = result.rel_rms;
    metrics["poles"] = chosen_k;
    metrics["auto_k"] = args.poles == 0;
    metrics["holdout_scores"] = holdout;
    metrics["iterations"] = result.iterations;
    metrics["converged"] = result.converged;
    metrics["rank_deficient"] = result.rank_deficient;
    metrics["observed_count"] = count;
    metrics["psnr_on"] = "real_channels";
    const std::string metrics_path = args.out_dir + "/metrics.json";
    write_file_atomic(metrics_path, metrics.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "fit-vf";
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = {
        {"input", args.input}, {"rate", args.rate},   {"count", args.count},
        {"poles", args.poles}, {"k_max", args.k_max}, {"resolved_count", count},
        {"out", args.out_dir},
    };
    manifest.input_hashes = {{args.input, sha256_file(args.input)}};
    manifest.outputs = {fit_snp, model_path, metrics_path};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

int cmd_sweep(const SweepArgs& args) {
    const auto t0 = Clock::now();
    if (args.rates.empty() || args.seeds.empty() || args.methods.empty())
        throw std::runtime_error("sweep: needs rates, seeds and methods");
    for (const std::string& m : args.methods)
        if (m != "dip" && m != "vf") throw std::runtime_error("sweep: unknown method '" + m + "'");
    ensure_directory(args.out_dir);
    const SParamTensor reference = load_reference(args.input);

    struct Task {
        int method_idx, rate_idx, seed_idx;
        FitOutcome outcome;
    };
    std::vector<Task> tasks;
    for (int mi = 0; mi < static_cast<int>(args.methods.size()); ++mi)
        for (int ri = 0; ri < static_cast<int>(args.rates.size()); ++ri)
            for (int si = 0; si < static_cast<int>(args.seeds.size()); ++si)
                tasks.push_back({mi, ri, si, {}});

    run_parallel(args.jobs, static_cast<int>(tasks.size()), [&](int i) {
        Task& t = tasks[static_cast<std::size_t>(i)];
        const std::string& method = args.methods[static_cast<std::size_t>(t.method_idx)];
        const double rate = args.rates[static_cast<std::size_t>(t.rate_idx)];
        if (method == "dip") {
            FitConfig cfg = args.fit;
            cfg.seed = derive_seed(args.seeds[static_cast<std::size_t>(t.seed_idx)],
                                   static_cast<std::uint64_t>(t.method_idx) * 10007 +
                                       static_cast<std::uint64_t>(t.rate_idx));
            t.outcome = run_dip_fit(reference, rate, cfg);
        } else {
            t.outcome = run_vf_fit(reference, rate, args.k_max);
        }
    });

    std::string csv = "record,method,rate,seed,psnr_db,psnr_mean,psnr_std,status\n";
    for (const Task& t : tasks) {
        csv += "result,";
        csv += args.methods[static_cast<std::size_t>(t.method_idx)];
        csv += ',' + fmt(args.rates[static_cast<std::size_t>(t.rate_idx)]);
        csv += ',' + std::to_string(args.seeds[static_cast<std::size_t>(t.seed_idx)]);
        csv += ',';
        csv += t.outcome.ok ? fmt(t.outcome.psnr_db) : "";
        csv += ",,,";
        csv += t.outcome.ok ? "ok" : "failed";
        csv += '\n';
    }
    for (int mi = 0; mi < static_cast<int>(args.methods.size()); ++mi)
        for (int ri = 0; ri < static_cast<int>(args.rates.size()); ++ri) {
            std::vector<double> vals;
            for (const Task& t : tasks)
                if (t.method_idx == mi && t.rate_idx == ri && t.outcome.ok)
                    vals.push_back(t.outcome.psnr_db);
            double mean = 0.0, sd = 0.0;
            if (!vals.empty()) {
                for (double v : vals) mean += v;
                mean /= static_cast<double>(vals.size());
                for (double v : vals) sd += (v - mean) * (v - mean);
                sd = std::sqrt(sd / static_cast<double>(vals.size()));
            }
            csv += "summary,";
            csv += args.methods[static_cast<std::size_t>(mi)];
            csv += ',' + fmt(args.rates[static_cast<std::size_t>(ri)]);
            csv += ",,," + fmt(mean) + ',' + fmt(sd) + ',';
            csv += vals.empty() ? "failed" : "ok";
            csv += '\n';
        }

    const std::string csv_path = args.out_dir + "/sweep.csv";
    write_file_atomic(csv_path, csv);

    RunManifest manifest;
    manifest.command = "sweep";
    manifest.seed = args.seeds.front();
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = fit_config_json(args.fit);
    manifest.config["input"] = args.input;
    manifest.config["rates"] = args.rates;
    manifest.config["seeds"] = args.seeds;
    manifest.config["methods"] = args.methods;
    manifest.config["k_max"] = args.k_max;
    manifest.config["jobs"] = args.jobs;
    manifest.config["out"] = args.out_dir;
    manifest.input_hashes = {{args.input, sha256_file(args.input)}};
    manifest.outputs = {csv_path};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

int cmd_ablate(const AblateArgs& args) {
    const auto t0 = Clock::now();
    if (args.rates.empty() || args.seeds.empty())
        throw std::runtime_error("ablate: needs rates and seeds");
    ensure_directory(args.out_dir);
    const SParamTensor reference = load_reference(args.input);

    struct Task {
        int variant_idx, rate_idx, seed_idx;
        FitOutcome outcome;
    };
    std::vector<Task> tasks;
    for (int vi = 0; vi < 5; ++vi)
        for (int ri = 0; ri < static_cast<int>(args.rates.size()); ++ri)
            for (int si = 0; si < static_cast<int>(args.seeds.size()); ++si)
                tasks.push_back({vi, ri, si, {}});

    run_parallel(args.jobs, static_cast<int>(tasks.size()), [&](int i) {
        Task& t = tasks[static_cast<std::size_t>(i)];
        FitConfig cfg = variant_config(args.fit, kAblationLadder[t.variant_idx]);
        cfg.seed = derive_seed(args.seeds[static_cast<std::size_t>(t.seed_idx)],
                               static_cast<std::uint64_t>(t.variant_idx) * 10007 +
                                   static_cast<std::uint64_t>(t.rate_idx));
        t.outcome =
            run_dip_fit(reference, args.rates[static_cast<std::size_t>(t.rate_idx)], cfg);
    });

    std::string csv = "variant,rate,seed,psnr_db,status\n";
    for (const Task& t : tasks) {
        csv += kAblationLadder[t.variant_idx].name;
        csv += ',' + fmt(args.rates[static_cast<std::size_t>(t.rate_idx)]);
        csv += ',' + std::to_string(args.seeds[static_cast<std::size_t>(t.seed_idx)]);
        csv += ',';
        csv += t.outcome.ok ? fmt(t.outcome.psnr_db) : "";
        csv += ',';
        csv += t.outcome.ok ? "ok" : "failed";
        csv += '\n';
    }
    const std::string csv_path = args.out_dir + "/ablate.csv";
    write_file_atomic(csv_path, csv);

    std::string summary = "variant,rate,psnr_mean,psnr_std,fits\n";
    for (int vi = 0; vi < 5; ++vi)
        for (int ri = 0; ri < static_cast<int>(args.rates.size()); ++ri) {
            std::vector<double> vals;
            for (const Task& t : tasks)
                if (t.variant_idx == vi && t.rate_idx == ri && t.outcome.ok)
                    vals.push_back(t.outcome.psnr_db);
            double mean = 0.0, sd = 0.0;
            for (double v : vals) mean += v;
            if (!vals.empty()) mean /= static_cast<double>(vals.size());
            for (double v : vals) sd += (v - mean) * (v - mean);
            if (!vals.empty()) sd = std::sqrt(sd / static_cast<double>(vals.size()));
            summary += kAblationLadder[vi].name;
            summary += ',' + fmt(args.rates[static_cast<std::size_t>(ri)]) + ',' + fmt(mean) +
                       ',' + fmt(sd) + ',' + std::to_string(vals.size()) + '\n';
        }
    const std::string summary_path = args.out_dir + "/ablate_summary.csv";
    write_file_atomic(summary_path, summary);

    RunManifest manifest;
    manifest.command = "ablate";
    manifest.seed = args.seeds.front();
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = fit_config_json(args.fit);
    manifest.config["input"] = args.input;
    manifest.config["rates"] = args.rates;
    manifest.config["seeds"] = args.seeds;
    manifest.config["jobs"] = args.jobs;
    manifest.config["out"] = args.out_dir;
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& v : kAblationLadder)
        variants.push_back({{"name", v.name},
                            {"regularizer", v.regularizer},
                            {"input_noise", v.input_noise},
                            {"sgld_noise", v.sgld_noise},
                            {"causality_layer", v.causality_layer}});
    manifest.config["variants"] = variants;
    manifest.input_hashes = {{args.input, sha256_file(args.input)}};
    manifest.outputs = {csv_path, summary_path};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

int cmd_uncertainty(const UncertaintyArgs& args) {
    const auto t0 = Clock::now();
    ensure_directory(args.out_dir);
    const SParamTensor reference = load_reference(args.input);
    const int f = reference.freq_count();
    const int count = resolve_count(f, args.rate, args.count);
    MeasurementSet m = subsample_tensor(reference, uniform_indices(f, count));

    PosteriorSummary summary = fit(m, args.fit);

    const int p = reference.ports();
    std::vector<double> std_agg(static_cast<std::size_t>(f), 0.0);
    std::vector<double> err_agg(static_cast<std::size_t>(f), 0.0);
    std::ostringstream os;
    os << "frequency_hz";
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            os << ",s" << (i + 1) << (j + 1) << "_mean_mag"
               << ",s" << (i + 1) << (j + 1) << "_std"
               << ",s" << (i + 1) << (j + 1) << "_abs_err";
    os << ",std_mean,abs_err_mean\n";
    for (int k = 0; k < f; ++k) {
        os << fmt(reference.grid()[k], "%.16e");
        double se = 0.0, ee = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) {
                const double mean_mag = std::abs(summary.mean(i, j, k));
                const double sd = summary.std_magnitude(i * p + j, k);
                const double err = std::abs(summary.mean(i, j, k) - reference(i, j, k));
                os << ',' << fmt(mean_mag) << ',' << fmt(sd) << ',' << fmt(err);
                se += sd;
                ee += err;
            }
        se /= p * p;
        ee /= p * p;
        std_agg[static_cast<std::size_t>(k)] = se;
        err_agg[static_cast<std::size_t>(k)] = ee;
        os << ',' << fmt(se) << ',' << fmt(ee) << '\n';
    }
    const std::string csv_path = args.out_dir + "/uncertainty.csv";
    write_file_atomic(csv_path, os.str());

    nlohmann::json metrics;
    metrics["rank_correlation_std_error"] = spearman(std_agg, err_agg);
    metrics["psnr_db"] = json_psnr(psnr(flatten(reference), flatten(summary.mean)));
    metrics["samples"] = summary.samples.size();
    metrics["seed"] = args.fit.seed;
    metrics["observed_count"] = count;
    metrics["psnr_on"] = "real_channels";
    const std::string metrics_path = args.out_dir + "/metrics.json";
    write_file_atomic(metrics_path, metrics.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "uncertainty";
    manifest.seed = args.fit.seed;
    manifest.version = SPFIT_VERSION_STRING;
    manifest.config = fit_config_json(args.fit);
    manifest.config["input"] = args.input;
    manifest.config["rate"] = args.rate;
    manifest.config["count"] = args.count;
    manifest.config["resolved_count"] = count;
    manifest.config["out"] = args.out_dir;
    manifest.input_hashes = {{args.input, sha256_file(args.input)}};
    manifest.outputs = {csv_path, metrics_path};
    manifest.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
    manifest.write(args.out_dir);
    return 0;
}

}  // namespace spfit::cli
