#include <CLI11.hpp>

#include <cstdio>
#include <exception>

#include "commands.hpp"

namespace {

using namespace spfit;
using namespace spfit::cli;

// Burn-in and sampling cadence follow the published schedule shape when only
// the iteration budget changes: burn-in at 3/4 of the run, 50 samples after.
void apply_schedule_defaults(FitConfig& cfg, bool burn_set, bool every_set) {
    if (!burn_set) cfg.burn_in = 3 * cfg.iterations / 4;
    if (!every_set) cfg.sample_every = std::max(1, (cfg.iterations - cfg.burn_in) / 50);
}

void add_fit_flags(CLI::App* cmd, FitConfig& cfg, bool* burn_set, bool* every_set) {
    cmd->add_option("--iterations,-T", cfg.iterations, "SGLD iterations")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--step", cfg.step, "step size alpha")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", cfg.lambda, "third-derivative penalty weight")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--sigma0-sq", cfg.sigma0_sq, "input-noise variance at t=0")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--sigmaT-sq", cfg.sigmaT_sq, "input-noise variance at t=T")
        ->check(CLI::PositiveNumber);
    auto* burn = cmd->add_option("--burn-in", cfg.burn_in, "iterations discarded before sampling")
                     ->check(CLI::NonNegativeNumber);
    auto* every = cmd->add_option("--sample-every", cfg.sample_every, "sampling cadence")
                      ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_flag("--no-sgld-noise{false}", cfg.sgld_noise, "disable SGLD weight noise");
    cmd->add_flag("--no-input-noise{false}", cfg.input_noise, "disable latent noise");
    cmd->add_flag("--no-regularizer{false}", cfg.regularizer, "disable the penalty term");
    cmd->add_flag("--no-cel{false}", cfg.causality_layer, "disable the causality layer");
    cmd->add_flag("--sample-clean-z", cfg.sample_at_clean_latent,
                  "sample with the noise-free latent");
    cmd->add_flag("--reg-separate", cfg.reg_separate_real_imag,
                  "L1 on real/imag parts instead of the complex modulus");
    cmd->add_option("--leaky-slope", cfg.leaky_slope, "LeakyReLU slope")
        ->check(CLI::Range(1e-6, 0.999));
    cmd->parse_complete_callback([&cfg, burn, every, burn_set, every_set]() {
        *burn_set = burn->count() > 0;
        *every_set = every->count() > 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"S-parameter curve fitting: untrained convolutional prior with SGLD, "
                 "vector-fitting baseline, synthetic data"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value configuration file");
    app.get_config_formatter_base()->comment('#');

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic ground-truth dataset");
    synth_cmd->add_option("--ports", synth.spec.ports, "port count")->check(CLI::Range(1, 16));
    synth_cmd->add_option("--freqs", synth.spec.freq_count, "frequency samples")
        ->check(CLI::Range(32, 1000000));
    synth_cmd->add_option("--freq-min", synth.spec.freq_min_hz, "band start in Hz")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--freq-max", synth.spec.freq_max_hz, "band end in Hz")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--pole-pairs", synth.spec.pole_pairs, "conjugate pole pairs")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--damping-min", synth.spec.damping_min, "")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--damping-max", synth.spec.damping_max, "")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--amplitude", synth.spec.amplitude, "resonance peak scale")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_flag("--no-reciprocal{false}", synth.spec.reciprocal, "skip symmetrization");
    synth_cmd->add_option("--seed", synth.spec.seed, "random seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory");
    synth_cmd->add_option("--name", synth.name, "output file stem");

    FitDipArgs fit_dip;
    bool dip_burn_set = false, dip_every_set = false;
    auto* dip_cmd = app.add_subcommand("fit-dip", "fit with the untrained generator and SGLD");
    dip_cmd->add_option("input", fit_dip.input, "reference .sNp file")->required();
    dip_cmd->add_option("--rate", fit_dip.rate, "fraction of samples observed")
        ->check(CLI::Range(1e-9, 1.0));
    dip_cmd->add_option("--count", fit_dip.count, "observed sample count (overrides --rate)")
        ->check(CLI::Range(2, 1000000));
    add_fit_flags(dip_cmd, fit_dip.fit, &dip_burn_set, &dip_every_set);
    dip_cmd->add_option("--out", fit_dip.out_dir, "output directory");

    FitVfArgs fit_vf;
    auto* vf_cmd = app.add_subcommand("fit-vf", "fit with the vector-fitting baseline");
    vf_cmd->add_option("input", fit_vf.input, "reference .sNp file")->required();
    vf_cmd->add_option("--rate", fit_vf.rate, "fraction of samples observed")
        ->check(CLI::Range(1e-9, 1.0));
    vf_cmd->add_option("--count", fit_vf.count, "observed sample count (overrides --rate)")
        ->check(CLI::Range(2, 1000000));
    auto* poles_opt =
        vf_cmd->add_option("--poles", fit_vf.poles, "pole count")->check(CLI::PositiveNumber);
    auto* auto_flag = vf_cmd->add_flag("--auto-k", fit_vf.auto_k, "holdout-based pole selection");
    poles_opt->excludes(auto_flag);
    vf_cmd->add_option("--k-max", fit_vf.k_max, "largest pole count for --auto-k")
        ->check(CLI::PositiveNumber);
    vf_cmd->add_option("--out", fit_vf.out_dir, "output directory");

    SweepArgs sweep;
    bool sweep_burn_set = false, sweep_every_set = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "PSNR vs sub-sampling rate comparison");
    sweep_cmd->add_option("input", sweep.input, "reference .sNp file")->required();
    sweep_cmd->add_option("--rates", sweep.rates, "sub-sampling rates")->required();
    sweep_cmd->add_option("--seeds", sweep.seeds, "seeds, one fit per seed")->required();
    sweep_cmd->add_option("--methods", sweep.methods, "dip and/or vf");
    add_fit_flags(sweep_cmd, sweep.fit, &sweep_burn_set, &sweep_every_set);
    sweep_cmd->add_option("--k-max", sweep.k_max, "vf pole-count ceiling")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--jobs", sweep.jobs, "concurrent fits")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", sweep.out_dir, "output directory");

    AblateArgs ablate;
    bool ablate_burn_set = false, ablate_every_set = false;
    auto* ablate_cmd = app.add_subcommand("ablate", "five-variant mechanism ladder");
    ablate_cmd->add_option("input", ablate.input, "reference .sNp file")->required();
    ablate_cmd->add_option("--rates", ablate.rates, "sub-sampling rates")->required();
    ablate_cmd->add_option("--seeds", ablate.seeds, "seeds, one fit per seed")->required();
    add_fit_flags(ablate_cmd, ablate.fit, &ablate_burn_set, &ablate_every_set);
    ablate_cmd->add_option("--jobs", ablate.jobs, "concurrent fits")->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--out", ablate.out_dir, "output directory");

    UncertaintyArgs uncertainty;
    bool unc_burn_set = false, unc_every_set = false;
    auto* unc_cmd = app.add_subcommand("uncertainty", "posterior mean/std vs error report");
    unc_cmd->add_option("input", uncertainty.input, "reference .sNp file")->required();
    unc_cmd->add_option("--rate", uncertainty.rate, "fraction of samples observed")
        ->check(CLI::Range(1e-9, 1.0));
    unc_cmd->add_option("--count", uncertainty.count, "observed sample count")
        ->check(CLI::Range(2, 1000000));
    add_fit_flags(unc_cmd, uncertainty.fit, &unc_burn_set, &unc_every_set);
    unc_cmd->add_option("--out", uncertainty.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (dip_cmd->parsed()) {
            apply_schedule_defaults(fit_dip.fit, dip_burn_set, dip_every_set);
            return cmd_fit_dip(fit_dip);
        }
        if (vf_cmd->parsed()) return cmd_fit_vf(fit_vf);
        if (sweep_cmd->parsed()) {
            apply_schedule_defaults(sweep.fit, sweep_burn_set, sweep_every_set);
            return cmd_sweep(sweep);
        }
        if (ablate_cmd->parsed()) {
            apply_schedule_defaults(ablate.fit, ablate_burn_set, ablate_every_set);
            return cmd_ablate(ablate);
        }
        if (unc_cmd->parsed()) {
            apply_schedule_defaults(uncertainty.fit, unc_burn_set, unc_every_set);
            return cmd_uncertainty(uncertainty);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
