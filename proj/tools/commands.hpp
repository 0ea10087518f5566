#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spfit/sgld.hpp"
#include "spfit/synth.hpp"

namespace spfit::cli {

struct SynthArgs {
    SynthSpec spec;
    std::string out_dir = "spfit_out/synth";
    std::string name = "synth";
};
int cmd_synth(const SynthArgs& args);

struct FitDipArgs {
    std::string input;
    double rate = 0.1;
    int count = 0;  // overrides rate when > 0
    FitConfig fit;
    std::string out_dir = "spfit_out/fit_dip";
};
int cmd_fit_dip(const FitDipArgs& args);

struct FitVfArgs {
    std::string input;
    double rate = 0.1;
    int count = 0;
    int poles = 0;  // fixed pole count; 0 selects auto-K
    bool auto_k = false;
    int k_max = 40;
    std::string out_dir = "spfit_out/fit_vf";
};
int cmd_fit_vf(const FitVfArgs& args);

struct SweepArgs {
    std::string input;
    std::vector<double> rates;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> methods{"dip", "vf"};
    FitConfig fit;
    int k_max = 40;
    int jobs = 1;
    std::string out_dir = "spfit_out/sweep";
};
int cmd_sweep(const SweepArgs& args);

struct AblateArgs {
    std::string input;
    std::vector<double> rates;
    std::vector<std::uint64_t> seeds;
    FitConfig fit;
    int jobs = 1;
    std::string out_dir = "spfit_out/ablate";
};
int cmd_ablate(const AblateArgs& args);

struct UncertaintyArgs {
    std::string input;
    double rate = 0.05;
    int count = 0;
    FitConfig fit;
    std::string out_dir = "spfit_out/uncertainty";
};
int cmd_uncertainty(const UncertaintyArgs& args);

/// The five-variant ablation ladder; each step enables one more mechanism.
struct AblationVariant {
    const char* name;
    bool regularizer, input_noise, sgld_noise, causality_layer;
};
inline constexpr AblationVariant kAblationLadder[5] = {
    {"vanilla", false, false, false, false},
    {"+reg", true, false, false, false},
    {"+input-noise", true, true, false, false},
    {"+sgld", true, true, true, false},
    {"+cel", true, true, true, true},
};

FitConfig variant_config(const FitConfig& base, const AblationVariant& v);

}  // namespace spfit::cli
