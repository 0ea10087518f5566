#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "spfit/sparam_core.hpp"

namespace spfit {

enum class TouchstoneFormat { RI, MA, DB };

struct TouchstoneOptions {
    double freq_unit_hz = 1e9;  // GHz default
    TouchstoneFormat format = TouchstoneFormat::MA;
    double reference_resistance = 50.0;

    static const char* unit_name(double unit_hz);
    static const char* format_name(TouchstoneFormat f);
};

/// Parses Touchstone v1 text for an N-port network (N from the file
/// extension digit, passed by the caller). Frequencies come back in Hz and
/// values as complex numbers regardless of the on-disk format.
std::pair<SParamTensor, TouchstoneOptions> parse_touchstone(const std::string& text, int ports);

/// Extracts N from a ".sNp" path, e.g. "chan.s4p" -> 4.
int ports_from_filename(const std::string& path);

/// Serializes a tensor as Touchstone v1 with 17 significant digits.
std::string write_touchstone(const SParamTensor& x, const TouchstoneOptions& opts = {
                                                        .freq_unit_hz = 1e9,
                                                        .format = TouchstoneFormat::RI,
                                                        .reference_resistance = 50.0});

/// CSV with one row per frequency: frequency in Hz followed by |S_ij| in dB
/// for every entry of every named tensor. All tensors must share the grid.
std::string write_results_csv(const FrequencyGrid& grid,
                              const std::vector<std::pair<std::string, const SParamTensor*>>& tensors);

}  // namespace spfit
