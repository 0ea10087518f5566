#include "spfit/touchstone.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace spfit {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void parse_fail(const std::string& msg) {
    throw std::runtime_error("touchstone: " + msg);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Strips '!' comments and splits the remainder into whitespace tokens,
// remembering which tokens start an option line.
struct TokenStream {
    std::vector<std::string> tokens;
    std::size_t pos = 0;

    bool done() const { return pos >= tokens.size(); }
    const std::string& peek() const { return tokens[pos]; }
    std::string next() { return tokens[pos++]; }
};

double parse_number(const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        parse_fail("expected a number, got '" + tok + "'");
    }
    if (used != tok.size()) parse_fail("trailing junk in number '" + tok + "'");
    return v;
}

Complex decode_value(double a, double b, TouchstoneFormat fmt) {
    switch (fmt) {
        case TouchstoneFormat::RI:
            return {a, b};
        case TouchstoneFormat::MA:
            return std::polar(a, b * kPi / 180.0);
        case TouchstoneFormat::DB:
            return std::polar(std::pow(10.0, a / 20.0), b * kPi / 180.0);
    }
    parse_fail("unreachable format");
}

double unit_to_hz(const std::string& unit) {
    const std::string u = lower(unit);
    if (u == "hz") return 1.0;
    if (u == "khz") return 1e3;
    if (u == "mhz") return 1e6;
    if (u == "ghz") return 1e9;
    parse_fail("unknown frequency unit '" + unit + "'");
}

// For 2-port files Touchstone v1 stores S11 S21 S12 S22; all other sizes are
// row-major. Maps the v-th value of a block to the tensor entry row.
int value_slot(int ports, int v) {
    if (ports == 2) {
        static constexpr int order[4] = {0, 2, 1, 3};  // S11 S21 S12 S22
        return order[v];
    }
    return v;
}

}  // namespace

const char* TouchstoneOptions::unit_name(double unit_hz) {
    if (unit_hz == 1.0) return "Hz";
    if (unit_hz == 1e3) return "kHz";
    if (unit_hz == 1e6) return "MHz";
    if (unit_hz == 1e9) return "GHz";
    throw std::invalid_argument("TouchstoneOptions: unsupported frequency unit");
}

const char* TouchstoneOptions::format_name(TouchstoneFormat f) {
    switch (f) {
        case TouchstoneFormat::RI: return "RI";
        case TouchstoneFormat::MA: return "MA";
        case TouchstoneFormat::DB: return "DB";
    }
    return "?";
}

std::pair<SParamTensor, TouchstoneOptions> parse_touchstone(const std::string& text, int ports) {
    if (ports < 1) parse_fail("ports must be >= 1");

    TokenStream ts;
    bool option_seen = false;
    TouchstoneOptions opts;  // defaults: GHz S MA R 50

    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (auto bang = line.find('!'); bang != std::string::npos) line.erase(bang);
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> toks;
        while (ls >> tok) toks.push_back(tok);
        if (toks.empty()) continue;

        if (toks[0] == "[Version]" || lower(toks[0]) == "[version]")
            parse_fail("Touchstone v2 files are not supported");

        if (toks[0][0] == '#') {
            if (option_seen) parse_fail("multiple option lines");
            option_seen = true;
            std::vector<std::string> opt(toks.begin(), toks.end());
            opt[0].erase(0, 1);  // allow both "#GHz" and "# GHz"
            if (opt[0].empty()) opt.erase(opt.begin());
            for (std::size_t i = 0; i < opt.size(); ++i) {
                const std::string t = lower(opt[i]);
                if (t == "hz" || t == "khz" || t == "mhz" || t == "ghz") {
                    opts.freq_unit_hz = unit_to_hz(t);
                } else if (t == "s") {
                    // scattering parameters, the only supported kind
                } else if (t == "y" || t == "z" || t == "h" || t == "g") {
                    parse_fail("only S-parameters are supported (got '" + opt[i] + "')");
                } else if (t == "ri") {
                    opts.format = TouchstoneFormat::RI;
                } else if (t == "ma") {
                    opts.format = TouchstoneFormat::MA;
                } else if (t == "db") {
                    opts.format = TouchstoneFormat::DB;
                } else if (t == "r") {
                    if (i + 1 >= opt.size()) parse_fail("option line: R without a resistance");
                    opts.reference_resistance = parse_number(opt[++i]);
                } else {
                    parse_fail("malformed option line near '" + opt[i] + "'");
                }
            }
            continue;
        }
        for (auto& t : toks) ts.tokens.push_back(std::move(t));
    }

    const int values_per_block = 2 * ports * ports;
    std::vector<double> freqs;
    std::vector<Complex> flat;  // blocks of p^2 entries, row-major
    while (!ts.done()) {
        const double raw_freq = parse_number(ts.next());
        const double freq_hz = raw_freq * opts.freq_unit_hz;
        if (!freqs.empty() && freq_hz <= freqs.back())
            parse_fail("frequencies must be strictly increasing");
        std::vector<Complex> block(static_cast<std::size_t>(ports) * ports);
        for (int v = 0; v < values_per_block / 2; ++v) {
            if (ts.done()) parse_fail("truncated data block (wrong value count per frequency)");
            const double a = parse_number(ts.next());
            if (ts.done()) parse_fail("truncated data block (odd value count)");
            const double b = parse_number(ts.next());
            block[static_cast<std::size_t>(value_slot(ports, v))] = decode_value(a, b, opts.format);
        }
        freqs.push_back(freq_hz);
        flat.insert(flat.end(), block.begin(), block.end());
    }
    if (freqs.empty()) parse_fail("no data rows");

    const int f = static_cast<int>(freqs.size());
    Eigen::MatrixXcd data(ports * ports, f);
    for (int k = 0; k < f; ++k)
        for (int e = 0; e < ports * ports; ++e)
            data(e, k) = flat[static_cast<std::size_t>(k) * ports * ports + e];

    return {SParamTensor(ports, FrequencyGrid(std::move(freqs)), std::move(data)), opts};
}

int ports_from_filename(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) parse_fail("cannot infer port count from '" + path + "'");
    std::string ext = lower(path.substr(dot + 1));
    if (ext.size() < 3 || ext.front() != 's' || ext.back() != 'p')
        parse_fail("expected .sNp extension on '" + path + "'");
    const std::string digits = ext.substr(1, ext.size() - 2);
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            parse_fail("expected .sNp extension on '" + path + "'");
    return std::stoi(digits);
}

std::string write_touchstone(const SParamTensor& x, const TouchstoneOptions& opts) {
    const int p = x.ports();
    const int f = x.freq_count();
    std::string out;
    out.reserve(static_cast<std::size_t>(f) * p * p * 48);

    char buf[96];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), " %.16e", v);
        out += buf;
    };
    auto encode = [&](Complex s) {
        switch (opts.format) {
            case TouchstoneFormat::RI:
                put(s.real());
                put(s.imag());
                break;
            case TouchstoneFormat::MA:
                put(std::abs(s));
                put(std::arg(s) * 180.0 / kPi);
                break;
            case TouchstoneFormat::DB:
                put(20.0 * std::log10(std::abs(s)));
                put(std::arg(s) * 180.0 / kPi);
                break;
        }
    };

    out += "! ";
    out += std::to_string(p);
    out += "-port S-parameter data\n# ";
    out += TouchstoneOptions::unit_name(opts.freq_unit_hz);
    out += " S ";
    out += TouchstoneOptions::format_name(opts.format);
    out += " R ";
    std::snprintf(buf, sizeof(buf), "%g", opts.reference_resistance);
    out += buf;
    out += "\n";

    for (int k = 0; k < f; ++k) {
        std::snprintf(buf, sizeof(buf), "%.16e", x.grid()[k] / opts.freq_unit_hz);
        out += buf;
        if (p <= 2) {
            // one line per frequency; 2-port order is S11 S21 S12 S22
            if (p == 1) {
                encode(x(0, 0, k));
            } else {
                encode(x(0, 0, k));
                encode(x(1, 0, k));
                encode(x(0, 1, k));
                encode(x(1, 1, k));
            }
            out += "\n";
        } else {
            // row-major, each matrix row on its own line, wrapped at 4 pairs
            out += "\n";
            for (int i = 0; i < p; ++i) {
                int on_line = 0;
                for (int j = 0; j < p; ++j) {
                    encode(x(i, j, k));
                    if (++on_line == 4 && j + 1 < p) {
                        out += "\n";
                        on_line = 0;
                    }
                }
                out += "\n";
            }
        }
    }
    return out;
}

std::string write_results_csv(
    const FrequencyGrid& grid,
    const std::vector<std::pair<std::string, const SParamTensor*>>& tensors) {
    std::ostringstream os;
    os << "frequency_hz";
    for (const auto& [name, t] : tensors) {
        if (!(t->grid() == grid))
            throw std::invalid_argument("write_results_csv: grid mismatch for '" + name + "'");
        const int p = t->ports();
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                os << "," << name << "_s" << (i + 1) << (j + 1) << "_db";
    }
    os << "\n";
    char buf[64];
    for (int k = 0; k < grid.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.16e", grid[k]);
        os << buf;
        for (const auto& [name, t] : tensors) {
            const int p = t->ports();
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) {
                    const double db = 20.0 * std::log10(std::abs((*t)(i, j, k)));
                    std::snprintf(buf, sizeof(buf), "%.10g", db);
                    os << "," << buf;
                }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace spfit
