#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spfit::cli {

/// Record of one command invocation; sufficient to re-run it bit-identically.
struct RunManifest {
    std::string command;
    nlohmann::json config;  // full resolved configuration
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> input_hashes;  // (path, sha256)
    std::vector<std::string> outputs;
    double wall_clock_sec = 0.0;
    std::string version;

    nlohmann::json to_json() const;
    /// Writes manifest.json into the run directory.
    void write(const std::string& out_dir) const;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);

}  // namespace spfit::cli
