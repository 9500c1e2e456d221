#pragma once

#include "wigait/common.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace wigait {

inline constexpr const char* kToolVersion = "wigait 0.1.0";

// SHA-256 of a file's bytes, lowercase hex.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const void* data, std::size_t n);

// Write-then-rename so readers never observe partial files.
void atomic_write(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// Per-run record: tool version, seed, config snapshot, input/output digests.
// Deliberately excludes wall-clock data so reruns are byte-identical.
struct RunManifest {
    std::string tool = kToolVersion;
    std::string command;
    std::uint64_t seed = 0;
    std::string config_text;  // canonical snapshot of the merged config
    std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
    std::vector<std::pair<std::string, std::string>> outputs;  // path, digest

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    nlohmann::json to_json() const;
    // Written last, atomically, into out_dir/manifest.json
    void write(const std::string& out_dir) const;
    // Recompute digests and compare (tamper check). Throws on mismatch.
    static void verify(const std::string& manifest_path);
};

}  // namespace wigait
