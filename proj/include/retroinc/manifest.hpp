#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace retroinc {

inline constexpr const char* kToolVersion = "0.1.0";

// Record of one CLI run: command, inputs (with content digests), outputs,
// seed and timing. Written next to the outputs so any result file can be
// traced back to the exact invocation that produced it.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir;
    std::string tool_version = kToolVersion;
    double wall_clock_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::pair<std::string, std::string>> outputs; // path, digest

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void save(const std::string& path) const;
};

// FNV-1a 64-bit digest of a file's bytes, as 16 hex characters.
std::string file_digest(const std::string& path);

} // namespace retroinc
