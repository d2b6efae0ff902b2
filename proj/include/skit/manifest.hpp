#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skit {

inline constexpr const char* kToolVersion = "skit 0.1.0";

std::string fnv1a_hex(std::string_view data);
std::string fnv1a_file(const std::string& path);

// Everything needed to reproduce a run byte-exactly: inputs by content hash,
// the resolved configuration, and the seed. Timings are informational.
struct RunManifest {
    std::string subcommand;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path -> content hash
    std::vector<std::pair<std::string, std::string>> config;  // key -> value
    std::vector<std::pair<std::string, double>> timings_ms;

    std::string text() const;
    void write(const std::string& out_dir) const;
};

void write_file(const std::string& path, const std::string& content);

} // namespace skit
