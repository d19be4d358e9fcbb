#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace edid {

inline constexpr const char* kVersion = "0.1.0";

// Provenance stamp embedded in every output file.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::string version = kVersion;

    nlohmann::json to_json() const;
};

// Exit codes: 0 success, 2 validation error, 3 numerical-degeneracy
// diagnostic (e.g. unidentified within tolerance), 1 unexpected failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

} // namespace edid
