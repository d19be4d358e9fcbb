#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "edid/identify.hpp"
#include "edid/model.hpp"
#include "edid/montecarlo.hpp"

namespace edid {

// One strict-schema config file drives every command; unknown keys anywhere
// are errors.
struct SimulateSettings {
    int n = 1000;
    std::uint64_t seed = 1;
    bool keep_components = false;
};

struct EstimateSettings {
    std::string method = "lemma1"; // lemma1 | theorem1
    EstimateOptions options;
    std::pair<double, double> search{-2.0, 2.0};
    double epsilon_cf = 1e-3;
    bool demean = false;
};

struct EquivalenceSettings {
    double candidate_a1 = 0.0;
};

struct MontecarloSettings {
    std::string procedure = "lemma1";
    int n = 10000;
    int replications = 1;
    std::uint64_t base_seed = 1;
    int threads = 1;
};

struct Config {
    EDModelSpec model;
    std::optional<SimulateSettings> simulate;
    std::optional<EstimateSettings> estimate;
    std::optional<EquivalenceSettings> equivalence;
    std::optional<MontecarloSettings> montecarlo;
};

Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

EDModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json model_spec_to_json(const EDModelSpec& spec);

ExperimentConfig experiment_config(const Config& cfg);

} // namespace edid
