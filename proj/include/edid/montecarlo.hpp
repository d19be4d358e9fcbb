#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edid/identify.hpp"
#include "edid/model.hpp"

namespace edid {

enum class Procedure { Lemma1, Theorem1, Theorem2Demo, CovarianceCheck };

std::string procedure_name(Procedure p);
Procedure procedure_from_name(const std::string& name);

struct ExperimentConfig {
    EDModelSpec spec;
    Procedure procedure = Procedure::Lemma1;
    int n = 10000;
    int replications = 1;
    std::uint64_t base_seed = 1;
    int threads = 1; // 0 = hardware concurrency

    EstimateOptions estimate;
    std::pair<double, double> search{-2.0, 2.0};
    double candidate_a1 = 0.0; // theorem2 demo

    void validate() const; // procedure/spec compatibility included
};

struct ReplicationRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<double> a_hat; // empty when unidentified / not applicable
    bool unidentified = false;
    double criterion_min = 0.0;
    double max_cov_deviation = 0.0; // covariance-check
    double equiv_residual = 0.0;    // theorem2 demo
    bool equiv_pd_ok = false;
    double wall_ms = 0.0;
};

struct ExperimentSummary {
    std::vector<double> truth;     // coefficients from the spec
    std::vector<double> mean_a;    // per coefficient, over identified reps
    std::vector<double> bias;
    std::vector<double> sd;
    std::vector<double> rmse;
    std::vector<double> mc_se;     // sd / sqrt(#identified reps)
    int n_identified = 0;
    int n_unidentified = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReplicationRecord> replications;
    ExperimentSummary summary;
    double wall_seconds = 0.0;
};

// Replication r runs on seed derived from (base_seed, r); the report is
// deterministic given the config and identical for any thread count.
ExperimentReport run_experiment(const ExperimentConfig& config);

void write_report_csv(std::ostream& os, const ExperimentReport& report);

} // namespace edid
