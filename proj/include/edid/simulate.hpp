#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "edid/model.hpp"

namespace edid {

// Observed residual log-earnings, n observations by T periods.
struct Panel {
    Eigen::MatrixXd y;
    std::optional<Eigen::MatrixXd> v;      // permanent component, when kept
    std::optional<Eigen::MatrixXd> w;      // transitory component, when kept
    std::optional<Eigen::MatrixXd> shocks; // stacked draws (n x (q+2T)), when kept

    int n() const { return static_cast<int>(y.rows()); }
    int T() const { return static_cast<int>(y.cols()); }
};

// Deterministic given (spec, n, seed); one RNG stream per observation so
// results do not depend on how the work is split.
Panel generate_panel(const EDModelSpec& spec, int n, std::uint64_t seed,
                     bool keep_components = false);

void demean_columns(Panel& panel);

// Stable stream derivation used for per-observation and per-replication seeds.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index);

} // namespace edid
