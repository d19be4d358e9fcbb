#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace edid {

// Bad model spec, config, or argument combination.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// API misuse (unsupported derivative order, wrong direction count, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// |phi(s)| fell below the trust threshold for log-derivative queries.
class IllConditionedPointError : public std::runtime_error {
public:
    IllConditionedPointError(std::vector<double> s, double modulus, double threshold);
    const std::vector<double>& point() const noexcept { return s_; }
    double modulus() const noexcept { return modulus_; }
    double threshold() const noexcept { return threshold_; }

private:
    std::vector<double> s_;
    double modulus_;
    double threshold_;
};

// Probe system matrix is numerically singular (candidate a1 near {0,1}).
class SingularProbeSystemError : public std::runtime_error {
public:
    SingularProbeSystemError(double candidate_a1, double det);
    double candidate_a1() const noexcept { return candidate_a1_; }
    double det() const noexcept { return det_; }

private:
    double candidate_a1_;
    double det_;
};

// Probe substitution directions degenerate (candidate a_q near {0,1}).
class DegenerateDirectionError : public std::runtime_error {
public:
    explicit DegenerateDirectionError(double candidate_aq);
    double candidate_aq() const noexcept { return candidate_aq_; }

private:
    double candidate_aq_;
};

} // namespace edid
