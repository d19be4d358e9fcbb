#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "edid/model.hpp"
#include "edid/simulate.hpp"

namespace edid {

enum class CfBackend { Analytic, Empirical };

// One evaluation of log phi_Y or a derivative of it. reliability is |phi(s)|
// at the query point; empirical values with reliability at or below the
// engine threshold are not trusted.
struct CFValue {
    cplx value{0.0, 0.0};
    int order = 0;
    CfBackend backend = CfBackend::Analytic;
    double reliability = 1.0;
};

// Query point plus an ordered list of derivative directions (possibly empty).
// Coordinate partials are directions e_i.
struct CFQuery {
    Eigen::VectorXd s;
    std::vector<Eigen::VectorXd> directions;

    static CFQuery value_at(Eigen::VectorXd point);
    // index entries are 0-based coordinates, e.g. {0, q} = d^2/ds_1 ds_{q+1}
    static CFQuery partial_at(Eigen::VectorXd point, const std::vector<int>& index);
};

// Evaluator of log phi_Y(s) and directional derivatives up to order 3.
class CfEngine {
public:
    virtual ~CfEngine() = default;

    virtual int horizon() const = 0;
    virtual CfBackend backend() const = 0;

    // order = directions.size(); throws ContractError above order 3 and
    // IllConditionedPointError when the point cannot be trusted.
    virtual CFValue derivative(const Eigen::VectorXd& s,
                               std::span<const Eigen::VectorXd> directions) const = 0;

    // Batched evaluation along the ray s = u * base, one result per u.
    // Untrustworthy empirical points come back with NaN value and their
    // reliability filled in instead of throwing.
    virtual std::vector<CFValue> derivative_ray(
        const Eigen::VectorXd& base, std::span<const double> u,
        std::span<const Eigen::VectorXd> directions) const;

    CFValue evaluate(const CFQuery& query) const;
    CFValue log_cf(const Eigen::VectorXd& s) const;
    CFValue partial(const Eigen::VectorXd& s, const std::vector<int>& index) const;

    // Independent row-block engines for sampling-noise estimates; empty when
    // the backend has no sampling error (analytic) or too little data.
    virtual std::vector<std::shared_ptr<const CfEngine>> sampling_blocks(int count) const {
        (void)count;
        return {};
    }

    // Reliability level below which estimators should not use a point even if
    // the engine itself still evaluates it: |phi_hat| of order 1/sqrt(n) is
    // sampling noise, not signal. Zero for exact backends.
    virtual double reliability_floor() const { return 0.0; }

protected:
    void check_query(const Eigen::VectorXd& s,
                     std::span<const Eigen::VectorXd> directions) const;
};

// Exact population log cf: sum of block log cfs composed with the linear
// argument maps read off the loading matrix. Internally the model is reduced
// to y = B f with independent scalar factors f, so every directional
// derivative is a single chain-rule product per factor.
class AnalyticCfEngine : public CfEngine {
public:
    explicit AnalyticCfEngine(const EDModelSpec& spec);

    int horizon() const override { return T_; }
    CfBackend backend() const override { return CfBackend::Analytic; }
    CFValue derivative(const Eigen::VectorXd& s,
                       std::span<const Eigen::VectorXd> directions) const override;

private:
    int T_;
    Eigen::MatrixXd B_; // T x n_factors, column k loads factor k onto y
    std::vector<FactorDist> factors_;
};

// Sample analogue: phi_hat(s) = mean exp(i s.y_i); derivatives are exact
// sample means, log derivatives via the shared quotient expansion.
class EmpiricalCfEngine : public CfEngine {
public:
    explicit EmpiricalCfEngine(const Panel& panel, double epsilon_cf = 1e-3);

    int horizon() const override { return static_cast<int>(data_.cols()); }
    CfBackend backend() const override { return CfBackend::Empirical; }
    double epsilon_cf() const { return epsilon_cf_; }
    double reliability_floor() const override;

    CFValue derivative(const Eigen::VectorXd& s,
                       std::span<const Eigen::VectorXd> directions) const override;
    std::vector<CFValue> derivative_ray(
        const Eigen::VectorXd& base, std::span<const double> u,
        std::span<const Eigen::VectorXd> directions) const override;
    std::vector<std::shared_ptr<const CfEngine>> sampling_blocks(int count) const override;

    // (s, |phi_hat(s)|) conditioning grid along a ray, for diagnostics dumps
    std::vector<std::pair<double, double>> modulus_along_ray(
        const Eigen::VectorXd& base, std::span<const double> u) const;

private:
    CFValue assemble(int order, double n, cplx g, cplx ga, cplx gb, cplx gc,
                     cplx gab, cplx gac, cplx gbc, cplx gabc, bool throw_on_bad,
                     const Eigen::VectorXd& s) const;

    Eigen::MatrixXd data_; // n x T copy of the panel
    double epsilon_cf_;
};

} // namespace edid
