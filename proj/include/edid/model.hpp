#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "edid/families.hpp"

namespace edid {

// One independent block of the stacked shock vector: either a lone initial
// transitory shock or a contemporaneous (eta_t, xi_t) pair. The block value
// is loadings * (independent factors), which keeps the joint log cf closed
// form for arbitrary within-pair dependence.
class ShockBlock {
public:
    enum class Kind { SingletonTransitory, ContemporaneousPair };

    static ShockBlock singleton(FactorDist xi);
    static ShockBlock pair_independent(FactorDist eta, FactorDist xi);
    static ShockBlock pair_from_factors(FactorDist f1, FactorDist f2,
                                        const Eigen::Matrix2d& loadings);

    Kind kind() const { return kind_; }
    int dim() const { return kind_ == Kind::SingletonTransitory ? 1 : 2; }
    int n_factors() const { return static_cast<int>(factors_.size()); }
    const std::vector<FactorDist>& factors() const { return factors_; }
    // dim x n_factors
    const Eigen::MatrixXd& loadings() const { return loadings_; }

    Eigen::MatrixXd second_moment() const;
    double third_cumulant(int p, int q, int r) const;

    bool is_gaussian() const;
    bool components_independent() const;
    bool nondegenerate() const;

    // log phi_block and its partials at real x (size dim), multi-index given
    // as component indices, e.g. {1,1,0} = d^3/dx2^2 dx1. Order <= 3.
    cplx log_cf_partial(const Eigen::VectorXd& x, const std::vector<int>& index) const;

private:
    ShockBlock(Kind kind, std::vector<FactorDist> factors, Eigen::MatrixXd loadings);

    Kind kind_;
    std::vector<FactorDist> factors_;
    Eigen::MatrixXd loadings_;
};

// The earnings process y_t = eta_1 + ... + eta_t + a_q xi_{t-q} + ... + xi_t
// with a_0 = 1, plus the full shock distribution.
struct EDModelSpec {
    int T = 0;
    int q = 0;
    Eigen::VectorXd a;              // a_1 .. a_q
    std::vector<ShockBlock> blocks; // q singletons (xi_{1-q}..xi_0), then T pairs

    void validate() const; // throws ValidationError

    const ShockBlock& initial_xi_block(int k) const { return blocks.at(k); } // k = 0..q-1
    const ShockBlock& pair_block(int t) const { return blocks.at(q + t - 1); } // t = 1..T
    int n_shocks() const { return q + 2 * T; }
    // a_k with a_0 = 1 and zero outside [0, q]
    double coeff(int k) const;
};

struct ShockLabel {
    enum class Kind { Eta, Xi } kind;
    int time; // xi: 1-q..T, eta: 1..T
};

// y = A * Theta with Theta = (xi_{1-q},..,xi_0, eta_1, xi_1, .., eta_T, xi_T).
struct LoadingMatrix {
    Eigen::MatrixXd A; // T x (q + 2T)
    std::vector<ShockLabel> labels;
};

LoadingMatrix build_loading_matrix(const EDModelSpec& spec);

// Column index of a shock in the stacked order.
int theta_index_xi(const EDModelSpec& spec, int time);  // time = 1-q..T
int theta_index_eta(const EDModelSpec& spec, int time); // time = 1..T

enum class Theorem { T1, T2, L1 };

struct PreconditionCheck {
    std::string name;
    bool pass = true;
    bool warning_only = false;
    std::string detail;
};

struct PreconditionReport {
    Theorem theorem;
    std::vector<PreconditionCheck> checks;
    bool all_pass() const;
    std::vector<std::string> warnings() const;
};

PreconditionReport validate_identification_preconditions(const EDModelSpec& spec,
                                                          Theorem theorem);

} // namespace edid
