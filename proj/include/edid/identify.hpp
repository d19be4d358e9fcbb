#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edid/cf_engine.hpp"
#include "edid/model.hpp"
#include "edid/moments.hpp"

namespace edid {

// Gaussian q=1 parameterization: a1, var(xi_0), and per t the 2x2 second
// moments of (eta_t, xi_t).
struct GaussianParamsQ1 {
    double a1 = 0.0;
    double var_xi0 = 0.0;
    std::vector<double> var_eta;    // t = 1..T
    std::vector<double> var_xi;     // t = 1..T
    std::vector<double> cov_eta_xi; // t = 1..T

    int horizon() const { return static_cast<int>(var_eta.size()); }
    void validate() const;

    // packing order: var_xi0, then (var_eta_t, cov_t, var_xi_t) per t
    Eigen::VectorXd pack() const;
    static GaussianParamsQ1 unpack(double a1, const Eigen::VectorXd& x);

    static GaussianParamsQ1 from_spec(const EDModelSpec& spec);
    // all-Gaussian spec; requires every block positive semidefinite
    EDModelSpec to_spec() const;
    // loading-matrix route, no distributional construction needed
    CovarianceStructure implied_covariance() const;
};

struct EquivalenceResult {
    GaussianParamsQ1 tilde;
    double residual = 0.0;        // max abs covariance mismatch, recomputed from scratch
    bool pd_ok = false;
    int first_non_pd_block = -1;  // 0 = xi_0 block, t = pair block t; -1 if all PD
};

// Solves the covariance system for the tilde second moments given candidate
// a1, taking the minimum-norm deviation from the truth parameters.
EquivalenceResult theorem2_equivalent_model(const GaussianParamsQ1& truth,
                                            double candidate_a1, int T);

// u-grids for the cf probes, origin excluded.
std::vector<double> make_u_grid(double u_max, int points);

// Re[ Cov(y_1, y_{q+1}) + d^2/ds_1 ds_{q+1} log phi_Y(s*(u)) ] with
// s*(u): s_1 = c u, s_{j+1} = -u, s_{q+2} = (1 - c) u. Zero at c = a_j for
// every u when (eta_1, xi_1) are independent.
double lemma1_moment(const CfEngine& engine, double a_candidate_j, int j, double u,
                     int q, int T);

struct EstimateOptions {
    std::vector<double> u_grid = make_u_grid(2.0, 21);
    double search_lo = -2.0;
    double search_hi = 2.0;
    int scan_points = 81;
    double refine_tol = 1e-9;
    double flatness_floor = 1e-13;  // absolute part of the numerical floor
    double exclusion_radius = 0.02; // keep candidates away from {0,1} (theorem 1)
    int max_scan_evals = 200000;
};

struct EstimateDiagnostics {
    bool unidentified = false;
    double numerical_floor = 0.0;
    double surface_range = 0.0;
    double symmetry_residual = 0.0; // max |f(-u) + conj(f(u))| style residue
    int dropped_candidates = 0;     // ill-conditioned or excluded grid points
    std::vector<std::string> warnings;
};

struct EstimateResult {
    std::vector<double> a_hat; // empty when unidentified
    std::vector<std::vector<double>> candidates;
    std::vector<double> criterion; // NaN for invalid candidates
    EstimateDiagnostics diagnostics;
};

EstimateResult lemma1_estimate(const CfEngine& engine, int q, int T,
                               const std::vector<double>& u_grid,
                               std::pair<double, double> search_interval,
                               const EstimateOptions& options = {});

// The five derivative probes at one (j, u) plus the solved 4x4 system.
struct ProbeSystem {
    Eigen::Matrix4d M;
    std::array<cplx, 5> probes{};  // raw probe values, order as in the proof
    Eigen::Vector4cd rhs;          // probes 1-3 and the normalized 4th equation
    Eigen::Vector4cd recovered;    // solved partials; [3] is the d^3/dx2^3 component
    std::array<double, 5> reliability{};
    int j = 0;
    double u = 0.0;

    cplx target() const { return recovered(3); }
    bool reliable(double epsilon_cf) const;
};

Eigen::Matrix4d probe_system_matrix(double a1);
// closed form a1^2 (1 - a1)
double probe_system_det(double a1);

ProbeSystem theorem1_probes(const CfEngine& engine, const Eigen::VectorXd& a_candidate,
                            int j, double u, int q, int T);

struct Theorem1CriterionDetail {
    double value = 0.0;
    std::vector<double> u;                  // valid grid points actually used, per j
    std::vector<std::vector<cplx>> d_curve; // recovered target per j over u
    std::vector<double> per_j;              // variance contribution per j
    double symmetry_residual = 0.0;
    int dropped_points = 0;
};

Theorem1CriterionDetail theorem1_criterion_detail(const CfEngine& engine,
                                                  const Eigen::VectorXd& a_candidate,
                                                  const std::vector<double>& u_grid,
                                                  int q, int T);

// Flatness criterion: sum over j of Var_u(Re D_j(u)); zero at the truth on
// the analytic backend.
double theorem1_criterion(const CfEngine& engine, const Eigen::VectorXd& a_candidate,
                          const std::vector<double>& u_grid, int q, int T);

EstimateResult theorem1_estimate(const CfEngine& engine, int q, int T,
                                 const std::vector<double>& u_grid,
                                 std::pair<double, double> search_box,
                                 const EstimateOptions& options = {});

} // namespace edid
