#pragma once

// Shared fixtures and independent oracles for the test suites. Everything in
// here deliberately avoids the library's computation paths it is used to
// check: covariances are transcribed formulas, third cumulants come from
// polarization of univariate k-statistics, derivatives from central
// differences.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "edid/cf_engine.hpp"
#include "edid/identify.hpp"
#include "edid/model.hpp"
#include "edid/simulate.hpp"

namespace edid::test {

// ---- fixtures --------------------------------------------------------------

// strongly skewed zero-mean mixture used across the identification tests
inline FactorDist skewed_mixture() {
    return FactorDist(GaussianMixture{0.3, 1.4, 0.25, -0.6, 0.25});
}

inline FactorDist mild_mixture() {
    return FactorDist(GaussianMixture{0.4, 0.9, 0.16, -0.6, 0.36});
}

inline FactorDist unit_gaussian() { return FactorDist(Gaussian{1.0}); }

// q=1 all-Gaussian spec with unit variances and one dependent pair covariance
inline EDModelSpec gaussian_q1_spec(int T, double a1, double cov_eta_xi_1 = 0.0) {
    EDModelSpec spec;
    spec.T = T;
    spec.q = 1;
    spec.a = Eigen::VectorXd::Constant(1, a1);
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    for (int t = 1; t <= T; ++t) {
        if (t == 1 && cov_eta_xi_1 != 0.0) {
            Eigen::Matrix2d m;
            m << 1.0, cov_eta_xi_1, cov_eta_xi_1, 1.0;
            const Eigen::LLT<Eigen::Matrix2d> llt(m);
            spec.blocks.push_back(ShockBlock::pair_from_factors(
                unit_gaussian(), unit_gaussian(), llt.matrixL()));
        } else {
            spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                               unit_gaussian()));
        }
    }
    return spec;
}

// q=1 spec with nongaussian xi_1 independent of eta_1 (Lemma 1 regime)
inline EDModelSpec lemma1_mixture_spec(int T, double a1) {
    EDModelSpec spec;
    spec.T = T;
    spec.q = 1;
    spec.a = Eigen::VectorXd::Constant(1, a1);
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(), skewed_mixture()));
    for (int t = 2; t <= T; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
    return spec;
}

// q=2 Lemma 1 spec; initial shocks Gaussian, xi_1 a skewed mixture
inline EDModelSpec lemma1_mixture_spec_q2(int T, double a1, double a2) {
    EDModelSpec spec;
    spec.T = T;
    spec.q = 2;
    spec.a = Eigen::VectorXd(2);
    spec.a << a1, a2;
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(), skewed_mixture()));
    for (int t = 2; t <= T; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
    return spec;
}

// dependent (eta_1, xi_1) pair sharing a skewed factor: eta_1 = f1 + 0.4 f2,
// xi_1 = 0.8 f2 + 0.6 f3 folded into two factors via the loading matrix
inline ShockBlock dependent_mixture_pair() {
    Eigen::Matrix2d L;
    L << 0.9, 0.5,
         0.0, 1.0;
    return ShockBlock::pair_from_factors(unit_gaussian(), skewed_mixture(), L);
}

// Theorem 1 regime: q=1, dependent nongaussian first pair
inline EDModelSpec theorem1_mixture_spec(int T, double a1) {
    EDModelSpec spec;
    spec.T = T;
    spec.q = 1;
    spec.a = Eigen::VectorXd::Constant(1, a1);
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(dependent_mixture_pair());
    for (int t = 2; t <= T; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
    return spec;
}

// q=2 Theorem 1 spec; Gaussian initial shocks keep the probe equalities exact
inline EDModelSpec theorem1_mixture_spec_q2(int T, double a1, double a2) {
    EDModelSpec spec;
    spec.T = T;
    spec.q = 2;
    spec.a = Eigen::VectorXd(2);
    spec.a << a1, a2;
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(dependent_mixture_pair());
    for (int t = 2; t <= T; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
    return spec;
}

// ---- oracles ---------------------------------------------------------------

// Direct transcription of the q=1 covariance formula families (the six
// displayed moment equations), independent of the loading-matrix route.
inline Eigen::MatrixXd transcribed_covariance_q1(const GaussianParamsQ1& p) {
    const int T = p.horizon();
    const double a1 = p.a1;
    auto ve = [&](int t) { return p.var_eta[t - 1]; };     // t = 1..T
    auto vx = [&](int t) { return t == 0 ? p.var_xi0 : p.var_xi[t - 1]; };
    auto cv = [&](int t) { return t == 0 ? 0.0 : p.cov_eta_xi[t - 1]; };

    Eigen::MatrixXd C(T, T);
    for (int t = 1; t <= T; ++t) {
        double eta_sum = 0.0;
        for (int tau = 1; tau <= t; ++tau)
            eta_sum += ve(tau);
        C(t - 1, t - 1) = eta_sum + a1 * a1 * vx(t - 1) + vx(t)
                        + 2.0 * a1 * cv(t - 1) + 2.0 * cv(t);
        for (int j = 1; t + j <= T; ++j) {
            double val;
            if (j == 1)
                val = eta_sum + a1 * vx(t) + a1 * cv(t - 1) + (1.0 + a1) * cv(t);
            else
                val = eta_sum + a1 * cv(t - 1) + cv(t);
            C(t - 1, t + j - 1) = C(t + j - 1, t - 1) = val;
        }
    }
    return C;
}

// univariate k-statistic for the third cumulant
inline double k_stat3(const Eigen::VectorXd& x) {
    const double n = static_cast<double>(x.size());
    const double mean = x.mean();
    const double m3 = (x.array() - mean).cube().sum();
    return n / ((n - 1.0) * (n - 2.0)) * m3;
}

// cross third cumulant via polarization of univariate k-statistics:
// 6 k(X,Y,Z) = k3(X+Y+Z) - k3(X+Y) - k3(X+Z) - k3(Y+Z) + k3(X) + k3(Y) + k3(Z)
inline double polarized_k_stat3(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& z) {
    return (k_stat3(x + y + z) - k_stat3(x + y) - k_stat3(x + z) - k_stat3(y + z)
            + k_stat3(x) + k_stat3(y) + k_stat3(z)) / 6.0;
}

// central finite difference of an engine derivative in one extra direction
inline cplx central_difference(const CfEngine& engine, const Eigen::VectorXd& s,
                               const std::vector<Eigen::VectorXd>& lower_dirs,
                               const Eigen::VectorXd& step_dir, double h) {
    const cplx up = engine.derivative(s + h * step_dir, lower_dirs).value;
    const cplx dn = engine.derivative(s - h * step_dir, lower_dirs).value;
    return (up - dn) / (2.0 * h);
}

// mean and standard error of a statistic over K equal blocks of rows
inline std::pair<double, double> block_mean_se(
    const Eigen::MatrixXd& data, int blocks,
    const std::function<double(const Eigen::MatrixXd&)>& stat) {
    const Eigen::Index n = data.rows();
    const Eigen::Index per = n / blocks;
    std::vector<double> vals;
    for (int b = 0; b < blocks; ++b)
        vals.push_back(stat(data.middleRows(b * per, per)));
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (vals.size() - 1.0));
    return {mean, sd / std::sqrt(static_cast<double>(vals.size()))};
}

} // namespace edid::test
