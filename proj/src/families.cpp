#include "edid/families.hpp"

#include <cmath>
#include <sstream>

#include "edid/errors.hpp"

namespace edid {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kMinModulus = 1e-290; // exp underflow guard for quotients

void check_nonzero(cplx g) {
    if (std::abs(g) < kMinModulus)
        throw ContractError("log-cf quotient expansion: cf modulus underflowed");
}

} // namespace

cplx log_deriv1_from_raw(cplx g, cplx ga) {
    check_nonzero(g);
    return ga / g;
}

cplx log_deriv2_from_raw(cplx g, cplx ga, cplx gb, cplx gab) {
    check_nonzero(g);
    return gab / g - (ga / g) * (gb / g);
}

cplx log_deriv3_from_raw(cplx g, cplx ga, cplx gb, cplx gc,
                         cplx gab, cplx gac, cplx gbc, cplx gabc) {
    check_nonzero(g);
    const cplx ra = ga / g, rb = gb / g, rc = gc / g;
    return gabc / g - (gab / g) * rc - (gac / g) * rb - (gbc / g) * ra
         + 2.0 * ra * rb * rc;
}

LogCfDerivs log_derivs_from_raw(cplx g, cplx g1, cplx g2, cplx g3) {
    check_nonzero(g);
    LogCfDerivs out;
    out.d0 = std::log(g);
    out.d1 = log_deriv1_from_raw(g, g1);
    out.d2 = log_deriv2_from_raw(g, g1, g1, g2);
    out.d3 = log_deriv3_from_raw(g, g1, g1, g1, g2, g2, g2, g3);
    return out;
}

FactorDist::FactorDist(Gaussian g) : dist_(g) {
    if (!(g.var >= 0.0))
        throw ValidationError("gaussian factor: var must be >= 0");
}

FactorDist::FactorDist(GaussianMixture m) : dist_(m) {
    if (!(m.p >= 0.0 && m.p <= 1.0))
        throw ValidationError("gaussian_mixture factor: p must lie in [0,1]");
    if (!(m.var1 >= 0.0) || !(m.var2 >= 0.0))
        throw ValidationError("gaussian_mixture factor: variances must be >= 0");
    const double mean = m.p * m.mu1 + (1.0 - m.p) * m.mu2;
    if (std::abs(mean) > 1e-12) {
        std::ostringstream os;
        os << "gaussian_mixture factor: mean " << mean << " is not zero";
        throw ValidationError(os.str());
    }
}

FactorDist::FactorDist(CenteredGamma g) : dist_(g) {
    if (!(g.shape > 0.0))
        throw ValidationError("centered_gamma factor: shape must be > 0");
    if (g.scale == 0.0)
        throw ValidationError("centered_gamma factor: scale must be nonzero");
}

double FactorDist::variance() const {
    return visit([](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            return d.var;
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            return d.p * (d.mu1 * d.mu1 + d.var1)
                 + (1.0 - d.p) * (d.mu2 * d.mu2 + d.var2);
        } else {
            return d.shape * d.scale * d.scale;
        }
    });
}

double FactorDist::third_cumulant() const {
    return visit([](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            return 0.0;
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            // mean zero, so kappa_3 = E[X^3]
            return d.p * (d.mu1 * d.mu1 * d.mu1 + 3.0 * d.mu1 * d.var1)
                 + (1.0 - d.p) * (d.mu2 * d.mu2 * d.mu2 + 3.0 * d.mu2 * d.var2);
        } else {
            return 2.0 * d.shape * d.scale * d.scale * d.scale;
        }
    });
}

bool FactorDist::is_gaussian() const {
    return visit([](const auto& d) -> bool {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            return true;
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            if (d.p == 0.0 || d.p == 1.0) return true;
            return d.mu1 == d.mu2 && d.var1 == d.var2;
        } else {
            return false;
        }
    });
}

std::string FactorDist::family_name() const {
    return visit([](const auto& d) -> std::string {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) return "gaussian";
        else if constexpr (std::is_same_v<D, GaussianMixture>) return "gaussian_mixture";
        else return "centered_gamma";
    });
}

LogCfDerivs FactorDist::log_cf_derivs(double x) const {
    return visit([x](const auto& d) -> LogCfDerivs {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            LogCfDerivs out;
            out.d0 = -0.5 * d.var * x * x;
            out.d1 = -d.var * x;
            out.d2 = -d.var;
            out.d3 = 0.0;
            return out;
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            // phi = sum_c w_c exp(i mu_c x - var_c x^2 / 2), log derivs by quotient
            cplx g = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
            const double w[2] = {d.p, 1.0 - d.p};
            const double mu[2] = {d.mu1, d.mu2};
            const double var[2] = {d.var1, d.var2};
            for (int c = 0; c < 2; ++c) {
                const cplx e = w[c] * std::exp(kI * (mu[c] * x) - 0.5 * var[c] * x * x);
                const cplx h = kI * mu[c] - var[c] * x; // (log component)'
                g += e;
                g1 += e * h;
                g2 += e * (h * h - var[c]);
                g3 += e * (h * h * h - 3.0 * var[c] * h);
            }
            return log_derivs_from_raw(g, g1, g2, g3);
        } else {
            // psi(x) = -k log(1 - i theta x) - i k theta x
            const double k = d.shape, th = d.scale;
            const cplx z = 1.0 - kI * (th * x);
            const cplx zi = 1.0 / z;
            LogCfDerivs out;
            out.d0 = -k * std::log(z) - kI * (k * th * x);
            out.d1 = kI * (k * th) * zi - kI * (k * th);
            out.d2 = -(k * th * th) * zi * zi;
            out.d3 = -2.0 * kI * (k * th * th * th) * zi * zi * zi;
            return out;
        }
    });
}

double FactorDist::sample(std::mt19937_64& rng) const {
    return visit([&rng](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            std::normal_distribution<double> z;
            return std::sqrt(d.var) * z(rng);
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            std::uniform_real_distribution<double> u;
            std::normal_distribution<double> z;
            const bool first = u(rng) < d.p;
            const double mu = first ? d.mu1 : d.mu2;
            const double sd = std::sqrt(first ? d.var1 : d.var2);
            return mu + sd * z(rng);
        } else {
            std::gamma_distribution<double> g(d.shape, std::abs(d.scale));
            const double v = g(rng) - d.shape * std::abs(d.scale);
            return d.scale >= 0.0 ? v : -v;
        }
    });
}

} // namespace edid
