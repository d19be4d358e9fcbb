#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <variant>

namespace edid {

using cplx = std::complex<double>;

// Value and first three derivatives of a scalar log characteristic function,
// evaluated at a real argument.
struct LogCfDerivs {
    cplx d0;
    cplx d1;
    cplx d2;
    cplx d3;
};

// Derivatives of log g from raw derivatives of g (order-3 quotient expansion).
// Shared by the closed-form families and the empirical cf backend.
cplx log_deriv1_from_raw(cplx g, cplx ga);
cplx log_deriv2_from_raw(cplx g, cplx ga, cplx gb, cplx gab);
cplx log_deriv3_from_raw(cplx g, cplx ga, cplx gb, cplx gc,
                         cplx gab, cplx gac, cplx gbc, cplx gabc);
LogCfDerivs log_derivs_from_raw(cplx g, cplx g1, cplx g2, cplx g3);

struct Gaussian {
    double var = 0.0;
};

// Two-component zero-mean normal mixture: p*N(mu1, var1) + (1-p)*N(mu2, var2)
// with p*mu1 + (1-p)*mu2 = 0.
struct GaussianMixture {
    double p;
    double mu1;
    double var1;
    double mu2;
    double var2;
};

// shape*scale subtracted so the mean is zero.
struct CenteredGamma {
    double shape;
    double scale;
};

// One mean-zero scalar shock factor with a closed-form log cf.
class FactorDist {
public:
    explicit FactorDist(Gaussian g);
    explicit FactorDist(GaussianMixture m);
    explicit FactorDist(CenteredGamma g);

    double variance() const;
    double third_cumulant() const;
    // Exact family-level test: mixtures that collapse to a point mixing
    // measure count as Gaussian.
    bool is_gaussian() const;
    bool is_degenerate() const { return variance() == 0.0; }
    std::string family_name() const;

    // log cf and derivatives to order 3 at real argument x.
    LogCfDerivs log_cf_derivs(double x) const;

    double sample(std::mt19937_64& rng) const;

    template <class Visitor>
    decltype(auto) visit(Visitor&& v) const {
        return std::visit(std::forward<Visitor>(v), dist_);
    }

private:
    std::variant<Gaussian, GaussianMixture, CenteredGamma> dist_;
};

} // namespace edid
