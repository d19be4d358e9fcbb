#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "edid/cf_engine.hpp"
#include "edid/errors.hpp"
#include "edid/model.hpp"
#include "edid/simulate.hpp"
#include "support.hpp"

using namespace edid;
using namespace edid::test;

namespace {

EDModelSpec random_spec(std::mt19937_64& rng, int max_T = 7, int max_q = 3) {
    std::uniform_int_distribution<int> Tgen(2, max_T);
    const int T = Tgen(rng);
    std::uniform_int_distribution<int> qgen(0, std::min(max_q, T - 1));
    const int q = qgen(rng);
    std::uniform_real_distribution<double> coef(-1.2, 1.2);
    std::uniform_real_distribution<double> var(0.2, 2.0);

    EDModelSpec spec;
    spec.T = T;
    spec.q = q;
    spec.a = Eigen::VectorXd::Zero(q);
    for (int k = 0; k < q; ++k)
        spec.a(k) = coef(rng);
    for (int k = 0; k < q; ++k)
        spec.blocks.push_back(ShockBlock::singleton(FactorDist(Gaussian{var(rng)})));
    for (int t = 1; t <= T; ++t) {
        Eigen::Matrix2d L;
        L << coef(rng), coef(rng), coef(rng), coef(rng);
        spec.blocks.push_back(ShockBlock::pair_from_factors(
            FactorDist(Gaussian{var(rng)}), t % 2 ? skewed_mixture()
                                                  : FactorDist(CenteredGamma{2.0, 0.7}),
            L));
    }
    return spec;
}

} // namespace

TEST_CASE("loading matrix without MA terms") {
    EDModelSpec spec;
    spec.T = 2;
    spec.q = 0;
    spec.a = Eigen::VectorXd(0);
    spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(), unit_gaussian()));
    spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(), unit_gaussian()));

    const LoadingMatrix lm = build_loading_matrix(spec);
    REQUIRE(lm.A.rows() == 2);
    REQUIRE(lm.A.cols() == 4);
    // y1 = eta1 + xi1, y2 = eta1 + eta2 + xi2
    Eigen::MatrixXd expect(2, 4);
    expect << 1, 1, 0, 0,
              1, 0, 1, 1;
    CHECK((lm.A - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loading matrix two-period MA(1) structure") {
    const EDModelSpec spec = gaussian_q1_spec(2, 0.5);
    const LoadingMatrix lm = build_loading_matrix(spec);
    // theta = (xi0, eta1, xi1, eta2, xi2)
    Eigen::MatrixXd expect(2, 5);
    expect << 0.5, 1, 1.0, 0, 0,
              0.0, 1, 0.5, 1, 1;
    CHECK((lm.A - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(lm.labels[0].kind == ShockLabel::Kind::Xi);
    CHECK(lm.labels[0].time == 0);
    CHECK(lm.labels[1].kind == ShockLabel::Kind::Eta);
    CHECK(lm.labels[1].time == 1);
}

TEST_CASE("loading matrix q=2 row expansion") {
    EDModelSpec spec;
    spec.T = 5;
    spec.q = 2;
    spec.a = Eigen::VectorXd(2);
    spec.a << 0.4, 0.7;
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
    for (int t = 1; t <= 5; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
    const LoadingMatrix lm = build_loading_matrix(spec);
    REQUIRE(lm.A.cols() == 2 + 10);

    // row t=3: xi_1 loads a_2 = 0.7, xi_2 loads a_1 = 0.4, xi_3 loads 1,
    // eta_1..eta_3 load 1, nothing else
    const int t = 3;
    CHECK(lm.A(t - 1, theta_index_xi(spec, 1)) == 0.7);
    CHECK(lm.A(t - 1, theta_index_xi(spec, 2)) == 0.4);
    CHECK(lm.A(t - 1, theta_index_xi(spec, 3)) == 1.0);
    CHECK(lm.A(t - 1, theta_index_eta(spec, 1)) == 1.0);
    CHECK(lm.A(t - 1, theta_index_eta(spec, 2)) == 1.0);
    CHECK(lm.A(t - 1, theta_index_eta(spec, 3)) == 1.0);
    CHECK(lm.A(t - 1, theta_index_xi(spec, 0)) == 0.0);
    CHECK(lm.A(t - 1, theta_index_xi(spec, -1)) == 0.0);
    CHECK(lm.A(t - 1, theta_index_eta(spec, 4)) == 0.0);
    CHECK(lm.A(t - 1, theta_index_xi(spec, 4)) == 0.0);
}

TEST_CASE("spec validation rejects malformed models") {
    EDModelSpec spec = gaussian_q1_spec(3, 0.5);
    SUBCASE("q >= T") {
        spec.q = 3;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("wrong coefficient count") {
        spec.a = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("wrong block count") {
        spec.blocks.pop_back();
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("block kinds out of order") {
        std::swap(spec.blocks.front(), spec.blocks.back());
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("loading matrix propagates validation") {
        spec.a = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(build_loading_matrix(spec), ValidationError);
    }
}

TEST_CASE("simulation path equals the stacked linear map") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 12; ++rep) {
        const EDModelSpec spec = random_spec(rng);
        const LoadingMatrix lm = build_loading_matrix(spec);
        const Panel panel = generate_panel(spec, 50, 1000 + rep, /*keep_components=*/true);
        REQUIRE(panel.shocks.has_value());
        const Eigen::MatrixXd via_map = *panel.shocks * lm.A.transpose();
        CHECK((via_map - panel.y).cwiseAbs().maxCoeff() < 1e-13);
        CHECK((*panel.v + *panel.w - panel.y).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("loading matrix has full row rank when a_q is nonzero") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        EDModelSpec spec = random_spec(rng);
        if (spec.q > 0 && std::abs(spec.a(spec.q - 1)) < 0.05)
            spec.a(spec.q - 1) = 0.5;
        const LoadingMatrix lm = build_loading_matrix(spec);
        REQUIRE(lm.A.cols() == spec.q + 2 * spec.T);
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lm.A.transpose());
        CHECK(qr.rank() == spec.T);
    }
}

TEST_CASE("family cumulants match log-cf derivatives at the origin") {
    // kappa_2 = -psi''(0), kappa_3 = psi'''(0) / i^3
    const std::vector<FactorDist> dists{
        unit_gaussian(), skewed_mixture(), mild_mixture(),
        FactorDist(CenteredGamma{2.0, 1.5}), FactorDist(CenteredGamma{1.0, -0.8})};
    for (const auto& d : dists) {
        const LogCfDerivs at0 = d.log_cf_derivs(0.0);
        CHECK(std::abs(at0.d0) < 1e-15);
        CHECK(std::abs(at0.d1) < 1e-15); // mean zero
        CHECK(at0.d2.real() == doctest::Approx(-d.variance()).epsilon(1e-12));
        CHECK(std::abs(at0.d2.imag()) < 1e-15);
        const cplx k3 = at0.d3 / (cplx{0, 1} * cplx{0, 1} * cplx{0, 1});
        CHECK(k3.real() == doctest::Approx(d.third_cumulant()).epsilon(1e-12));
        CHECK(std::abs(k3.imag()) < 1e-14);
    }
}

TEST_CASE("family log-cf derivatives agree with central differences") {
    const std::vector<FactorDist> dists{skewed_mixture(),
                                        FactorDist(CenteredGamma{2.3, 0.9}),
                                        FactorDist(Gaussian{1.7})};
    const double h = 1e-5;
    for (const auto& d : dists) {
        for (double x : {-1.3, -0.2, 0.4, 2.1}) {
            const LogCfDerivs mid = d.log_cf_derivs(x);
            const LogCfDerivs up = d.log_cf_derivs(x + h);
            const LogCfDerivs dn = d.log_cf_derivs(x - h);
            CHECK(std::abs((up.d0 - dn.d0) / (2 * h) - mid.d1) < 1e-7);
            CHECK(std::abs((up.d1 - dn.d1) / (2 * h) - mid.d2) < 1e-7);
            CHECK(std::abs((up.d2 - dn.d2) / (2 * h) - mid.d3) < 1e-7);
        }
    }
}

TEST_CASE("mixture must be mean zero") {
    CHECK_THROWS_AS(FactorDist(GaussianMixture{0.3, 1.0, 0.2, 1.0, 0.2}),
                    ValidationError);
    CHECK_THROWS_AS(FactorDist(Gaussian{-1.0}), ValidationError);
    CHECK_THROWS_AS(FactorDist(CenteredGamma{-2.0, 1.0}), ValidationError);
}

TEST_CASE("block second moments and independence structure") {
    SUBCASE("independent pair") {
        const ShockBlock b = ShockBlock::pair_independent(FactorDist(Gaussian{2.0}),
                                                          skewed_mixture());
        const Eigen::MatrixXd m = b.second_moment();
        CHECK(m(0, 0) == doctest::Approx(2.0));
        CHECK(m(0, 1) == 0.0);
        CHECK(b.components_independent());
        CHECK(!b.is_gaussian());
        CHECK(b.nondegenerate());
    }
    SUBCASE("shared nongaussian factor means dependence") {
        const ShockBlock b = dependent_mixture_pair();
        CHECK(!b.components_independent());
        const Eigen::MatrixXd m = b.second_moment();
        CHECK(m(0, 1) != 0.0);
    }
    SUBCASE("gaussian pair with zero covariance counts as independent") {
        // both components load both factors but the covariance cancels
        Eigen::Matrix2d L;
        const double r = 1.0 / std::sqrt(2.0);
        L << r, r, r, -r;
        const ShockBlock b = ShockBlock::pair_from_factors(
            FactorDist(Gaussian{1.0}), FactorDist(Gaussian{1.0}), L);
        CHECK(b.is_gaussian());
        CHECK(std::abs(b.second_moment()(0, 1)) < 1e-15);
        CHECK(b.components_independent());
    }
    SUBCASE("degenerate blocks are flagged") {
        const ShockBlock b = ShockBlock::singleton(FactorDist(Gaussian{0.0}));
        CHECK(!b.nondegenerate());
    }
}

TEST_CASE("block third cumulant tensor is multilinear in the loadings") {
    const ShockBlock b = dependent_mixture_pair();
    const double k3 = skewed_mixture().third_cumulant();
    const Eigen::Matrix2d L = b.loadings();
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q)
            for (int r = 0; r < 2; ++r) {
                const double expect = L(p, 1) * L(q, 1) * L(r, 1) * k3; // gaussian factor drops
                CHECK(b.third_cumulant(p, q, r) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("identification precondition reports") {
    SUBCASE("theorem 1 all pass") {
        const EDModelSpec spec = lemma1_mixture_spec(4, 0.5);
        const PreconditionReport r = validate_identification_preconditions(spec, Theorem::T1);
        CHECK(r.all_pass());
    }
    SUBCASE("theorem 1 coefficient exclusion fails at a1 = 1") {
        const EDModelSpec spec = lemma1_mixture_spec(4, 1.0);
        const PreconditionReport r = validate_identification_preconditions(spec, Theorem::T1);
        CHECK(!r.all_pass());
        bool found = false;
        for (const auto& c : r.checks)
            if (c.name == "a1 exclusion" && !c.pass)
                found = true;
        CHECK(found);
    }
    SUBCASE("theorem 1 needs nongaussian xi1") {
        const EDModelSpec spec = gaussian_q1_spec(5, 0.5);
        const PreconditionReport r = validate_identification_preconditions(spec, Theorem::T1);
        CHECK(!r.all_pass());
    }
    SUBCASE("lemma 1 passes at q=2, T=3") {
        EDModelSpec spec;
        spec.T = 3;
        spec.q = 2;
        spec.a = Eigen::VectorXd(2);
        spec.a << 0.4, 0.3;
        spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
        spec.blocks.push_back(ShockBlock::singleton(unit_gaussian()));
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           skewed_mixture()));
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
        spec.blocks.push_back(ShockBlock::pair_independent(unit_gaussian(),
                                                           unit_gaussian()));
        const PreconditionReport r = validate_identification_preconditions(spec, Theorem::L1);
        CHECK(r.all_pass());
    }
    SUBCASE("lemma 1 fails on a dependent first pair") {
        const EDModelSpec spec = theorem1_mixture_spec(4, 0.5);
        const PreconditionReport r = validate_identification_preconditions(spec, Theorem::L1);
        CHECK(!r.all_pass());
    }
    SUBCASE("theorem 2 wants jointly normal shocks") {
        const EDModelSpec gauss = gaussian_q1_spec(5, 0.5, 0.3);
        CHECK(validate_identification_preconditions(gauss, Theorem::T2).all_pass());
        const EDModelSpec mix = lemma1_mixture_spec(5, 0.5);
        CHECK(!validate_identification_preconditions(mix, Theorem::T2).all_pass());
    }
}
