#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "edid/cf_engine.hpp"
#include "edid/errors.hpp"
#include "edid/identify.hpp"
#include "edid/moments.hpp"
#include "edid/simulate.hpp"
#include "support.hpp"

using namespace edid;
using namespace edid::test;

TEST_CASE("zero-variance spec has a zero covariance matrix") {
    EDModelSpec spec;
    spec.T = 3;
    spec.q = 0;
    spec.a = Eigen::VectorXd(0);
    for (int t = 0; t < 3; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(FactorDist(Gaussian{0.0}),
                                                           FactorDist(Gaussian{0.0})));
    CHECK(implied_covariance(spec).C.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("q=1 implied covariance reproduces the displayed formulas") {
    const EDModelSpec spec = gaussian_q1_spec(4, 0.5, 0.3);
    const Eigen::MatrixXd C = implied_covariance(spec).C;
    // Var(y1) = 0.25 + 1 + 1 + 0.6, Cov(y1, y3) = 1 + 0.3
    CHECK(C(0, 0) == doctest::Approx(2.85).epsilon(1e-14));
    CHECK(C(0, 2) == doctest::Approx(1.3).epsilon(1e-14));
    CHECK(C(0, 3) == doctest::Approx(1.3).epsilon(1e-14));
}

TEST_CASE("general covariance path equals the transcribed q=1 formulas") {
    SUBCASE("binary-exact parameters agree to the bit") {
        GaussianParamsQ1 p;
        p.a1 = 0.5;
        p.var_xi0 = 1.0;
        p.var_eta = {1.0, 0.5, 2.0, 1.0, 0.25};
        p.var_xi = {1.0, 1.5, 0.5, 1.0, 2.0};
        p.cov_eta_xi = {0.25, -0.5, 0.125, 0.0, 0.5};
        const Eigen::MatrixXd general = p.implied_covariance().C;
        const Eigen::MatrixXd transcribed = transcribed_covariance_q1(p);
        CHECK((general - transcribed).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("random parameters agree to rounding") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> var(0.2, 2.0);
        std::uniform_real_distribution<double> coef(-1.5, 1.5);
        for (int rep = 0; rep < 20; ++rep) {
            const int T = 2 + static_cast<int>(rng() % 5);
            GaussianParamsQ1 p;
            p.a1 = coef(rng);
            p.var_xi0 = var(rng);
            for (int t = 0; t < T; ++t) {
                const double ve = var(rng), vx = var(rng);
                p.var_eta.push_back(ve);
                p.var_xi.push_back(vx);
                p.cov_eta_xi.push_back(0.8 * coef(rng) / 1.5 * std::sqrt(ve * vx));
            }
            const Eigen::MatrixXd general = p.implied_covariance().C;
            const Eigen::MatrixXd transcribed = transcribed_covariance_q1(p);
            CHECK((general - transcribed).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
}

TEST_CASE("implied covariance equals minus the log-cf Hessian at the origin") {
    for (const EDModelSpec& spec :
         {theorem1_mixture_spec(4, 0.5), lemma1_mixture_spec_q2(5, 0.4, 0.7),
          gaussian_q1_spec(3, -0.8, 0.2)}) {
        const Eigen::MatrixXd C = implied_covariance(spec).C;
        const AnalyticCfEngine engine(spec);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(spec.T);
        for (int r = 0; r < spec.T; ++r)
            for (int c = 0; c < spec.T; ++c) {
                const cplx h = engine.partial(zero, {r, c}).value;
                CHECK(std::abs(-h.real() - C(r, c)) < 1e-12);
                CHECK(std::abs(h.imag()) < 1e-14);
            }
    }
}

TEST_CASE("implied third cumulants equal the order-3 cf derivatives over i^3") {
    for (const EDModelSpec& spec :
         {theorem1_mixture_spec(4, 0.5), lemma1_mixture_spec_q2(5, 0.4, 0.7)}) {
        const ThirdCumulantTensor K = implied_third_cumulants(spec);
        const AnalyticCfEngine engine(spec);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(spec.T);
        const cplx i3 = cplx{0, 1} * cplx{0, 1} * cplx{0, 1};
        for (int r = 0; r < spec.T; ++r)
            for (int s = 0; s < spec.T; ++s)
                for (int t = 0; t < spec.T; ++t) {
                    const cplx d = engine.partial(zero, {r, s, t}).value / i3;
                    CHECK(std::abs(d.real() - K.K.at(r, s, t)) < 1e-12);
                    CHECK(std::abs(d.imag()) < 1e-13);
                }
    }
}

TEST_CASE("gaussian specs have an identically zero third-cumulant tensor") {
    const ThirdCumulantTensor K = implied_third_cumulants(gaussian_q1_spec(5, 0.5, 0.3));
    CHECK(K.K.max_abs() == 0.0);
}

TEST_CASE("single skewed initial shock: K_111 = a1^3 kappa3") {
    EDModelSpec spec;
    spec.T = 2;
    spec.q = 1;
    spec.a = Eigen::VectorXd::Constant(1, 0.5);
    const FactorDist gamma(CenteredGamma{2.0, 1.5}); // kappa3 = 2 * 2 * 1.5^3 = 13.5
    spec.blocks.push_back(ShockBlock::singleton(gamma));
    for (int t = 0; t < 2; ++t)
        spec.blocks.push_back(ShockBlock::pair_independent(FactorDist(Gaussian{0.0}),
                                                           FactorDist(Gaussian{0.0})));
    const ThirdCumulantTensor K = implied_third_cumulants(spec);
    CHECK(K.K.at(0, 0, 0) == doctest::Approx(0.125 * 13.5).epsilon(1e-14));
    // y2 has no xi_0 loading under q=1
    CHECK(K.K.at(1, 1, 1) == 0.0);
}

TEST_CASE("tensor is symmetric under index permutations") {
    const ThirdCumulantTensor K = implied_third_cumulants(theorem1_mixture_spec(4, 0.5));
    for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s)
            for (int t = 0; t < 4; ++t) {
                CHECK(K.K.at(r, s, t) == K.K.at(t, s, r));
                CHECK(K.K.at(r, s, t) == K.K.at(s, r, t));
            }
}

TEST_CASE("empirical covariance basics") {
    SUBCASE("constant panel has zero covariance") {
        Panel panel;
        panel.y = Eigen::MatrixXd::Constant(50, 3, 2.5);
        CHECK(empirical_covariance(panel).C.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("small-n validation") {
        Panel panel;
        panel.y = Eigen::MatrixXd::Zero(1, 3);
        CHECK_THROWS_AS(empirical_covariance(panel), ValidationError);
        panel.y = Eigen::MatrixXd::Zero(2, 3);
        CHECK_THROWS_AS(empirical_third_cumulants(panel), ValidationError);
    }
    SUBCASE("row permutation leaves the statistics unchanged") {
        const EDModelSpec spec = theorem1_mixture_spec(4, 0.5);
        Panel panel = generate_panel(spec, 400, 15);
        const Eigen::MatrixXd cov = empirical_covariance(panel).C;
        const ThirdCumulantTensor k3 = empirical_third_cumulants(panel);

        Panel shuffled = panel;
        std::mt19937_64 rng(2);
        for (int i = panel.n() - 1; i > 0; --i) {
            const int k = static_cast<int>(rng() % (i + 1));
            shuffled.y.row(i).swap(shuffled.y.row(k));
        }
        CHECK((empirical_covariance(shuffled).C - cov).cwiseAbs().maxCoeff() < 1e-12);
        const ThirdCumulantTensor k3s = empirical_third_cumulants(shuffled);
        for (int r = 0; r < 4; ++r)
            for (int s = 0; s < 4; ++s)
                for (int t = 0; t < 4; ++t)
                    CHECK(std::abs(k3s.K.at(r, s, t) - k3.K.at(r, s, t)) < 1e-11);
    }
}

TEST_CASE("cross k-statistics match the polarization identity") {
    const EDModelSpec spec = theorem1_mixture_spec(4, 0.5);
    const Panel panel = generate_panel(spec, 700, 29);
    const ThirdCumulantTensor K = empirical_third_cumulants(panel);
    for (const auto& [r, s, t] :
         std::vector<std::array<int, 3>>{{0, 1, 2}, {0, 0, 3}, {1, 2, 3}, {2, 2, 2}}) {
        const double oracle =
            polarized_k_stat3(panel.y.col(r), panel.y.col(s), panel.y.col(t));
        CHECK(K.K.at(r, s, t) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("sampled moments converge to the implied ones") {
    const EDModelSpec spec = theorem1_mixture_spec(4, 0.5);
    const Panel panel = generate_panel(spec, 200000, 101);

    const Eigen::MatrixXd Cimp = implied_covariance(spec).C;
    const Eigen::MatrixXd Cemp = empirical_covariance(panel).C;
    CHECK((Cimp - Cemp).cwiseAbs().maxCoeff() < 0.1);

    const ThirdCumulantTensor Kimp = implied_third_cumulants(spec);
    const auto [k_est, k_se] = block_mean_se(panel.y, 25, [](const Eigen::MatrixXd& b) {
        Panel p;
        p.y = b;
        return empirical_third_cumulants(p).K.at(0, 1, 1);
    });
    CHECK(std::abs(k_est - Kimp.K.at(0, 1, 1)) <= 5.0 * k_se);
}

TEST_CASE("csv exports carry the documented flattening") {
    const EDModelSpec spec = gaussian_q1_spec(2, 0.5);
    std::ostringstream cov_os;
    write_covariance_csv(cov_os, implied_covariance(spec));
    std::istringstream cov_in(cov_os.str());
    std::string line;
    std::getline(cov_in, line);
    CHECK(line == "r,s,value");
    std::getline(cov_in, line);
    CHECK(line.rfind("1,1,", 0) == 0);

    std::ostringstream k_os;
    write_tensor_csv(k_os, implied_third_cumulants(spec));
    std::istringstream k_in(k_os.str());
    std::getline(k_in, line);
    CHECK(line == "r,s,t,value");
    int rows = 0;
    while (std::getline(k_in, line))
        ++rows;
    CHECK(rows == 8); // 2^3 entries, r-major then s then t
}
