#include "edid/model.hpp"

#include <cmath>
#include <sstream>

#include "edid/errors.hpp"

namespace edid {

ShockBlock::ShockBlock(Kind kind, std::vector<FactorDist> factors, Eigen::MatrixXd loadings)
    : kind_(kind), factors_(std::move(factors)), loadings_(std::move(loadings)) {}

ShockBlock ShockBlock::singleton(FactorDist xi) {
    Eigen::MatrixXd L(1, 1);
    L(0, 0) = 1.0;
    return ShockBlock(Kind::SingletonTransitory, {std::move(xi)}, std::move(L));
}

ShockBlock ShockBlock::pair_independent(FactorDist eta, FactorDist xi) {
    Eigen::MatrixXd L = Eigen::Matrix2d::Identity();
    return ShockBlock(Kind::ContemporaneousPair, {std::move(eta), std::move(xi)},
                      std::move(L));
}

ShockBlock ShockBlock::pair_from_factors(FactorDist f1, FactorDist f2,
                                         const Eigen::Matrix2d& loadings) {
    if (!loadings.allFinite())
        throw ValidationError("pair block: loadings must be finite");
    return ShockBlock(Kind::ContemporaneousPair, {std::move(f1), std::move(f2)},
                      Eigen::MatrixXd(loadings));
}

Eigen::MatrixXd ShockBlock::second_moment() const {
    Eigen::VectorXd fvar(n_factors());
    for (int k = 0; k < n_factors(); ++k)
        fvar(k) = factors_[k].variance();
    return loadings_ * fvar.asDiagonal() * loadings_.transpose();
}

double ShockBlock::third_cumulant(int p, int q, int r) const {
    double out = 0.0;
    for (int k = 0; k < n_factors(); ++k)
        out += loadings_(p, k) * loadings_(q, k) * loadings_(r, k)
             * factors_[k].third_cumulant();
    return out;
}

bool ShockBlock::is_gaussian() const {
    for (int k = 0; k < n_factors(); ++k) {
        if (factors_[k].is_gaussian() || factors_[k].is_degenerate())
            continue;
        if (loadings_.col(k).cwiseAbs().maxCoeff() == 0.0)
            continue; // unloaded factor does not enter the block
        return false;
    }
    return true;
}

bool ShockBlock::components_independent() const {
    if (dim() == 1)
        return true;
    if (is_gaussian()) {
        // jointly normal: independence <=> zero covariance
        return std::abs(second_moment()(0, 1)) < 1e-12;
    }
    for (int k = 0; k < n_factors(); ++k) {
        if (factors_[k].is_degenerate())
            continue;
        if (loadings_(0, k) != 0.0 && loadings_(1, k) != 0.0)
            return false; // shared factor
    }
    return true;
}

bool ShockBlock::nondegenerate() const {
    const Eigen::MatrixXd m = second_moment();
    if (dim() == 1)
        return m(0, 0) > 0.0;
    return m(0, 0) > 0.0 && m.determinant() > 0.0;
}

cplx ShockBlock::log_cf_partial(const Eigen::VectorXd& x, const std::vector<int>& index) const {
    if (x.size() != dim())
        throw ContractError("ShockBlock::log_cf_partial: argument dimension mismatch");
    if (index.size() > 3)
        throw ContractError("ShockBlock::log_cf_partial: order above 3 unsupported");
    for (int ix : index)
        if (ix < 0 || ix >= dim())
            throw ContractError("ShockBlock::log_cf_partial: component index out of range");

    // psi(x) = sum_k psi_k((L^T x)_k); derivatives multiply by column entries
    cplx out = 0.0;
    const int order = static_cast<int>(index.size());
    for (int k = 0; k < n_factors(); ++k) {
        const double z = loadings_.col(k).dot(x);
        const LogCfDerivs d = factors_[k].log_cf_derivs(z);
        double w = 1.0;
        for (int ix : index)
            w *= loadings_(ix, k);
        switch (order) {
            case 0: out += d.d0; break;
            case 1: out += w * d.d1; break;
            case 2: out += w * d.d2; break;
            default: out += w * d.d3; break;
        }
    }
    return out;
}

double EDModelSpec::coeff(int k) const {
    if (k == 0) return 1.0;
    if (k < 0 || k > q) return 0.0;
    return a(k - 1);
}

void EDModelSpec::validate() const {
    if (T < 1)
        throw ValidationError("model: T must be >= 1");
    if (q < 0 || q >= T)
        throw ValidationError("model: q must satisfy 0 <= q < T");
    if (a.size() != q)
        throw ValidationError("model: coefficient vector a must have length q");
    if (!a.allFinite())
        throw ValidationError("model: coefficients must be finite");
    if (static_cast<int>(blocks.size()) != q + T) {
        std::ostringstream os;
        os << "model: expected " << q + T << " shock blocks (q singletons + T pairs), got "
           << blocks.size();
        throw ValidationError(os.str());
    }
    for (int k = 0; k < q; ++k)
        if (blocks[k].kind() != ShockBlock::Kind::SingletonTransitory)
            throw ValidationError("model: first q blocks must be singleton transitory shocks");
    for (int t = 1; t <= T; ++t)
        if (pair_block(t).kind() != ShockBlock::Kind::ContemporaneousPair)
            throw ValidationError("model: blocks after the first q must be contemporaneous pairs");
}

int theta_index_xi(const EDModelSpec& spec, int time) {
    if (time < 1 - spec.q || time > spec.T)
        throw ContractError("theta_index_xi: time out of range");
    if (time <= 0)
        return time - (1 - spec.q); // 0 .. q-1
    return spec.q + 2 * (time - 1) + 1;
}

int theta_index_eta(const EDModelSpec& spec, int time) {
    if (time < 1 || time > spec.T)
        throw ContractError("theta_index_eta: time out of range");
    return spec.q + 2 * (time - 1);
}

LoadingMatrix build_loading_matrix(const EDModelSpec& spec) {
    spec.validate();
    LoadingMatrix lm;
    lm.A = Eigen::MatrixXd::Zero(spec.T, spec.n_shocks());
    lm.labels.resize(spec.n_shocks());
    for (int tau = 1 - spec.q; tau <= spec.T; ++tau) {
        const int col = theta_index_xi(spec, tau);
        lm.labels[col] = {ShockLabel::Kind::Xi, tau};
        for (int t = 1; t <= spec.T; ++t) {
            const int lag = t - tau;
            if (lag >= 0 && lag <= spec.q)
                lm.A(t - 1, col) = spec.coeff(lag);
        }
    }
    for (int tau = 1; tau <= spec.T; ++tau) {
        const int col = theta_index_eta(spec, tau);
        lm.labels[col] = {ShockLabel::Kind::Eta, tau};
        for (int t = tau; t <= spec.T; ++t)
            lm.A(t - 1, col) = 1.0;
    }
    return lm;
}

bool PreconditionReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass && !c.warning_only)
            return false;
    return true;
}

std::vector<std::string> PreconditionReport::warnings() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.pass && c.warning_only)
            out.push_back(c.name + ": " + c.detail);
    return out;
}

namespace {

bool near(double x, double v) { return std::abs(x - v) < 1e-12; }

PreconditionCheck check(std::string name, bool pass, std::string detail,
                        bool warning_only = false) {
    return PreconditionCheck{std::move(name), pass, warning_only, std::move(detail)};
}

std::string fmt_val(const char* what, double v) {
    std::ostringstream os;
    os << what << " = " << v;
    return os.str();
}

// xi marginal of the first pair is nongaussian iff some loaded, nondegenerate
// factor is nongaussian (sum of independents is normal iff all parts are).
bool xi1_nongaussian(const EDModelSpec& spec) {
    const ShockBlock& b = spec.pair_block(1);
    for (int k = 0; k < b.n_factors(); ++k) {
        if (b.loadings()(1, k) == 0.0) continue;
        if (b.factors()[k].is_degenerate()) continue;
        if (!b.factors()[k].is_gaussian()) return true;
    }
    return false;
}

} // namespace

PreconditionReport validate_identification_preconditions(const EDModelSpec& spec,
                                                          Theorem theorem) {
    spec.validate();
    PreconditionReport report;
    report.theorem = theorem;
    auto& cs = report.checks;

    switch (theorem) {
        case Theorem::T1: {
            cs.push_back(check("horizon", spec.q + 3 <= spec.T,
                               "requires q+3 <= T"));
            if (spec.q >= 1) {
                const double a1 = spec.a(0), aq = spec.a(spec.q - 1);
                cs.push_back(check("a1 exclusion", !near(a1, 0.0) && !near(a1, 1.0),
                                   fmt_val("a1", a1)));
                cs.push_back(check("aq exclusion", !near(aq, 0.0) && !near(aq, 1.0),
                                   fmt_val("aq", aq)));
                for (int j = 2; j < spec.q; ++j) {
                    const double aj = spec.a(j - 1);
                    if (near(aj, 0.0) || near(aj, 1.0))
                        cs.push_back(check("interior coefficient", false,
                                           fmt_val("a_j at boundary value, behavior "
                                                   "not covered by the exclusion list; a_j",
                                                   aj),
                                           /*warning_only=*/true));
                }
            } else {
                cs.push_back(check("MA order", false, "q must be >= 1"));
            }
            cs.push_back(check("xi1 nongaussian", xi1_nongaussian(spec),
                               "first transitory shock must be nongaussian"));
            break;
        }
        case Theorem::T2: {
            cs.push_back(check("MA order", spec.q == 1, "requires q = 1"));
            if (spec.q == 1)
                cs.push_back(check("a1 nonzero", !near(spec.a(0), 0.0),
                                   fmt_val("a1", spec.a(0))));
            bool all_gaussian = true, all_pd = true;
            for (const auto& b : spec.blocks) {
                all_gaussian = all_gaussian && b.is_gaussian();
                all_pd = all_pd && b.nondegenerate();
            }
            cs.push_back(check("jointly normal shocks", all_gaussian,
                               "all blocks must be Gaussian"));
            cs.push_back(check("positive definite shocks", all_pd,
                               "all block second-moment matrices must be positive definite"));
            break;
        }
        case Theorem::L1: {
            cs.push_back(check("horizon", spec.q + 1 <= spec.T,
                               "requires q+1 <= T"));
            if (spec.q >= 1) {
                cs.push_back(check("aq nonzero", !near(spec.a(spec.q - 1), 0.0),
                                   fmt_val("aq", spec.a(spec.q - 1))));
            } else {
                cs.push_back(check("MA order", false, "q must be >= 1"));
            }
            cs.push_back(check("eta1, xi1 independent",
                               spec.pair_block(1).components_independent(),
                               "first contemporaneous pair must be independent"));
            cs.push_back(check("xi1 nongaussian", xi1_nongaussian(spec),
                               "first transitory shock must be nongaussian"));
            break;
        }
    }
    return report;
}

} // namespace edid
