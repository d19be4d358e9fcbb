#include "edid/cf_engine.hpp"

#include <cmath>

#include "edid/errors.hpp"

namespace edid {

namespace {
constexpr cplx kI{0.0, 1.0};

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}
} // namespace

CFQuery CFQuery::value_at(Eigen::VectorXd point) {
    return CFQuery{std::move(point), {}};
}

CFQuery CFQuery::partial_at(Eigen::VectorXd point, const std::vector<int>& index) {
    CFQuery q{std::move(point), {}};
    const int T = static_cast<int>(q.s.size());
    for (int ix : index) {
        if (ix < 0 || ix >= T)
            throw ContractError("CFQuery: partial index out of range");
        Eigen::VectorXd e = Eigen::VectorXd::Zero(T);
        e(ix) = 1.0;
        q.directions.push_back(std::move(e));
    }
    return q;
}

void CfEngine::check_query(const Eigen::VectorXd& s,
                           std::span<const Eigen::VectorXd> directions) const {
    if (s.size() != horizon())
        throw ContractError("cf query: point dimension does not match horizon");
    if (directions.size() > 3)
        throw ContractError("cf query: derivative order above 3 unsupported");
    for (const auto& d : directions) {
        if (d.size() != horizon())
            throw ContractError("cf query: direction dimension does not match horizon");
        if (d.cwiseAbs().maxCoeff() == 0.0)
            throw ContractError("cf query: zero direction");
    }
}

CFValue CfEngine::evaluate(const CFQuery& query) const {
    return derivative(query.s, query.directions);
}

CFValue CfEngine::log_cf(const Eigen::VectorXd& s) const {
    return derivative(s, {});
}

CFValue CfEngine::partial(const Eigen::VectorXd& s, const std::vector<int>& index) const {
    const CFQuery q = CFQuery::partial_at(s, index);
    return derivative(q.s, q.directions);
}

std::vector<CFValue> CfEngine::derivative_ray(
    const Eigen::VectorXd& base, std::span<const double> u,
    std::span<const Eigen::VectorXd> directions) const {
    std::vector<CFValue> out;
    out.reserve(u.size());
    for (double ui : u)
        out.push_back(derivative(ui * base, directions));
    return out;
}

AnalyticCfEngine::AnalyticCfEngine(const EDModelSpec& spec) : T_(spec.T) {
    spec.validate();
    const LoadingMatrix lm = build_loading_matrix(spec);

    int n_factors = 0;
    for (const auto& b : spec.blocks)
        n_factors += b.n_factors();
    B_.resize(T_, n_factors);
    factors_.reserve(n_factors);

    int col = 0;
    for (int k = 0; k < spec.q; ++k) {
        const ShockBlock& b = spec.initial_xi_block(k);
        const int theta_col = theta_index_xi(spec, 1 - spec.q + k);
        B_.col(col) = lm.A.col(theta_col) * b.loadings()(0, 0);
        factors_.push_back(b.factors()[0]);
        ++col;
    }
    for (int t = 1; t <= spec.T; ++t) {
        const ShockBlock& b = spec.pair_block(t);
        const Eigen::VectorXd eta_col = lm.A.col(theta_index_eta(spec, t));
        const Eigen::VectorXd xi_col = lm.A.col(theta_index_xi(spec, t));
        for (int k = 0; k < b.n_factors(); ++k) {
            B_.col(col) = eta_col * b.loadings()(0, k) + xi_col * b.loadings()(1, k);
            factors_.push_back(b.factors()[k]);
            ++col;
        }
    }
}

CFValue AnalyticCfEngine::derivative(const Eigen::VectorXd& s,
                                     std::span<const Eigen::VectorXd> directions) const {
    check_query(s, directions);
    const int order = static_cast<int>(directions.size());

    cplx value = 0.0;
    double log_modulus = 0.0;
    for (size_t k = 0; k < factors_.size(); ++k) {
        const double z = B_.col(k).dot(s);
        const LogCfDerivs d = factors_[k].log_cf_derivs(z);
        log_modulus += d.d0.real();
        switch (order) {
            case 0:
                value += d.d0;
                break;
            case 1:
                value += d.d1 * B_.col(k).dot(directions[0]);
                break;
            case 2:
                value += d.d2 * B_.col(k).dot(directions[0]) * B_.col(k).dot(directions[1]);
                break;
            default:
                value += d.d3 * B_.col(k).dot(directions[0]) * B_.col(k).dot(directions[1])
                       * B_.col(k).dot(directions[2]);
                break;
        }
    }
    return CFValue{value, order, CfBackend::Analytic, std::exp(log_modulus)};
}

EmpiricalCfEngine::EmpiricalCfEngine(const Panel& panel, double epsilon_cf)
    : data_(panel.y), epsilon_cf_(epsilon_cf) {
    if (data_.rows() < 1)
        throw ValidationError("empirical cf engine: panel must have at least one row");
    if (!(epsilon_cf_ >= 0.0))
        throw ValidationError("empirical cf engine: epsilon_cf must be >= 0");
}

CFValue EmpiricalCfEngine::assemble(int order, double n, cplx g, cplx ga, cplx gb,
                                    cplx gc, cplx gab, cplx gac, cplx gbc, cplx gabc,
                                    bool throw_on_bad, const Eigen::VectorXd& s) const {
    g /= n; ga /= n; gb /= n; gc /= n; gab /= n; gac /= n; gbc /= n; gabc /= n;
    const double modulus = std::abs(g);
    CFValue out;
    out.order = order;
    out.backend = CfBackend::Empirical;
    out.reliability = modulus;
    if (modulus <= epsilon_cf_) {
        if (throw_on_bad)
            throw IllConditionedPointError(to_std(s), modulus, epsilon_cf_);
        out.value = cplx{std::nan(""), std::nan("")};
        return out;
    }
    switch (order) {
        case 0: out.value = std::log(g); break;
        case 1: out.value = log_deriv1_from_raw(g, ga); break;
        case 2: out.value = log_deriv2_from_raw(g, ga, gb, gab); break;
        default: out.value = log_deriv3_from_raw(g, ga, gb, gc, gab, gac, gbc, gabc); break;
    }
    return out;
}

CFValue EmpiricalCfEngine::derivative(const Eigen::VectorXd& s,
                                      std::span<const Eigen::VectorXd> directions) const {
    check_query(s, directions);
    const int order = static_cast<int>(directions.size());
    const int n = static_cast<int>(data_.rows());

    const Eigen::ArrayXd phase = (data_ * s).array();
    const Eigen::ArrayXd cosp = phase.cos();
    const Eigen::ArrayXd sinp = phase.sin();
    auto mean_weighted = [&](const Eigen::ArrayXd& wgt) -> cplx {
        return cplx{(wgt * cosp).sum(), (wgt * sinp).sum()};
    };
    const cplx g{cosp.sum(), sinp.sum()};

    // raw derivative in direction set S: i^|S| * mean(prod_k (d_k.y) e^{i s.y})
    cplx ga = 0, gb = 0, gc = 0, gab = 0, gac = 0, gbc = 0, gabc = 0;
    Eigen::ArrayXd pa, pb, pc;
    if (order >= 1) {
        pa = (data_ * directions[0]).array();
        ga = kI * mean_weighted(pa);
    }
    if (order >= 2) {
        pb = (data_ * directions[1]).array();
        gb = kI * mean_weighted(pb);
        gab = -mean_weighted(pa * pb);
    }
    if (order >= 3) {
        pc = (data_ * directions[2]).array();
        gc = kI * mean_weighted(pc);
        gac = -mean_weighted(pa * pc);
        gbc = -mean_weighted(pb * pc);
        gabc = -kI * mean_weighted(pa * pb * pc);
    }
    return assemble(order, static_cast<double>(n), g, ga, gb, gc, gab, gac, gbc, gabc,
                    /*throw_on_bad=*/true, s);
}

std::vector<CFValue> EmpiricalCfEngine::derivative_ray(
    const Eigen::VectorXd& base, std::span<const double> u,
    std::span<const Eigen::VectorXd> directions) const {
    check_query(base, directions);
    const int order = static_cast<int>(directions.size());
    const int n = static_cast<int>(data_.rows());

    const Eigen::ArrayXd proj = (data_ * base).array();
    Eigen::ArrayXd pa, pb, pc, wab, wac, wbc, wabc;
    if (order >= 1) pa = (data_ * directions[0]).array();
    if (order >= 2) {
        pb = (data_ * directions[1]).array();
        wab = pa * pb;
    }
    if (order >= 3) {
        pc = (data_ * directions[2]).array();
        wac = pa * pc;
        wbc = pb * pc;
        wabc = wab * pc;
    }

    std::vector<CFValue> out;
    out.reserve(u.size());
    for (double ui : u) {
        const Eigen::ArrayXd phase = ui * proj;
        const Eigen::ArrayXd cosp = phase.cos();
        const Eigen::ArrayXd sinp = phase.sin();
        auto mean_weighted = [&](const Eigen::ArrayXd& wgt) -> cplx {
            return cplx{(wgt * cosp).sum(), (wgt * sinp).sum()};
        };
        const cplx g{cosp.sum(), sinp.sum()};
        cplx ga = 0, gb = 0, gc = 0, gab = 0, gac = 0, gbc = 0, gabc = 0;
        if (order >= 1) ga = kI * mean_weighted(pa);
        if (order >= 2) {
            gb = kI * mean_weighted(pb);
            gab = -mean_weighted(wab);
        }
        if (order >= 3) {
            gc = kI * mean_weighted(pc);
            gac = -mean_weighted(wac);
            gbc = -mean_weighted(wbc);
            gabc = -kI * mean_weighted(wabc);
        }
        out.push_back(assemble(order, static_cast<double>(n), g, ga, gb, gc, gab, gac,
                               gbc, gabc, /*throw_on_bad=*/false, ui * base));
    }
    return out;
}

double EmpiricalCfEngine::reliability_floor() const {
    return std::max(epsilon_cf_, 10.0 / std::sqrt(static_cast<double>(data_.rows())));
}

std::vector<std::shared_ptr<const CfEngine>> EmpiricalCfEngine::sampling_blocks(
    int count) const {
    const Eigen::Index n = data_.rows();
    if (count < 2 || n < 4 * count)
        return {};
    std::vector<std::shared_ptr<const CfEngine>> out;
    const Eigen::Index per = n / count;
    for (int b = 0; b < count; ++b) {
        Panel slice;
        slice.y = data_.middleRows(b * per, per);
        out.push_back(std::make_shared<EmpiricalCfEngine>(slice, epsilon_cf_));
    }
    return out;
}

std::vector<std::pair<double, double>> EmpiricalCfEngine::modulus_along_ray(
    const Eigen::VectorXd& base, std::span<const double> u) const {
    if (base.size() != horizon())
        throw ContractError("modulus_along_ray: base dimension does not match horizon");
    const double n = static_cast<double>(data_.rows());
    const Eigen::ArrayXd proj = (data_ * base).array();
    std::vector<std::pair<double, double>> out;
    out.reserve(u.size());
    for (double ui : u) {
        const Eigen::ArrayXd phase = ui * proj;
        const cplx g{phase.cos().sum() / n, phase.sin().sum() / n};
        out.emplace_back(ui, std::abs(g));
    }
    return out;
}

} // namespace edid
