#include "edid/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "edid/errors.hpp"

namespace edid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kBig = 1e300;

Eigen::VectorXd basis(int T, int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(T);
    e(i) = 1.0;
    return e;
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// a point is usable when it is finite and, for sampling backends, its cf
// modulus clears the engine's reliability floor
bool usable(const CFValue& v, double floor) {
    return finite(v.value) && (floor <= 0.0 || v.reliability > floor);
}

double variance_of(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double out = 0.0;
    for (double x : v) out += (x - mean) * (x - mean);
    return out / n;
}

// Minimize a unimodal-ish objective by golden section; f may return kBig for
// invalid candidates.
double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                       double tol, double* out_val) {
    static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > tol; ++it) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    const double xm = 0.5 * (a + b);
    const double fm = f(xm);
    double best_x = xm, best_f = fm;
    if (f1 < best_f) { best_x = x1; best_f = f1; }
    if (f2 < best_f) { best_x = x2; best_f = f2; }
    if (out_val) *out_val = best_f;
    return best_x;
}

// Noise scale of a scanned curve from second differences; ~sigma for an iid
// noise surface, ~range/K^2 for a smooth one.
double curve_noise_scale(const std::vector<double>& valid_in_scan_order) {
    std::vector<double> d2;
    for (size_t k = 2; k < valid_in_scan_order.size(); ++k)
        d2.push_back(std::abs(valid_in_scan_order[k] - 2.0 * valid_in_scan_order[k - 1]
                              + valid_in_scan_order[k - 2]));
    if (d2.empty())
        return 0.0;
    std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
    return d2[d2.size() / 2] / 1.65;
}

struct FlatnessVerdict {
    bool flat = false;
    double floor = 0.0;
    double range = 0.0;
};

// The numerical floor is the larger of the configured absolute floor and a
// noise-scale estimate: the criterion's sampling standard error at probe
// candidates when row-block engines are available (empirical backend), the
// curve's second-difference scale otherwise. Flat means range < 10 x floor.
FlatnessVerdict assess_flatness(const std::vector<double>& valid_values,
                                double abs_floor,
                                const std::vector<double>& noise_levels) {
    FlatnessVerdict v;
    if (valid_values.empty())
        return v;
    const auto [mn, mx] = std::minmax_element(valid_values.begin(), valid_values.end());
    v.range = *mx - *mn;
    v.floor = std::max(abs_floor, curve_noise_scale(valid_values));
    for (double nl : noise_levels)
        if (std::isfinite(nl))
            v.floor = std::max(v.floor, nl);
    v.flat = v.range < 10.0 * v.floor;
    return v;
}

// indices of the argmin, median-value, and argmax candidates of a scan
std::vector<size_t> probe_indices(const std::vector<double>& values) {
    std::vector<size_t> valid;
    for (size_t k = 0; k < values.size(); ++k)
        if (!std::isnan(values[k]))
            valid.push_back(k);
    if (valid.empty())
        return {};
    std::sort(valid.begin(), valid.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    return {valid.front(), valid[valid.size() / 2], valid.back()};
}

// expected pure-noise level of a sum of squares: sum over u of the sampling
// variance of the per-u statistic, estimated from row blocks
double noise_sum_sq(const std::vector<std::vector<double>>& per_block_curves) {
    const size_t B = per_block_curves.size();
    if (B < 3)
        return std::numeric_limits<double>::quiet_NaN();
    const size_t K = per_block_curves[0].size();
    double noise = 0.0;
    int used = 0;
    for (size_t i = 0; i < K; ++i) {
        double mean = 0.0;
        int cnt = 0;
        for (size_t b = 0; b < B; ++b) {
            const double v = per_block_curves[b][i];
            if (std::isnan(v))
                continue;
            mean += v;
            ++cnt;
        }
        if (cnt < 3)
            continue;
        mean /= cnt;
        double ss = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double v = per_block_curves[b][i];
            if (!std::isnan(v))
                ss += (v - mean) * (v - mean);
        }
        noise += ss / (cnt - 1.0) / cnt; // block-level var / B = SE^2 of the full mean
        ++used;
    }
    return used > 0 ? noise * static_cast<double>(K) / used : 0.0;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = lo + (hi - lo) * (n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
    return out;
}

// max |f(-u) + s * conj(f(u))| over matched pairs; s = +1 for odd-order
// derivatives, -1 for even order (conjugate symmetry of log cf).
double conjugate_symmetry_residual(const std::vector<double>& u,
                                   const std::vector<cplx>& f, double sign) {
    double res = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        if (!finite(f[i])) continue;
        for (size_t k = 0; k < u.size(); ++k) {
            if (!finite(f[k])) continue;
            if (std::abs(u[i] + u[k]) < 1e-12)
                res = std::max(res, std::abs(f[k] + sign * std::conj(f[i])));
        }
    }
    return res;
}

} // namespace

void GaussianParamsQ1::validate() const {
    const int T = horizon();
    if (T < 2)
        throw ValidationError("GaussianParamsQ1: horizon must be >= 2");
    if (static_cast<int>(var_xi.size()) != T || static_cast<int>(cov_eta_xi.size()) != T)
        throw ValidationError("GaussianParamsQ1: per-period vectors must share one length");
    auto fin = [](double x) { return std::isfinite(x); };
    if (!fin(a1) || !fin(var_xi0))
        throw ValidationError("GaussianParamsQ1: parameters must be finite");
    for (int t = 0; t < T; ++t)
        if (!fin(var_eta[t]) || !fin(var_xi[t]) || !fin(cov_eta_xi[t]))
            throw ValidationError("GaussianParamsQ1: parameters must be finite");
}

Eigen::VectorXd GaussianParamsQ1::pack() const {
    const int T = horizon();
    Eigen::VectorXd x(1 + 3 * T);
    x(0) = var_xi0;
    for (int t = 0; t < T; ++t) {
        x(1 + 3 * t) = var_eta[t];
        x(2 + 3 * t) = cov_eta_xi[t];
        x(3 + 3 * t) = var_xi[t];
    }
    return x;
}

GaussianParamsQ1 GaussianParamsQ1::unpack(double a1, const Eigen::VectorXd& x) {
    if ((x.size() - 1) % 3 != 0)
        throw ContractError("GaussianParamsQ1::unpack: bad length");
    const int T = static_cast<int>((x.size() - 1) / 3);
    GaussianParamsQ1 p;
    p.a1 = a1;
    p.var_xi0 = x(0);
    p.var_eta.resize(T);
    p.cov_eta_xi.resize(T);
    p.var_xi.resize(T);
    for (int t = 0; t < T; ++t) {
        p.var_eta[t] = x(1 + 3 * t);
        p.cov_eta_xi[t] = x(2 + 3 * t);
        p.var_xi[t] = x(3 + 3 * t);
    }
    return p;
}

GaussianParamsQ1 GaussianParamsQ1::from_spec(const EDModelSpec& spec) {
    spec.validate();
    if (spec.q != 1)
        throw ValidationError("GaussianParamsQ1::from_spec: requires q = 1");
    for (const auto& b : spec.blocks)
        if (!b.is_gaussian())
            throw ValidationError("GaussianParamsQ1::from_spec: all shocks must be Gaussian");
    GaussianParamsQ1 p;
    p.a1 = spec.a(0);
    p.var_xi0 = spec.initial_xi_block(0).second_moment()(0, 0);
    p.var_eta.resize(spec.T);
    p.var_xi.resize(spec.T);
    p.cov_eta_xi.resize(spec.T);
    for (int t = 1; t <= spec.T; ++t) {
        const Eigen::MatrixXd m = spec.pair_block(t).second_moment();
        p.var_eta[t - 1] = m(0, 0);
        p.cov_eta_xi[t - 1] = m(0, 1);
        p.var_xi[t - 1] = m(1, 1);
    }
    return p;
}

EDModelSpec GaussianParamsQ1::to_spec() const {
    validate();
    if (var_xi0 < -1e-12)
        throw ValidationError("GaussianParamsQ1::to_spec: var_xi0 negative");
    EDModelSpec spec;
    spec.T = horizon();
    spec.q = 1;
    spec.a = Eigen::VectorXd::Constant(1, a1);
    spec.blocks.push_back(ShockBlock::singleton(FactorDist(Gaussian{std::max(0.0, var_xi0)})));
    for (int t = 0; t < horizon(); ++t) {
        Eigen::Matrix2d m;
        m << var_eta[t], cov_eta_xi[t], cov_eta_xi[t], var_xi[t];
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
        Eigen::Vector2d ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-12)
            throw ValidationError(
                "GaussianParamsQ1::to_spec: pair second-moment matrix not PSD");
        ev = ev.cwiseMax(0.0);
        const Eigen::Matrix2d L = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
        spec.blocks.push_back(ShockBlock::pair_from_factors(
            FactorDist(Gaussian{1.0}), FactorDist(Gaussian{1.0}), L));
    }
    spec.validate();
    return spec;
}

namespace {

Eigen::MatrixXd loading_q1(double a1, int T) {
    EDModelSpec s;
    s.T = T;
    s.q = 1;
    s.a = Eigen::VectorXd::Constant(1, a1);
    s.blocks.push_back(ShockBlock::singleton(FactorDist(Gaussian{1.0})));
    for (int t = 0; t < T; ++t)
        s.blocks.push_back(ShockBlock::pair_independent(FactorDist(Gaussian{1.0}),
                                                        FactorDist(Gaussian{1.0})));
    return build_loading_matrix(s).A;
}

Eigen::MatrixXd sigma_from_packed(const Eigen::VectorXd& x, int T) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(1 + 2 * T, 1 + 2 * T);
    sigma(0, 0) = x(0);
    for (int t = 0; t < T; ++t) {
        const int e = 1 + 2 * t, xi = 2 + 2 * t;
        sigma(e, e) = x(1 + 3 * t);
        sigma(e, xi) = sigma(xi, e) = x(2 + 3 * t);
        sigma(xi, xi) = x(3 + 3 * t);
    }
    return sigma;
}

Eigen::VectorXd vech(const Eigen::MatrixXd& C) {
    const int T = static_cast<int>(C.rows());
    Eigen::VectorXd out(T * (T + 1) / 2);
    int k = 0;
    for (int r = 0; r < T; ++r)
        for (int c = r; c < T; ++c)
            out(k++) = C(r, c);
    return out;
}

} // namespace

CovarianceStructure GaussianParamsQ1::implied_covariance() const {
    validate();
    const int T = horizon();
    return CovarianceStructure{
        covariance_from_loadings(loading_q1(a1, T), sigma_from_packed(pack(), T))};
}

EquivalenceResult theorem2_equivalent_model(const GaussianParamsQ1& truth,
                                            double candidate_a1, int T) {
    truth.validate();
    if (T != truth.horizon())
        throw ValidationError("theorem2_equivalent_model: T does not match truth");
    if (std::abs(candidate_a1) < 1e-12)
        throw ValidationError("theorem2_equivalent_model: candidate a1 must be nonzero");

    const int P = 1 + 3 * T;
    const Eigen::MatrixXd A_tilde = loading_q1(candidate_a1, T);

    // columns of the linear map x -> vech(A Sigma(x) A^T)
    Eigen::MatrixXd F(T * (T + 1) / 2, P);
    for (int k = 0; k < P; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(P);
        e(k) = 1.0;
        F.col(k) = vech(covariance_from_loadings(A_tilde, sigma_from_packed(e, T)));
    }

    const Eigen::VectorXd x_truth = truth.pack();
    const Eigen::VectorXd c = vech(truth.implied_covariance().C);
    const Eigen::VectorXd resid = c - F * x_truth;
    const Eigen::VectorXd delta =
        F.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(resid);

    EquivalenceResult out;
    out.tilde = GaussianParamsQ1::unpack(candidate_a1, x_truth + delta);

    const Eigen::MatrixXd C_truth = truth.implied_covariance().C;
    const Eigen::MatrixXd C_tilde = out.tilde.implied_covariance().C;
    out.residual = (C_tilde - C_truth).cwiseAbs().maxCoeff();

    out.pd_ok = true;
    out.first_non_pd_block = -1;
    if (!(out.tilde.var_xi0 > 0.0)) {
        out.pd_ok = false;
        out.first_non_pd_block = 0;
    }
    for (int t = 1; t <= T && out.pd_ok; ++t) {
        const double ve = out.tilde.var_eta[t - 1];
        const double vx = out.tilde.var_xi[t - 1];
        const double cv = out.tilde.cov_eta_xi[t - 1];
        if (!(ve > 0.0 && ve * vx - cv * cv > 0.0)) {
            out.pd_ok = false;
            out.first_non_pd_block = t;
        }
    }
    return out;
}

std::vector<double> make_u_grid(double u_max, int points) {
    if (!(u_max > 0.0) || points < 2)
        throw ValidationError("make_u_grid: need u_max > 0 and points >= 2");
    std::vector<double> out;
    for (double u : linspace(-u_max, u_max, points))
        if (std::abs(u) > 1e-12)
            out.push_back(u);
    return out;
}

namespace {

Eigen::VectorXd lemma1_base_point(double c, int j, int q, int T) {
    Eigen::VectorXd base = Eigen::VectorXd::Zero(T);
    base(0) = c;
    base(j) += -1.0;
    base(q + 1) += 1.0 - c;
    return base;
}

void lemma1_check_args(int j, int q, int T) {
    if (q < 1 || j < 1 || j > q)
        throw ValidationError("lemma1: coefficient index j must satisfy 1 <= j <= q");
    if (T < q + 2)
        throw ValidationError(
            "lemma1: the moment's evaluation point needs T >= q+2 (entry at position q+2)");
}

} // namespace

double lemma1_moment(const CfEngine& engine, double a_candidate_j, int j, double u,
                     int q, int T) {
    lemma1_check_args(j, q, T);
    if (engine.horizon() != T)
        throw ValidationError("lemma1_moment: engine horizon does not match T");

    const std::vector<int> index{0, q};
    const cplx at_zero = engine.partial(Eigen::VectorXd::Zero(T), index).value;
    const cplx at_point =
        engine.partial(u * lemma1_base_point(a_candidate_j, j, q, T), index).value;
    // Cov(y_1, y_{q+1}) = -(mixed partial at 0)
    return (at_point - at_zero).real();
}

EstimateResult lemma1_estimate(const CfEngine& engine, int q, int T,
                               const std::vector<double>& u_grid,
                               std::pair<double, double> search_interval,
                               const EstimateOptions& options) {
    lemma1_check_args(1, q, T);
    if (engine.horizon() != T)
        throw ValidationError("lemma1_estimate: engine horizon does not match T");
    if (u_grid.empty())
        throw ValidationError("lemma1_estimate: u_grid must not be empty");
    for (double u : u_grid)
        if (std::abs(u) < 1e-12)
            throw ValidationError("lemma1_estimate: u_grid must exclude 0");
    if (!(search_interval.first < search_interval.second))
        throw ValidationError("lemma1_estimate: empty search interval");
    if (options.scan_points < 4 || options.scan_points > options.max_scan_evals)
        throw ValidationError("lemma1_estimate: bad scan_points");

    const std::vector<Eigen::VectorXd> dirs{basis(T, 0), basis(T, q)};
    const cplx at_zero =
        engine.derivative(Eigen::VectorXd::Zero(T), std::span(dirs)).value;
    const double rel_floor = engine.reliability_floor();

    EstimateResult result;
    result.a_hat.assign(q, kNaN);
    bool any_unidentified = false;
    double worst_floor = 0.0, min_range = std::numeric_limits<double>::infinity();

    const std::vector<double> scan =
        linspace(search_interval.first, search_interval.second, options.scan_points);

    for (int j = 1; j <= q; ++j) {
        // criterion(c) = sum over valid u of Re(moment)^2; NaN if too few points
        auto criterion_at = [&](double c) -> double {
            const std::vector<CFValue> vals = engine.derivative_ray(
                lemma1_base_point(c, j, q, T), u_grid, std::span(dirs));
            double crit = 0.0;
            int n_valid = 0;
            std::vector<cplx> curve(vals.size());
            for (size_t i = 0; i < vals.size(); ++i) {
                curve[i] = vals[i].value - at_zero;
                if (!usable(vals[i], rel_floor))
                    continue;
                const double m = (vals[i].value - at_zero).real();
                crit += m * m;
                ++n_valid;
            }
            result.diagnostics.symmetry_residual =
                std::max(result.diagnostics.symmetry_residual,
                         conjugate_symmetry_residual(u_grid, curve, -1.0));
            if (n_valid < std::max<int>(3, static_cast<int>(u_grid.size()) / 2))
                return kNaN;
            return crit;
        };

        std::vector<double> curve(scan.size(), kNaN), valid_values;
        int best_k = -1;
        for (size_t k = 0; k < scan.size(); ++k) {
            curve[k] = criterion_at(scan[k]);
            if (std::isnan(curve[k])) {
                ++result.diagnostics.dropped_candidates;
                continue;
            }
            valid_values.push_back(curve[k]);
            if (best_k < 0 || curve[k] < curve[best_k])
                best_k = static_cast<int>(k);
        }
        for (size_t k = 0; k < scan.size(); ++k) {
            std::vector<double> cand(q, kNaN);
            cand[j - 1] = scan[k];
            result.candidates.push_back(std::move(cand));
            result.criterion.push_back(curve[k]);
        }
        if (best_k < 0) {
            std::ostringstream os;
            os << "lemma1: no well-conditioned candidates for j = " << j;
            result.diagnostics.warnings.push_back(os.str());
            any_unidentified = true;
            continue;
        }

        // sampling-noise floor from row blocks at the scan's extreme candidates
        std::vector<double> noise_levels;
        const auto blocks = engine.sampling_blocks(8);
        if (!blocks.empty()) {
            std::vector<cplx> zero_b;
            for (const auto& b : blocks)
                zero_b.push_back(
                    b->derivative(Eigen::VectorXd::Zero(T), std::span(dirs)).value);
            for (size_t idx : probe_indices(curve)) {
                std::vector<std::vector<double>> block_curves;
                for (size_t b = 0; b < blocks.size(); ++b) {
                    const auto vals = blocks[b]->derivative_ray(
                        lemma1_base_point(scan[idx], j, q, T), u_grid, std::span(dirs));
                    std::vector<double> row;
                    for (const CFValue& v : vals)
                        row.push_back(finite(v.value) ? (v.value - zero_b[b]).real()
                                                      : kNaN);
                    block_curves.push_back(std::move(row));
                }
                // restrict the noise estimate to u-points the full-sample
                // criterion actually uses
                const auto full_vals = engine.derivative_ray(
                    lemma1_base_point(scan[idx], j, q, T), u_grid, std::span(dirs));
                for (size_t i = 0; i < u_grid.size(); ++i)
                    if (!usable(full_vals[i], rel_floor))
                        for (auto& row : block_curves)
                            row[i] = kNaN;
                noise_levels.push_back(noise_sum_sq(block_curves));
            }
        }

        const FlatnessVerdict flat =
            assess_flatness(valid_values, options.flatness_floor, noise_levels);
        worst_floor = std::max(worst_floor, flat.floor);
        min_range = std::min(min_range, flat.range);
        if (flat.flat) {
            std::ostringstream os;
            os << "lemma1: criterion flat for j = " << j << " (range " << flat.range
               << " < 10 x floor " << flat.floor << "), unidentified within tolerance";
            result.diagnostics.warnings.push_back(os.str());
            any_unidentified = true;
            continue;
        }

        const double step = scan.size() > 1 ? scan[1] - scan[0] : 1.0;
        const double lo = std::max(search_interval.first, scan[best_k] - step);
        const double hi = std::min(search_interval.second, scan[best_k] + step);
        auto safe = [&](double c) {
            const double v = criterion_at(c);
            return std::isnan(v) ? kBig : v;
        };
        double refined_val = kNaN;
        const double refined = golden_minimize(safe, lo, hi, options.refine_tol, &refined_val);
        result.a_hat[j - 1] = refined;
        std::vector<double> cand(q, kNaN);
        cand[j - 1] = refined;
        result.candidates.push_back(std::move(cand));
        result.criterion.push_back(refined_val);
    }

    result.diagnostics.unidentified = any_unidentified;
    result.diagnostics.numerical_floor = worst_floor;
    result.diagnostics.surface_range = std::isfinite(min_range) ? min_range : 0.0;
    if (any_unidentified)
        result.a_hat.clear();
    const double dscale = 1.0; // residual threshold on the moment scale
    if (result.diagnostics.symmetry_residual > 1e-10 * dscale)
        result.diagnostics.warnings.push_back(
            "lemma1: conjugate-symmetry residual above 1e-10; inspect conditioning");
    return result;
}

Eigen::Matrix4d probe_system_matrix(double a1) {
    Eigen::Matrix4d M;
    M << 1.0, 1.0 + 2.0 * a1, a1 * a1 + 2.0 * a1, a1 * a1,
         1.0, 2.0, 1.0, 0.0,
         1.0, 1.0, 0.0, 0.0,
         0.0, 0.0, 1.0, a1;
    return M;
}

double probe_system_det(double a1) { return a1 * a1 * (1.0 - a1); }

namespace {

struct ProbeGeometry {
    Eigen::VectorXd base_common; // probes 1-3 and 5
    Eigen::VectorXd base_p4;
    Eigen::VectorXd e0, e1, eq1, dB;
    double a1, aj, aq;
};

ProbeGeometry probe_geometry(const Eigen::VectorXd& a_candidate, int j, int q, int T) {
    if (q < 1)
        throw ValidationError("theorem1: requires q >= 1");
    if (a_candidate.size() != q)
        throw ValidationError("theorem1: candidate vector must have length q");
    if (j < 1 || j > q)
        throw ValidationError("theorem1: coefficient index j must satisfy 1 <= j <= q");
    if (T < q + 3)
        throw ValidationError("theorem1: requires T >= q+3");

    ProbeGeometry g;
    g.a1 = a_candidate(0);
    g.aj = a_candidate(j - 1);
    g.aq = a_candidate(q - 1);
    if (std::abs(g.aq) < 1e-8 || std::abs(1.0 - g.aq) < 1e-8)
        throw DegenerateDirectionError(g.aq);

    g.base_common = Eigen::VectorXd::Zero(T);
    g.base_common(0) = g.aj;
    g.base_common(j) += -1.0;
    g.base_common(q + 2) += 1.0 - g.aj;

    // limit of the proof's nested substitution as the candidate matches a_q
    g.base_p4 = Eigen::VectorXd::Zero(T);
    g.base_p4(0) = g.aq;
    g.base_p4(1) += -1.0;
    g.base_p4(q + 1) += 1.0 / g.aq;
    g.base_p4(q + 2) += -g.aq + (g.aq - 1.0) / g.aq;

    g.e0 = basis(T, 0);
    g.e1 = basis(T, 1);
    g.eq1 = basis(T, q + 1);
    g.dB = Eigen::VectorXd::Zero(T);
    g.dB(1) = -g.aq;
    g.dB(q + 1) = 1.0;
    g.dB(q + 2) = g.aq - 1.0;
    return g;
}

Eigen::Matrix4d checked_probe_matrix(double a1) {
    const Eigen::Matrix4d M = probe_system_matrix(a1);
    const double det = M.determinant();
    if (std::abs(det) < 1e-8)
        throw SingularProbeSystemError(a1, det);
    return M;
}

Eigen::Vector4cd solve_probe_system(const Eigen::Matrix4d& M, const Eigen::Vector4cd& rhs) {
    const Eigen::PartialPivLU<Eigen::Matrix4d> lu(M);
    const Eigen::Vector4d re = lu.solve(rhs.real());
    const Eigen::Vector4d im = lu.solve(rhs.imag());
    return re.cast<cplx>() + cplx{0.0, 1.0} * im.cast<cplx>();
}

} // namespace

bool ProbeSystem::reliable(double epsilon_cf) const {
    for (int p = 0; p < 5; ++p)
        if (!(reliability[p] > epsilon_cf) || !finite(probes[p]))
            return false;
    return true;
}

ProbeSystem theorem1_probes(const CfEngine& engine, const Eigen::VectorXd& a_candidate,
                            int j, double u, int q, int T) {
    if (engine.horizon() != T)
        throw ValidationError("theorem1_probes: engine horizon does not match T");
    const ProbeGeometry g = probe_geometry(a_candidate, j, q, T);

    ProbeSystem sys;
    sys.j = j;
    sys.u = u;
    sys.M = checked_probe_matrix(g.a1);

    const Eigen::VectorXd s = u * g.base_common;
    const Eigen::VectorXd s4 = u * g.base_p4;
    const std::vector<Eigen::VectorXd> t1{g.e1, g.e1, g.e0};
    const std::vector<Eigen::VectorXd> t2{g.eq1, g.e0, g.e0};
    const std::vector<Eigen::VectorXd> t3{g.eq1, g.eq1, g.e0};
    const std::vector<Eigen::VectorXd> t45{g.e1, g.dB, g.dB};

    const CFValue p1 = engine.derivative(s, std::span(t1));
    const CFValue p2 = engine.derivative(s, std::span(t2));
    const CFValue p3 = engine.derivative(s, std::span(t3));
    const CFValue p4 = engine.derivative(s4, std::span(t45));
    const CFValue p5 = engine.derivative(s, std::span(t45));
    sys.probes = {p1.value, p2.value, p3.value, p4.value, p5.value};
    sys.reliability = {p1.reliability, p2.reliability, p3.reliability, p4.reliability,
                       p5.reliability};

    // The fourth equation uses the common-point construction for every j: its
    // pair-(eta_1, xi_1) content is a1^2 aj^2 (d1 d2^2 + a1 d2^3) at
    // (0, (aj_cand - aj) u), and every other term vanishes at matched
    // coefficients. The j=1-specific point (probe 4) pins that argument to
    // (aq_cand - a1) u, which stays away from zero for q >= 2, so it is
    // reported but not solved on. Dividing by the candidate scale makes row 4
    // exact at matched coefficients.
    const double scale = g.a1 * g.a1 * g.aj * g.aj;
    sys.rhs << p1.value, p2.value, p3.value, p5.value / scale;
    sys.recovered = solve_probe_system(sys.M, sys.rhs);
    return sys;
}

Theorem1CriterionDetail theorem1_criterion_detail(const CfEngine& engine,
                                                  const Eigen::VectorXd& a_candidate,
                                                  const std::vector<double>& u_grid,
                                                  int q, int T) {
    if (engine.horizon() != T)
        throw ValidationError("theorem1_criterion: engine horizon does not match T");
    if (u_grid.size() < 2)
        throw ValidationError("theorem1_criterion: u_grid needs at least 2 points");

    Theorem1CriterionDetail detail;
    detail.u = u_grid;
    detail.d_curve.resize(q);
    detail.per_j.assign(q, 0.0);

    for (int j = 1; j <= q; ++j) {
        const ProbeGeometry g = probe_geometry(a_candidate, j, q, T);
        const Eigen::Matrix4d M = checked_probe_matrix(g.a1);
        const Eigen::PartialPivLU<Eigen::Matrix4d> lu(M);
        const double scale = g.a1 * g.a1 * g.aj * g.aj;

        const std::vector<Eigen::VectorXd> t1{g.e1, g.e1, g.e0};
        const std::vector<Eigen::VectorXd> t2{g.eq1, g.e0, g.e0};
        const std::vector<Eigen::VectorXd> t3{g.eq1, g.eq1, g.e0};
        const std::vector<Eigen::VectorXd> t45{g.e1, g.dB, g.dB};

        const auto v1 = engine.derivative_ray(g.base_common, u_grid, std::span(t1));
        const auto v2 = engine.derivative_ray(g.base_common, u_grid, std::span(t2));
        const auto v3 = engine.derivative_ray(g.base_common, u_grid, std::span(t3));
        const auto v45 = engine.derivative_ray(g.base_common, u_grid, std::span(t45));

        std::vector<cplx>& curve = detail.d_curve[j - 1];
        curve.assign(u_grid.size(), cplx{kNaN, kNaN});
        std::vector<double> re_vals;
        const double rel_floor = engine.reliability_floor();
        for (size_t i = 0; i < u_grid.size(); ++i) {
            if (!usable(v1[i], rel_floor) || !usable(v2[i], rel_floor) ||
                !usable(v3[i], rel_floor) || !usable(v45[i], rel_floor)) {
                ++detail.dropped_points;
                continue;
            }
            Eigen::Vector4cd rhs;
            rhs << v1[i].value, v2[i].value, v3[i].value, v45[i].value / scale;
            const Eigen::Vector4d re = lu.solve(rhs.real());
            const Eigen::Vector4d im = lu.solve(rhs.imag());
            curve[i] = cplx{re(3), 0.0} + cplx{0.0, 1.0} * im(3);
            re_vals.push_back(re(3));
        }
        if (re_vals.size() < std::max<size_t>(3, u_grid.size() / 2))
            throw IllConditionedPointError(
                std::vector<double>(g.base_common.data(),
                                    g.base_common.data() + g.base_common.size()),
                0.0, 0.0);
        detail.per_j[j - 1] = variance_of(re_vals);
        detail.value += detail.per_j[j - 1];
        detail.symmetry_residual = std::max(
            detail.symmetry_residual, conjugate_symmetry_residual(u_grid, curve, 1.0));
    }
    return detail;
}

double theorem1_criterion(const CfEngine& engine, const Eigen::VectorXd& a_candidate,
                          const std::vector<double>& u_grid, int q, int T) {
    return theorem1_criterion_detail(engine, a_candidate, u_grid, q, T).value;
}

namespace {

bool excluded_candidate(const Eigen::VectorXd& c, int q, double radius) {
    // exclusions apply to the coefficients the probe system divides through:
    // a1 (matrix) and a_q (directions)
    const double a1 = c(0), aq = c(q - 1);
    return std::abs(a1) < radius || std::abs(1.0 - a1) < radius ||
           std::abs(aq) < radius || std::abs(1.0 - aq) < radius;
}

} // namespace

EstimateResult theorem1_estimate(const CfEngine& engine, int q, int T,
                                 const std::vector<double>& u_grid,
                                 std::pair<double, double> search_box,
                                 const EstimateOptions& options) {
    if (q < 1)
        throw ValidationError("theorem1_estimate: requires q >= 1");
    if (T < q + 3)
        throw ValidationError("theorem1_estimate: requires T >= q+3");
    if (!(search_box.first < search_box.second))
        throw ValidationError("theorem1_estimate: empty search box");
    if (options.scan_points < 4)
        throw ValidationError("theorem1_estimate: bad scan_points");
    double total = std::pow(static_cast<double>(options.scan_points), q);
    if (total > options.max_scan_evals)
        throw ValidationError("theorem1_estimate: scan grid too large; lower scan_points");

    EstimateResult result;

    auto criterion_at = [&](const Eigen::VectorXd& cand,
                            Theorem1CriterionDetail* detail_out) -> double {
        if (excluded_candidate(cand, q, options.exclusion_radius))
            return kNaN;
        try {
            Theorem1CriterionDetail d =
                theorem1_criterion_detail(engine, cand, u_grid, q, T);
            result.diagnostics.symmetry_residual =
                std::max(result.diagnostics.symmetry_residual, d.symmetry_residual);
            result.diagnostics.dropped_candidates += d.dropped_points > 0 ? 1 : 0;
            if (detail_out)
                *detail_out = std::move(d);
            return detail_out ? detail_out->value : d.value;
        } catch (const IllConditionedPointError&) {
            return kNaN;
        } catch (const SingularProbeSystemError&) {
            return kNaN;
        } catch (const DegenerateDirectionError&) {
            return kNaN;
        }
    };

    // full grid scan
    const std::vector<double> axis =
        linspace(search_box.first, search_box.second, options.scan_points);
    const size_t n_grid = static_cast<size_t>(std::llround(total));
    std::vector<double> valid_values;
    Eigen::VectorXd best = Eigen::VectorXd::Zero(q);
    double best_val = std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (size_t flat = 0; flat < n_grid; ++flat) {
        size_t rem = flat;
        Eigen::VectorXd cand(q);
        for (int k = q - 1; k >= 0; --k) {
            cand(k) = axis[rem % axis.size()];
            rem /= axis.size();
        }
        const double val = criterion_at(cand, nullptr);
        result.candidates.push_back({cand.data(), cand.data() + q});
        result.criterion.push_back(val);
        if (std::isnan(val)) {
            ++result.diagnostics.dropped_candidates;
            continue;
        }
        valid_values.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = cand;
            have_best = true;
        }
    }

    if (!have_best)
        throw ValidationError(
            "theorem1_estimate: no well-conditioned candidates in the search box");

    std::vector<double> noise_levels;
    const auto blocks = engine.sampling_blocks(8);
    if (!blocks.empty()) {
        for (size_t idx : probe_indices(result.criterion)) {
            const Eigen::VectorXd cand = Eigen::Map<const Eigen::VectorXd>(
                result.candidates[idx].data(), q);
            std::vector<Theorem1CriterionDetail> per_block;
            for (const auto& b : blocks) {
                try {
                    per_block.push_back(
                        theorem1_criterion_detail(*b, cand, u_grid, q, T));
                } catch (const IllConditionedPointError&) {
                } catch (const SingularProbeSystemError&) {
                } catch (const DegenerateDirectionError&) {
                }
            }
            if (per_block.size() < 3)
                continue;
            double level = 0.0;
            for (int jj = 0; jj < q; ++jj) {
                std::vector<std::vector<double>> curves;
                for (const auto& d : per_block) {
                    std::vector<double> row;
                    for (const cplx& z : d.d_curve[jj])
                        row.push_back(finite(z) ? z.real() : kNaN);
                    curves.push_back(std::move(row));
                }
                const double s = noise_sum_sq(curves);
                if (std::isfinite(s))
                    level += s / static_cast<double>(u_grid.size());
            }
            noise_levels.push_back(level);
        }
    }

    const FlatnessVerdict flat =
        assess_flatness(valid_values, options.flatness_floor, noise_levels);
    result.diagnostics.numerical_floor = flat.floor;
    result.diagnostics.surface_range = flat.range;
    if (flat.flat) {
        std::ostringstream os;
        os << "theorem1: criterion surface flat (range " << flat.range << " < 10 x floor "
           << flat.floor << "), unidentified within tolerance";
        result.diagnostics.warnings.push_back(os.str());
        result.diagnostics.unidentified = true;
        return result;
    }

    // coordinate descent from the best grid point
    const double step = axis.size() > 1 ? axis[1] - axis[0] : 1.0;
    Eigen::VectorXd current = best;
    double current_val = best_val;
    for (int sweep = 0; sweep < 8; ++sweep) {
        double moved = 0.0;
        for (int k = 0; k < q; ++k) {
            double lo = std::max(search_box.first, current(k) - step);
            double hi = std::min(search_box.second, current(k) + step);
            // keep the refine interval clear of the excluded zones
            for (double z : {0.0, 1.0}) {
                const double r = options.exclusion_radius;
                if (lo < z + r && hi > z - r) {
                    if (current(k) >= z)
                        lo = std::max(lo, z + r);
                    else
                        hi = std::min(hi, z - r);
                }
            }
            if (!(lo < hi))
                continue;
            auto f1 = [&](double x) {
                Eigen::VectorXd cand = current;
                cand(k) = x;
                const double v = criterion_at(cand, nullptr);
                return std::isnan(v) ? kBig : v;
            };
            double val = kNaN;
            const double xk = golden_minimize(f1, lo, hi, options.refine_tol, &val);
            if (val < current_val) {
                moved = std::max(moved, std::abs(xk - current(k)));
                current(k) = xk;
                current_val = val;
            }
        }
        if (moved < options.refine_tol)
            break;
    }

    result.a_hat.assign(current.data(), current.data() + q);
    result.candidates.push_back(result.a_hat);
    result.criterion.push_back(current_val);
    if (result.diagnostics.symmetry_residual > 1e-10)
        result.diagnostics.warnings.push_back(
            "theorem1: conjugate-symmetry residual above 1e-10; inspect conditioning");
    return result;
}

} // namespace edid
