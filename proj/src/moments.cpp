#include "edid/moments.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "edid/errors.hpp"

namespace edid {

double Tensor3::max_abs() const {
    double m = 0.0;
    for (double x : v_)
        m = std::max(m, std::abs(x));
    return m;
}

Eigen::MatrixXd covariance_from_loadings(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& sigma_theta) {
    if (A.cols() != sigma_theta.rows() || sigma_theta.rows() != sigma_theta.cols())
        throw ContractError("covariance_from_loadings: dimension mismatch");
    return A * sigma_theta * A.transpose();
}

namespace {

Eigen::MatrixXd block_diagonal_second_moments(const EDModelSpec& spec) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(spec.n_shocks(), spec.n_shocks());
    for (int k = 0; k < spec.q; ++k) {
        const int c = theta_index_xi(spec, 1 - spec.q + k);
        sigma(c, c) = spec.initial_xi_block(k).second_moment()(0, 0);
    }
    for (int t = 1; t <= spec.T; ++t) {
        const Eigen::MatrixXd m = spec.pair_block(t).second_moment();
        const int e = theta_index_eta(spec, t);
        const int x = theta_index_xi(spec, t);
        sigma(e, e) = m(0, 0);
        sigma(e, x) = sigma(x, e) = m(0, 1);
        sigma(x, x) = m(1, 1);
    }
    return sigma;
}

} // namespace

CovarianceStructure implied_covariance(const EDModelSpec& spec) {
    spec.validate();
    const LoadingMatrix lm = build_loading_matrix(spec);
    return CovarianceStructure{
        covariance_from_loadings(lm.A, block_diagonal_second_moments(spec))};
}

ThirdCumulantTensor implied_third_cumulants(const EDModelSpec& spec) {
    spec.validate();
    const LoadingMatrix lm = build_loading_matrix(spec);
    const int T = spec.T;
    ThirdCumulantTensor out{Tensor3(T)};

    auto add_block = [&](const ShockBlock& block, const std::vector<int>& cols) {
        const int d = block.dim();
        for (int p = 0; p < d; ++p)
            for (int qq = 0; qq < d; ++qq)
                for (int m = 0; m < d; ++m) {
                    const double k3 = block.third_cumulant(p, qq, m);
                    if (k3 == 0.0)
                        continue;
                    for (int r = 0; r < T; ++r) {
                        const double ar = lm.A(r, cols[p]);
                        if (ar == 0.0) continue;
                        for (int s = 0; s < T; ++s) {
                            const double as = lm.A(s, cols[qq]);
                            if (as == 0.0) continue;
                            for (int t = 0; t < T; ++t)
                                out.K.at(r, s, t) += ar * as * lm.A(t, cols[m]) * k3;
                        }
                    }
                }
    };

    for (int k = 0; k < spec.q; ++k)
        add_block(spec.initial_xi_block(k), {theta_index_xi(spec, 1 - spec.q + k)});
    for (int t = 1; t <= spec.T; ++t)
        add_block(spec.pair_block(t),
                  {theta_index_eta(spec, t), theta_index_xi(spec, t)});
    return out;
}

CovarianceStructure empirical_covariance(const Panel& panel) {
    const int n = panel.n();
    if (n < 2)
        throw ValidationError("empirical_covariance: need n >= 2");
    const Eigen::MatrixXd centered = panel.y.rowwise() - panel.y.colwise().mean();
    return CovarianceStructure{(centered.transpose() * centered) / (n - 1.0)};
}

ThirdCumulantTensor empirical_third_cumulants(const Panel& panel) {
    const int n = panel.n();
    if (n < 3)
        throw ValidationError("empirical_third_cumulants: need n >= 3");
    const int T = panel.T();
    const Eigen::MatrixXd c = panel.y.rowwise() - panel.y.colwise().mean();
    const double scale = static_cast<double>(n) / ((n - 1.0) * (n - 2.0));

    ThirdCumulantTensor out{Tensor3(T)};
    for (int r = 0; r < T; ++r)
        for (int s = r; s < T; ++s) {
            const Eigen::ArrayXd crs = c.col(r).array() * c.col(s).array();
            for (int t = s; t < T; ++t) {
                const double k = scale * (crs * c.col(t).array()).sum();
                // fill all permutations
                out.K.at(r, s, t) = out.K.at(r, t, s) = out.K.at(s, r, t) = k;
                out.K.at(s, t, r) = out.K.at(t, r, s) = out.K.at(t, s, r) = k;
            }
        }
    return out;
}

void write_covariance_csv(std::ostream& os, const CovarianceStructure& cov) {
    os << "r,s,value\n" << std::setprecision(17);
    const int T = static_cast<int>(cov.C.rows());
    for (int r = 0; r < T; ++r)
        for (int s = 0; s < T; ++s)
            os << r + 1 << "," << s + 1 << "," << cov.C(r, s) << "\n";
}

void write_tensor_csv(std::ostream& os, const ThirdCumulantTensor& tensor) {
    os << "r,s,t,value\n" << std::setprecision(17);
    const int T = tensor.K.dim();
    for (int r = 0; r < T; ++r)
        for (int s = 0; s < T; ++s)
            for (int t = 0; t < T; ++t)
                os << r + 1 << "," << s + 1 << "," << t + 1 << ","
                   << tensor.K.at(r, s, t) << "\n";
}

} // namespace edid
