#include "edid/simulate.hpp"

#include "edid/errors.hpp"

namespace edid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (0xD1B54A32D192ED03ULL * (index + 1)));
}

Panel generate_panel(const EDModelSpec& spec, int n, std::uint64_t seed,
                     bool keep_components) {
    spec.validate();
    if (n < 1)
        throw ValidationError("generate_panel: n must be >= 1");

    const int T = spec.T, q = spec.q;
    Panel panel;
    panel.y.resize(n, T);
    if (keep_components) {
        panel.v.emplace(n, T);
        panel.w.emplace(n, T);
        panel.shocks.emplace(n, spec.n_shocks());
    }

    Eigen::VectorXd theta(spec.n_shocks());
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_stream_seed(seed, static_cast<std::uint64_t>(i)));

        // draw blocks in stacked order: initial xi's, then (eta_t, xi_t)
        for (int k = 0; k < q; ++k)
            theta(k) = spec.initial_xi_block(k).factors()[0].sample(rng);
        for (int t = 1; t <= T; ++t) {
            const ShockBlock& b = spec.pair_block(t);
            Eigen::VectorXd f(b.n_factors());
            for (int k = 0; k < b.n_factors(); ++k)
                f(k) = b.factors()[k].sample(rng);
            const Eigen::VectorXd pair = b.loadings() * f;
            theta(theta_index_eta(spec, t)) = pair(0);
            theta(theta_index_xi(spec, t)) = pair(1);
        }

        // recursions: v_t = v_{t-1} + eta_t, w_t = sum_k a_k xi_{t-k}
        double v_prev = 0.0;
        for (int t = 1; t <= T; ++t) {
            const double v_t = v_prev + theta(theta_index_eta(spec, t));
            double w_t = 0.0;
            for (int k = 0; k <= q; ++k)
                w_t += spec.coeff(k) * theta(theta_index_xi(spec, t - k));
            panel.y(i, t - 1) = v_t + w_t;
            if (keep_components) {
                (*panel.v)(i, t - 1) = v_t;
                (*panel.w)(i, t - 1) = w_t;
            }
            v_prev = v_t;
        }
        if (keep_components)
            panel.shocks->row(i) = theta.transpose();
    }
    return panel;
}

void demean_columns(Panel& panel) {
    const Eigen::RowVectorXd means = panel.y.colwise().mean();
    panel.y.rowwise() -= means;
}

} // namespace edid
