#include "edid/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

#include "edid/cf_engine.hpp"
#include "edid/errors.hpp"
#include "edid/moments.hpp"
#include "edid/simulate.hpp"

namespace edid {

std::string procedure_name(Procedure p) {
    switch (p) {
        case Procedure::Lemma1: return "lemma1";
        case Procedure::Theorem1: return "theorem1";
        case Procedure::Theorem2Demo: return "theorem2-demo";
        default: return "covariance-check";
    }
}

Procedure procedure_from_name(const std::string& name) {
    if (name == "lemma1") return Procedure::Lemma1;
    if (name == "theorem1") return Procedure::Theorem1;
    if (name == "theorem2-demo") return Procedure::Theorem2Demo;
    if (name == "covariance-check") return Procedure::CovarianceCheck;
    throw ValidationError("unknown procedure: " + name);
}

void ExperimentConfig::validate() const {
    spec.validate();
    if (replications < 1)
        throw ValidationError("experiment: replications must be >= 1");
    if (n < 1)
        throw ValidationError("experiment: n must be >= 1");
    if (threads < 0)
        throw ValidationError("experiment: threads must be >= 0");

    switch (procedure) {
        case Procedure::Lemma1: {
            const PreconditionReport rep =
                validate_identification_preconditions(spec, Theorem::L1);
            for (const auto& c : rep.checks)
                if (!c.pass && !c.warning_only)
                    throw ValidationError("lemma1 procedure: assumption violated: " +
                                          c.name + " (" + c.detail + ")");
            if (spec.T < spec.q + 2)
                throw ValidationError(
                    "lemma1 procedure: moment evaluation needs T >= q+2");
            break;
        }
        case Procedure::Theorem1: {
            const PreconditionReport rep =
                validate_identification_preconditions(spec, Theorem::T1);
            for (const auto& c : rep.checks)
                if (!c.pass && !c.warning_only && c.name == "horizon")
                    throw ValidationError("theorem1 procedure: " + c.detail);
            // nongaussianity / coefficient exclusions are what the experiment
            // probes, so they are not hard errors here
            break;
        }
        case Procedure::Theorem2Demo: {
            if (spec.q != 1)
                throw ValidationError("theorem2-demo: requires q = 1");
            GaussianParamsQ1::from_spec(spec); // throws unless all Gaussian
            if (candidate_a1 == 0.0)
                throw ValidationError("theorem2-demo: candidate_a1 must be set (nonzero)");
            break;
        }
        case Procedure::CovarianceCheck:
            break;
    }
}

namespace {

ReplicationRecord run_one(const ExperimentConfig& cfg, int rep) {
    ReplicationRecord rec;
    rec.rep = rep;
    rec.seed = derive_stream_seed(cfg.base_seed, static_cast<std::uint64_t>(rep));
    const auto t0 = std::chrono::steady_clock::now();

    switch (cfg.procedure) {
        case Procedure::Lemma1: {
            const Panel panel = generate_panel(cfg.spec, cfg.n, rec.seed);
            const EmpiricalCfEngine engine(panel);
            const EstimateResult est = lemma1_estimate(
                engine, cfg.spec.q, cfg.spec.T, cfg.estimate.u_grid, cfg.search,
                cfg.estimate);
            rec.unidentified = est.diagnostics.unidentified;
            rec.a_hat = est.a_hat;
            double mn = std::numeric_limits<double>::infinity();
            for (double v : est.criterion)
                if (!std::isnan(v)) mn = std::min(mn, v);
            rec.criterion_min = std::isfinite(mn) ? mn : 0.0;
            break;
        }
        case Procedure::Theorem1: {
            const Panel panel = generate_panel(cfg.spec, cfg.n, rec.seed);
            const EmpiricalCfEngine engine(panel);
            const EstimateResult est = theorem1_estimate(
                engine, cfg.spec.q, cfg.spec.T, cfg.estimate.u_grid, cfg.search,
                cfg.estimate);
            rec.unidentified = est.diagnostics.unidentified;
            rec.a_hat = est.a_hat;
            double mn = std::numeric_limits<double>::infinity();
            for (double v : est.criterion)
                if (!std::isnan(v)) mn = std::min(mn, v);
            rec.criterion_min = std::isfinite(mn) ? mn : 0.0;
            break;
        }
        case Procedure::Theorem2Demo: {
            const GaussianParamsQ1 truth = GaussianParamsQ1::from_spec(cfg.spec);
            const EquivalenceResult eq =
                theorem2_equivalent_model(truth, cfg.candidate_a1, cfg.spec.T);
            rec.equiv_residual = eq.residual;
            rec.equiv_pd_ok = eq.pd_ok;
            break;
        }
        case Procedure::CovarianceCheck: {
            const Panel panel = generate_panel(cfg.spec, cfg.n, rec.seed);
            const CovarianceStructure emp = empirical_covariance(panel);
            const CovarianceStructure imp = implied_covariance(cfg.spec);
            rec.max_cov_deviation = (emp.C - imp.C).cwiseAbs().maxCoeff();
            break;
        }
    }

    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

ExperimentSummary summarize(const ExperimentConfig& cfg,
                            const std::vector<ReplicationRecord>& recs) {
    ExperimentSummary s;
    s.truth.assign(cfg.spec.a.data(), cfg.spec.a.data() + cfg.spec.q);
    const int q = cfg.spec.q;

    std::vector<std::vector<double>> per_coef(q);
    for (const auto& r : recs) {
        if (r.unidentified || static_cast<int>(r.a_hat.size()) != q) {
            if (cfg.procedure == Procedure::Lemma1 || cfg.procedure == Procedure::Theorem1)
                ++s.n_unidentified;
            continue;
        }
        ++s.n_identified;
        for (int k = 0; k < q; ++k)
            per_coef[k].push_back(r.a_hat[k]);
    }

    s.mean_a.assign(q, 0.0);
    s.bias.assign(q, 0.0);
    s.sd.assign(q, 0.0);
    s.rmse.assign(q, 0.0);
    s.mc_se.assign(q, 0.0);
    if (s.n_identified == 0)
        return s;
    for (int k = 0; k < q; ++k) {
        const auto& v = per_coef[k];
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double ss = 0.0, mse = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
            mse += (x - s.truth[k]) * (x - s.truth[k]);
        }
        s.mean_a[k] = mean;
        s.bias[k] = mean - s.truth[k];
        s.sd[k] = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        s.rmse[k] = std::sqrt(mse / n);
        s.mc_se[k] = n > 0 ? s.sd[k] / std::sqrt(n) : 0.0;
    }
    return s;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    ExperimentReport report;
    report.config = config;
    report.replications.resize(config.replications);

    int n_threads = config.threads == 0
                        ? static_cast<int>(std::thread::hardware_concurrency())
                        : config.threads;
    n_threads = std::max(1, std::min(n_threads, config.replications));

    if (n_threads == 1) {
        for (int r = 0; r < config.replications; ++r)
            report.replications[r] = run_one(config, r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&]() {
                for (int r = next.fetch_add(1); r < config.replications;
                     r = next.fetch_add(1))
                    report.replications[r] = run_one(config, r);
            });
        for (auto& th : pool)
            th.join();
    }

    report.summary = summarize(config, report.replications);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
    const int q = report.config.spec.q;
    os << "rep,seed";
    for (int k = 1; k <= q; ++k)
        os << ",a_hat_" << k;
    os << ",unidentified,criterion_min,max_cov_deviation,equiv_residual,equiv_pd_ok,"
          "wall_ms\n";
    os << std::setprecision(17);
    for (const auto& r : report.replications) {
        os << r.rep << "," << r.seed;
        for (int k = 0; k < q; ++k) {
            os << ",";
            if (k < static_cast<int>(r.a_hat.size()))
                os << r.a_hat[k];
        }
        os << "," << (r.unidentified ? 1 : 0) << "," << r.criterion_min << ","
           << r.max_cov_deviation << "," << r.equiv_residual << ","
           << (r.equiv_pd_ok ? 1 : 0) << "," << r.wall_ms << "\n";
    }
}

} // namespace edid
