#include "edid/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "edid/cf_engine.hpp"
#include "edid/config.hpp"
#include "edid/errors.hpp"
#include "edid/identify.hpp"
#include "edid/montecarlo.hpp"
#include "edid/moments.hpp"
#include "edid/panel_io.hpp"
#include "edid/simulate.hpp"

namespace edid {

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitDiagnostic = 3;

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out)
        throw ValidationError("write to '" + path + "' failed");
}

void emit_diagnostic(const std::string& kind, const json& detail) {
    json d;
    d["diagnostic"] = kind;
    d["detail"] = detail;
    std::cerr << d.dump() << std::endl;
}

json estimate_result_to_json(const EstimateResult& r) {
    json j;
    j["unidentified"] = r.diagnostics.unidentified;
    j["a_hat"] = r.a_hat;
    json curve = json::array();
    for (size_t k = 0; k < r.candidates.size(); ++k) {
        json row;
        row["candidate"] = r.candidates[k];
        if (std::isnan(r.criterion[k]))
            row["criterion"] = nullptr;
        else
            row["criterion"] = r.criterion[k];
        curve.push_back(std::move(row));
    }
    j["criterion_curve"] = std::move(curve);
    json diag;
    diag["numerical_floor"] = r.diagnostics.numerical_floor;
    diag["surface_range"] = r.diagnostics.surface_range;
    diag["symmetry_residual"] = r.diagnostics.symmetry_residual;
    diag["dropped_candidates"] = r.diagnostics.dropped_candidates;
    diag["warnings"] = r.diagnostics.warnings;
    j["diagnostics"] = std::move(diag);
    return j;
}

json d_curves_to_json(const Theorem1CriterionDetail& d) {
    json out = json::array();
    for (size_t jj = 0; jj < d.d_curve.size(); ++jj) {
        json c;
        c["j"] = jj + 1;
        c["u"] = d.u;
        json re = json::array(), im = json::array();
        for (const cplx& z : d.d_curve[jj]) {
            re.push_back(z.real());
            im.push_back(z.imag());
        }
        c["re"] = std::move(re);
        c["im"] = std::move(im);
        out.push_back(std::move(c));
    }
    return out;
}

std::string manifest_comment(const RunManifest& m) {
    return "manifest: " + m.to_json().dump();
}

struct CliPaths {
    std::string config;
    std::string panel_in;
    std::string out;
    std::string csv_out;
    std::string method_override;
    double candidate_override = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    long long n_override = -1;
};

int cmd_simulate(const CliPaths& p) {
    const Config cfg = load_config(p.config);
    if (!cfg.simulate)
        throw ValidationError("config: 'simulate' section required for the simulate command");
    SimulateSettings s = *cfg.simulate;
    if (p.has_seed_override)
        s.seed = p.seed_override;
    if (p.n_override > 0)
        s.n = static_cast<int>(p.n_override);

    const Panel panel = generate_panel(cfg.model, s.n, s.seed, s.keep_components);

    RunManifest man;
    man.command = "simulate";
    man.config_path = p.config;
    man.outputs = {p.out};
    man.seed = s.seed;
    write_panel_csv_file(p.out, panel, manifest_comment(man));
    std::cout << "wrote " << panel.n() << " x " << panel.T() << " panel to " << p.out
              << "\n";
    return kExitOk;
}

int cmd_estimate(const CliPaths& p) {
    const Config cfg = load_config(p.config);
    if (!cfg.estimate)
        throw ValidationError("config: 'estimate' section required for the estimate command");
    EstimateSettings s = *cfg.estimate;
    if (!p.method_override.empty())
        s.method = p.method_override;
    if (s.method != "lemma1" && s.method != "theorem1")
        throw ValidationError("estimate: method must be 'lemma1' or 'theorem1'");

    RunManifest man;
    man.command = "estimate";
    man.config_path = p.config;
    man.outputs = {p.out};

    std::unique_ptr<CfEngine> engine;
    std::optional<Panel> panel;
    if (!p.panel_in.empty()) {
        panel = read_panel_csv_file(p.panel_in, cfg.model.T);
        if (s.demean)
            demean_columns(*panel);
        engine = std::make_unique<EmpiricalCfEngine>(*panel, s.epsilon_cf);
        man.inputs = {p.panel_in};
    } else {
        engine = std::make_unique<AnalyticCfEngine>(cfg.model);
    }

    EstimateResult result;
    if (s.method == "lemma1") {
        result = lemma1_estimate(*engine, cfg.model.q, cfg.model.T, s.options.u_grid,
                                 s.search, s.options);
    } else {
        result = theorem1_estimate(*engine, cfg.model.q, cfg.model.T, s.options.u_grid,
                                   s.search, s.options);
    }

    json out;
    out["manifest"] = man.to_json();
    out["method"] = s.method;
    out["backend"] = p.panel_in.empty() ? "analytic" : "empirical";
    out["result"] = estimate_result_to_json(result);
    if (s.method == "theorem1" && !result.a_hat.empty()) {
        const Eigen::VectorXd a_hat =
            Eigen::Map<const Eigen::VectorXd>(result.a_hat.data(), result.a_hat.size());
        out["d_curves"] = d_curves_to_json(theorem1_criterion_detail(
            *engine, a_hat, s.options.u_grid, cfg.model.q, cfg.model.T));
    }
    write_json_file(p.out, out);

    if (!p.csv_out.empty()) {
        std::ofstream csv(p.csv_out);
        if (!csv)
            throw ValidationError("cannot open '" + p.csv_out + "' for writing");
        csv << "# " << manifest_comment(man) << "\n";
        for (int k = 1; k <= cfg.model.q; ++k)
            csv << "candidate_" << k << ",";
        csv << "criterion\n" << std::setprecision(17);
        for (size_t k = 0; k < result.candidates.size(); ++k) {
            for (double c : result.candidates[k])
                csv << c << ",";
            csv << result.criterion[k] << "\n";
        }
    }

    if (result.diagnostics.unidentified) {
        json detail;
        detail["warnings"] = result.diagnostics.warnings;
        detail["numerical_floor"] = result.diagnostics.numerical_floor;
        detail["surface_range"] = result.diagnostics.surface_range;
        emit_diagnostic("unidentified_within_tolerance", detail);
        return kExitDiagnostic;
    }
    std::cout << "a_hat =";
    for (double a : result.a_hat)
        std::cout << " " << a;
    std::cout << "\n";
    return kExitOk;
}

int cmd_equivalence(const CliPaths& p) {
    const Config cfg = load_config(p.config);
    if (!cfg.equivalence && std::isnan(p.candidate_override))
        throw ValidationError(
            "config: 'equivalence' section (or --candidate-a1) required");
    double candidate = cfg.equivalence ? cfg.equivalence->candidate_a1 : 0.0;
    if (!std::isnan(p.candidate_override))
        candidate = p.candidate_override;

    const GaussianParamsQ1 truth = GaussianParamsQ1::from_spec(cfg.model);
    const EquivalenceResult eq = theorem2_equivalent_model(truth, candidate, cfg.model.T);

    RunManifest man;
    man.command = "equivalence";
    man.config_path = p.config;
    man.outputs = {p.out};

    json out;
    out["manifest"] = man.to_json();
    out["truth"] = {{"a1", truth.a1},
                    {"var_xi0", truth.var_xi0},
                    {"var_eta", truth.var_eta},
                    {"var_xi", truth.var_xi},
                    {"cov_eta_xi", truth.cov_eta_xi}};
    out["tilde"] = {{"a1", eq.tilde.a1},
                    {"var_xi0", eq.tilde.var_xi0},
                    {"var_eta", eq.tilde.var_eta},
                    {"var_xi", eq.tilde.var_xi},
                    {"cov_eta_xi", eq.tilde.cov_eta_xi}};
    out["residual"] = eq.residual;
    out["pd_ok"] = eq.pd_ok;
    out["first_non_pd_block"] = eq.first_non_pd_block;
    write_json_file(p.out, out);

    std::cout << "tilde a1 = " << eq.tilde.a1 << ", covariance residual = " << eq.residual
              << ", pd_ok = " << (eq.pd_ok ? "true" : "false") << "\n";
    return kExitOk;
}

int cmd_montecarlo(const CliPaths& p) {
    const Config cfg = load_config(p.config);
    ExperimentConfig ec = experiment_config(cfg);
    if (p.has_seed_override)
        ec.base_seed = p.seed_override;
    if (p.n_override > 0)
        ec.n = static_cast<int>(p.n_override);

    const ExperimentReport report = run_experiment(ec);

    RunManifest man;
    man.command = "montecarlo";
    man.config_path = p.config;
    man.outputs = {p.out};
    man.seed = ec.base_seed;
    if (!p.csv_out.empty())
        man.outputs.push_back(p.csv_out);

    json out;
    out["manifest"] = man.to_json();
    json cfg_echo;
    cfg_echo["procedure"] = procedure_name(ec.procedure);
    cfg_echo["n"] = ec.n;
    cfg_echo["replications"] = ec.replications;
    cfg_echo["base_seed"] = ec.base_seed;
    cfg_echo["threads"] = ec.threads;
    cfg_echo["model"] = model_spec_to_json(ec.spec);
    out["config"] = std::move(cfg_echo);

    json reps = json::array();
    for (const auto& r : report.replications) {
        json row;
        row["rep"] = r.rep;
        row["seed"] = r.seed;
        row["a_hat"] = r.a_hat;
        row["unidentified"] = r.unidentified;
        row["criterion_min"] = r.criterion_min;
        row["max_cov_deviation"] = r.max_cov_deviation;
        row["equiv_residual"] = r.equiv_residual;
        row["equiv_pd_ok"] = r.equiv_pd_ok;
        row["wall_ms"] = r.wall_ms;
        reps.push_back(std::move(row));
    }
    out["replications"] = std::move(reps);
    json summ;
    summ["truth"] = report.summary.truth;
    summ["mean_a"] = report.summary.mean_a;
    summ["bias"] = report.summary.bias;
    summ["sd"] = report.summary.sd;
    summ["rmse"] = report.summary.rmse;
    summ["mc_se"] = report.summary.mc_se;
    summ["n_identified"] = report.summary.n_identified;
    summ["n_unidentified"] = report.summary.n_unidentified;
    out["summary"] = std::move(summ);
    out["wall_seconds"] = report.wall_seconds;
    write_json_file(p.out, out);

    if (!p.csv_out.empty()) {
        std::ofstream csv(p.csv_out);
        if (!csv)
            throw ValidationError("cannot open '" + p.csv_out + "' for writing");
        csv << "# " << manifest_comment(man) << "\n";
        write_report_csv(csv, report);
    }

    std::cout << "ran " << ec.replications << " replication(s) of "
              << procedure_name(ec.procedure) << " in " << report.wall_seconds << " s\n";
    return kExitOk;
}

} // namespace

json RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["config"] = config_path;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["version"] = version;
    return j;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"earnings-dynamics simulation and coefficient identification"};
    app.require_subcommand(1);

    CliPaths p;

    CLI::App* sim = app.add_subcommand("simulate", "draw a panel and write it as CSV");
    sim->add_option("--config", p.config, "config file (JSON)")->required();
    sim->add_option("--out", p.out, "output panel CSV")->required();
    std::uint64_t seed_opt = 0;
    auto* seed_flag = sim->add_option("--seed", seed_opt, "override simulate.seed");
    sim->add_option("--n", p.n_override, "override simulate.n");

    CLI::App* est = app.add_subcommand(
        "estimate", "run lemma1/theorem1 on a panel or on the analytic model");
    est->add_option("--config", p.config, "config file (JSON)")->required();
    est->add_option("--out", p.out, "output result JSON")->required();
    est->add_option("--panel", p.panel_in, "input panel CSV (empirical backend)");
    est->add_option("--csv-out", p.csv_out, "also write the criterion surface as CSV");
    est->add_option("--method", p.method_override, "lemma1 | theorem1");

    CLI::App* eqv = app.add_subcommand("equivalence",
                                       "construct the observationally equivalent model");
    eqv->add_option("--config", p.config, "config file (JSON)")->required();
    eqv->add_option("--out", p.out, "output result JSON")->required();
    eqv->add_option("--candidate-a1", p.candidate_override,
                    "override equivalence.candidate_a1");

    CLI::App* mc = app.add_subcommand("montecarlo", "run a replication experiment");
    mc->add_option("--config", p.config, "config file (JSON)")->required();
    mc->add_option("--out", p.out, "output report JSON")->required();
    mc->add_option("--csv-out", p.csv_out, "also write per-replication estimates as CSV");
    auto* mc_seed = mc->add_option("--seed", seed_opt, "override montecarlo.base_seed");
    mc->add_option("--n", p.n_override, "override montecarlo.n");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    p.has_seed_override = seed_flag->count() > 0 || mc_seed->count() > 0;
    p.seed_override = seed_opt;

    try {
        if (sim->parsed())
            return cmd_simulate(p);
        if (est->parsed())
            return cmd_estimate(p);
        if (eqv->parsed())
            return cmd_equivalence(p);
        if (mc->parsed())
            return cmd_montecarlo(p);
        return kExitValidation;
    } catch (const ValidationError& e) {
        emit_diagnostic("validation_error", e.what());
        return kExitValidation;
    } catch (const ContractError& e) {
        emit_diagnostic("validation_error", e.what());
        return kExitValidation;
    } catch (const IllConditionedPointError& e) {
        json detail;
        detail["message"] = e.what();
        detail["modulus"] = e.modulus();
        detail["threshold"] = e.threshold();
        detail["s"] = e.point();
        emit_diagnostic("ill_conditioned_cf_point", detail);
        return kExitDiagnostic;
    } catch (const SingularProbeSystemError& e) {
        emit_diagnostic("singular_probe_system", e.what());
        return kExitDiagnostic;
    } catch (const DegenerateDirectionError& e) {
        emit_diagnostic("degenerate_direction", e.what());
        return kExitDiagnostic;
    } catch (const std::exception& e) {
        emit_diagnostic("internal_error", e.what());
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace edid
