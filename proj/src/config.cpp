#include "edid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "edid/errors.hpp"

namespace edid {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ValidationError("config: " + where + ": " + what);
}

void require_object(const json& j, const std::string& where) {
    if (!j.is_object())
        fail(where, "expected an object");
}

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
    require_object(j, where);
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            fail(where, "unknown key '" + key + "'");
}

double get_number(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key))
        fail(where, "missing key '" + key + "'");
    if (!j.at(key).is_number())
        fail(where, "key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

double get_number_or(const json& j, const std::string& where, const std::string& key,
                     double fallback) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number())
        fail(where, "key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        fail(where, "key '" + key + "' must be an integer");
    return j.at(key).get<int>();
}

int get_int_or(const json& j, const std::string& where, const std::string& key,
               int fallback) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number_integer())
        fail(where, "key '" + key + "' must be an integer");
    return j.at(key).get<int>();
}

bool get_bool_or(const json& j, const std::string& where, const std::string& key,
                 bool fallback) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_boolean())
        fail(where, "key '" + key + "' must be a boolean");
    return j.at(key).get<bool>();
}

std::string get_string(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_string())
        fail(where, "key '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

FactorDist factor_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    const std::string family = get_string(j, where, "family");
    if (family == "gaussian") {
        check_keys(j, where, {"family", "var"});
        return FactorDist(Gaussian{get_number(j, where, "var")});
    }
    if (family == "gaussian_mixture") {
        check_keys(j, where, {"family", "p", "mu1", "var1", "mu2", "var2"});
        GaussianMixture m;
        m.p = get_number(j, where, "p");
        m.mu1 = get_number(j, where, "mu1");
        m.var1 = get_number(j, where, "var1");
        m.var2 = get_number(j, where, "var2");
        if (j.contains("mu2")) {
            m.mu2 = get_number(j, where, "mu2");
        } else {
            if (m.p >= 1.0)
                fail(where, "mu2 required when p = 1");
            m.mu2 = -m.p * m.mu1 / (1.0 - m.p); // zero-mean constraint
        }
        return FactorDist(m);
    }
    if (family == "centered_gamma") {
        check_keys(j, where, {"family", "shape", "scale"});
        return FactorDist(CenteredGamma{get_number(j, where, "shape"),
                                        get_number(j, where, "scale")});
    }
    fail(where, "unknown family '" + family + "'");
}

ShockBlock pair_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    if (j.contains("factors")) {
        check_keys(j, where, {"factors", "loadings"});
        if (!j.at("factors").is_array() || j.at("factors").size() != 2)
            fail(where, "'factors' must be an array of two family specs");
        if (!j.contains("loadings") || !j.at("loadings").is_array() ||
            j.at("loadings").size() != 2)
            fail(where, "'loadings' must be a 2x2 array");
        Eigen::Matrix2d L;
        for (int r = 0; r < 2; ++r) {
            const json& row = j.at("loadings").at(r);
            if (!row.is_array() || row.size() != 2)
                fail(where, "'loadings' must be a 2x2 array");
            for (int c = 0; c < 2; ++c) {
                if (!row.at(c).is_number())
                    fail(where, "'loadings' entries must be numbers");
                L(r, c) = row.at(c).get<double>();
            }
        }
        return ShockBlock::pair_from_factors(
            factor_from_json(j.at("factors").at(0), where + ".factors[0]"),
            factor_from_json(j.at("factors").at(1), where + ".factors[1]"), L);
    }
    check_keys(j, where, {"eta", "xi"});
    if (!j.contains("eta") || !j.contains("xi"))
        fail(where, "pair needs either {eta, xi} or {factors, loadings}");
    return ShockBlock::pair_independent(factor_from_json(j.at("eta"), where + ".eta"),
                                        factor_from_json(j.at("xi"), where + ".xi"));
}

} // namespace

EDModelSpec model_spec_from_json(const json& j) {
    const std::string where = "model";
    check_keys(j, where, {"T", "q", "a", "initial_xi", "pairs"});

    EDModelSpec spec;
    spec.T = get_int(j, where, "T");
    spec.q = get_int(j, where, "q");

    spec.a = Eigen::VectorXd::Zero(std::max(0, spec.q));
    if (spec.q > 0 || j.contains("a")) {
        if (!j.contains("a") || !j.at("a").is_array())
            fail(where, "'a' must be an array of q coefficients");
        if (static_cast<int>(j.at("a").size()) != spec.q)
            fail(where, "'a' must have exactly q entries");
        for (int k = 0; k < spec.q; ++k) {
            if (!j.at("a").at(k).is_number())
                fail(where, "'a' entries must be numbers");
            spec.a(k) = j.at("a").at(k).get<double>();
        }
    }

    if (spec.q > 0 || j.contains("initial_xi")) {
        if (!j.contains("initial_xi") || !j.at("initial_xi").is_array())
            fail(where, "'initial_xi' must be an array of q family specs");
        if (static_cast<int>(j.at("initial_xi").size()) != spec.q)
            fail(where, "'initial_xi' must have exactly q entries");
        for (int k = 0; k < spec.q; ++k)
            spec.blocks.push_back(ShockBlock::singleton(factor_from_json(
                j.at("initial_xi").at(k),
                where + ".initial_xi[" + std::to_string(k) + "]")));
    }

    if (!j.contains("pairs") || !j.at("pairs").is_array())
        fail(where, "'pairs' must be an array of pair specs");
    const auto& pairs = j.at("pairs");
    if (static_cast<int>(pairs.size()) != spec.T && pairs.size() != 1)
        fail(where, "'pairs' must have exactly T entries, or one entry applied to all t");
    for (int t = 0; t < spec.T; ++t) {
        const int src = pairs.size() == 1 ? 0 : t;
        spec.blocks.push_back(pair_from_json(
            pairs.at(src), where + ".pairs[" + std::to_string(src) + "]"));
    }

    spec.validate();
    return spec;
}

namespace {

json factor_to_json(const FactorDist& f) {
    json j;
    j["family"] = f.family_name();
    f.visit([&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
            j["var"] = d.var;
        } else if constexpr (std::is_same_v<D, GaussianMixture>) {
            j["p"] = d.p;
            j["mu1"] = d.mu1;
            j["var1"] = d.var1;
            j["mu2"] = d.mu2;
            j["var2"] = d.var2;
        } else {
            j["shape"] = d.shape;
            j["scale"] = d.scale;
        }
    });
    return j;
}

} // namespace

json model_spec_to_json(const EDModelSpec& spec) {
    json j;
    j["T"] = spec.T;
    j["q"] = spec.q;
    j["a"] = json::array();
    for (int k = 0; k < spec.q; ++k)
        j["a"].push_back(spec.a(k));
    j["initial_xi"] = json::array();
    for (int k = 0; k < spec.q; ++k)
        j["initial_xi"].push_back(factor_to_json(spec.initial_xi_block(k).factors()[0]));
    j["pairs"] = json::array();
    for (int t = 1; t <= spec.T; ++t) {
        const ShockBlock& b = spec.pair_block(t);
        json p;
        p["factors"] = json::array({factor_to_json(b.factors()[0]),
                                    factor_to_json(b.factors()[1])});
        p["loadings"] = json::array(
            {json::array({b.loadings()(0, 0), b.loadings()(0, 1)}),
             json::array({b.loadings()(1, 0), b.loadings()(1, 1)})});
        j["pairs"].push_back(p);
    }
    return j;
}

namespace {

EstimateOptions options_from_json(const json& j, const std::string& where) {
    EstimateOptions opt;
    if (j.contains("u_grid")) {
        const json& g = j.at("u_grid");
        check_keys(g, where + ".u_grid", {"max", "points"});
        opt.u_grid = make_u_grid(get_number_or(g, where, "max", 2.0),
                                 get_int_or(g, where, "points", 21));
    }
    opt.scan_points = get_int_or(j, where, "scan_points", opt.scan_points);
    opt.refine_tol = get_number_or(j, where, "refine_tol", opt.refine_tol);
    opt.flatness_floor = get_number_or(j, where, "flatness_floor", opt.flatness_floor);
    opt.exclusion_radius =
        get_number_or(j, where, "exclusion_radius", opt.exclusion_radius);
    return opt;
}

const std::set<std::string> kEstimateKeys = {
    "method",     "u_grid",         "scan_points",      "refine_tol",
    "flatness_floor", "exclusion_radius", "search_lo",  "search_hi",
    "epsilon_cf", "demean"};

EstimateSettings estimate_from_json(const json& j) {
    const std::string where = "estimate";
    check_keys(j, where, kEstimateKeys);
    EstimateSettings s;
    s.method = j.contains("method") ? get_string(j, where, "method") : s.method;
    if (s.method != "lemma1" && s.method != "theorem1")
        fail(where, "method must be 'lemma1' or 'theorem1'");
    s.options = options_from_json(j, where);
    s.search.first = get_number_or(j, where, "search_lo", s.search.first);
    s.search.second = get_number_or(j, where, "search_hi", s.search.second);
    s.options.search_lo = s.search.first;
    s.options.search_hi = s.search.second;
    s.epsilon_cf = get_number_or(j, where, "epsilon_cf", s.epsilon_cf);
    s.demean = get_bool_or(j, where, "demean", false);
    return s;
}

} // namespace

Config parse_config(const json& j) {
    check_keys(j, "config",
               {"model", "simulate", "estimate", "equivalence", "montecarlo"});
    if (!j.contains("model"))
        fail("config", "missing 'model' section");

    Config cfg;
    cfg.model = model_spec_from_json(j.at("model"));

    if (j.contains("simulate")) {
        const json& s = j.at("simulate");
        check_keys(s, "simulate", {"n", "seed", "keep_components"});
        SimulateSettings ss;
        ss.n = get_int(s, "simulate", "n");
        ss.seed = static_cast<std::uint64_t>(get_int_or(s, "simulate", "seed", 1));
        ss.keep_components = get_bool_or(s, "simulate", "keep_components", false);
        cfg.simulate = ss;
    }
    if (j.contains("estimate"))
        cfg.estimate = estimate_from_json(j.at("estimate"));
    if (j.contains("equivalence")) {
        const json& e = j.at("equivalence");
        check_keys(e, "equivalence", {"candidate_a1"});
        EquivalenceSettings es;
        es.candidate_a1 = get_number(e, "equivalence", "candidate_a1");
        cfg.equivalence = es;
    }
    if (j.contains("montecarlo")) {
        const json& m = j.at("montecarlo");
        check_keys(m, "montecarlo",
                   {"procedure", "n", "replications", "base_seed", "threads"});
        MontecarloSettings ms;
        ms.procedure = get_string(m, "montecarlo", "procedure");
        procedure_from_name(ms.procedure);
        ms.n = get_int_or(m, "montecarlo", "n", ms.n);
        ms.replications = get_int_or(m, "montecarlo", "replications", 1);
        ms.base_seed =
            static_cast<std::uint64_t>(get_int_or(m, "montecarlo", "base_seed", 1));
        ms.threads = get_int_or(m, "montecarlo", "threads", 1);
        cfg.montecarlo = ms;
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config: JSON parse error in '" + path + "': " + e.what());
    }
    return parse_config(j);
}

ExperimentConfig experiment_config(const Config& cfg) {
    if (!cfg.montecarlo)
        throw ValidationError("config: missing 'montecarlo' section");
    ExperimentConfig out;
    out.spec = cfg.model;
    out.procedure = procedure_from_name(cfg.montecarlo->procedure);
    out.n = cfg.montecarlo->n;
    out.replications = cfg.montecarlo->replications;
    out.base_seed = cfg.montecarlo->base_seed;
    out.threads = cfg.montecarlo->threads;
    if (cfg.estimate) {
        out.estimate = cfg.estimate->options;
        out.search = cfg.estimate->search;
    }
    if (cfg.equivalence)
        out.candidate_a1 = cfg.equivalence->candidate_a1;
    return out;
}

} // namespace edid
