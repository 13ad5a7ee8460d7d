#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "defcast/bounds.hpp"
#include "defcast/env.hpp"
#include "defcast/game.hpp"
#include "defcast/learners.hpp"

namespace defcast {

using nlohmann::json;

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
    GameSpec game = GameSpec::dtol(2);
    LearnerConfig learner;
    EnvironmentSpec env;
    int horizon = 100;  // T
    uint64_t seed = 0;
    Vec eps_grid;       // empty: default report grid
    size_t trace_cap = 0;
    bool verify = false;
    std::string output_dir;
};

// Report grid {1/N, 0.01, 0.05, 0.1, 0.25, 0.5, 1} clipped to (0, sum p].
inline Vec default_eps_grid(int n, double total_weight) {
    Vec grid{1.0 / n, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0};
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    Vec out;
    for (double e : grid)
        if (e > 0.0 && e <= total_weight + simplex_tol) out.push_back(e);
    return out;
}

struct TraceRow {
    int t = 0;
    double step_loss = 0.0;
    double cum_loss = 0.0;
    Vec l_eps;
    Vec r_eps;
    Vec bound_eq6_eps;
    double log_f = std::numeric_limits<double>::quiet_NaN();
    double log_capacity = std::numeric_limits<double>::quiet_NaN();
    bool cert_exact = true;
    Decision gamma;   // in-memory only, not serialized
    Outcome omega;    // in-memory only, not serialized
};

struct BoundCheck {
    std::string name;
    double eps = std::numeric_limits<double>::quiet_NaN();  // NaN when not eps-indexed
    bool pass = true;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct Trace {
    std::vector<TraceRow> rows;
    RunConfig config;
    uint64_t seed = 0;
    std::string config_hash;
    double solver_slack = 0.0;  // (1+tau)^T - 1
    double initial_log_f = 0.0;
    double max_cert_discrepancy = 0.0;
    std::vector<EtaNode> grid;  // learner grid (eq3 checks)
    int n_experts = 0;
    std::vector<BoundCheck> summary;
    bool aborted = false;
    std::string abort_reason;

    bool all_pass() const {
        for (const BoundCheck& c : summary)
            if (!c.pass) return false;
        return !aborted;
    }
};

// ---------------------------------------------------------------------------
// Deterministic decimal formatting (locale-independent).

inline std::string format_double(double v, int precision = 17) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, precision);
    return std::string(buf, res.ptr);
}

inline std::string format_shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of the run configuration.

namespace detail {

inline const json& require(const json& j, const char* key, const char* ctx) {
    if (!j.contains(key))
        throw ConfigError(std::string(ctx) + ": missing required key '" + key + "'");
    return j.at(key);
}

inline double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(std::string("expected number for '") + key + "'");
    return j.at(key).get<double>();
}

inline Vec get_vec(const json& j, const char* key) {
    Vec out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ConfigError(std::string("expected array for '") + key + "'");
    for (const json& v : j.at(key)) out.push_back(v.get<double>());
    return out;
}

}  // namespace detail

inline GameSpec parse_game(const json& j) {
    std::string kind = detail::require(j, "kind", "game").get<std::string>();
    if (kind == "dtol") {
        int n = detail::require(j, "N", "game").get<int>();
        return GameSpec::dtol(n);
    }
    if (kind == "finite_convex") {
        std::vector<std::string> outs;
        for (const json& o : detail::require(j, "outcomes", "game")) outs.push_back(o.get<std::string>());
        std::vector<Vec> gens;
        for (const json& g : detail::require(j, "generators", "game")) {
            Vec row;
            for (const json& v : g) row.push_back(v.get<double>());
            gens.push_back(std::move(row));
        }
        return GameSpec::finite_convex(std::move(outs), std::move(gens));
    }
    throw ConfigError("game.kind must be 'dtol' or 'finite_convex'");
}

inline json game_to_json(const GameSpec& g) {
    json j;
    if (g.kind == GameSpec::Kind::dtol) {
        j["kind"] = "dtol";
        j["N"] = g.n_actions;
    } else {
        j["kind"] = "finite_convex";
        j["outcomes"] = g.outcomes;
        j["generators"] = g.generators;
    }
    return j;
}

inline SolveOptions parse_solver(const json& j) {
    SolveOptions opts;
    opts.tolerance = detail::get_num(j, "tolerance", opts.tolerance);
    if (!(opts.tolerance > 0.0)) throw ConfigError("solver.tolerance must be positive");
    opts.max_iterations = static_cast<int>(detail::get_num(j, "max_iterations", opts.max_iterations));
    if (opts.max_iterations < 1) throw ConfigError("solver.max_iterations must be >= 1");
    opts.exact_cap = static_cast<int>(detail::get_num(j, "exact_cap", opts.exact_cap));
    if (opts.exact_cap < 1) throw ConfigError("solver.exact_cap must be >= 1");
    opts.sample_count = static_cast<int>(detail::get_num(j, "sample_count", opts.sample_count));
    opts.seed = static_cast<uint64_t>(detail::get_num(j, "seed", 0.0));
    if (j.contains("oracle")) {
        std::string o = j.at("oracle").get<std::string>();
        if (o == "exact")
            opts.oracle = SolveOptions::Oracle::exact_vertex;
        else if (o == "sampled")
            opts.oracle = SolveOptions::Oracle::sampled_vertex;
        else
            throw ConfigError("solver.oracle must be 'exact' or 'sampled'");
    }
    return opts;
}

inline json solver_to_json(const SolveOptions& o) {
    json j;
    j["tolerance"] = o.tolerance;
    j["max_iterations"] = o.max_iterations;
    j["oracle"] = o.oracle == SolveOptions::Oracle::exact_vertex ? "exact" : "sampled";
    j["sample_count"] = o.sample_count;
    j["exact_cap"] = o.exact_cap;
    j["seed"] = o.seed;
    return j;
}

inline LearnerVariant parse_variant(const std::string& name) {
    if (name == "dfa_fixed") return LearnerVariant::dfa_fixed;
    if (name == "dfa_mixture") return LearnerVariant::dfa_mixture;
    if (name == "fake_dfa") return LearnerVariant::fake_dfa;
    if (name == "hedge") return LearnerVariant::hedge;
    if (name == "hedge_anytime") return LearnerVariant::hedge_anytime;
    throw ConfigError("unknown learner variant '" + name + "'");
}

inline std::string variant_name(LearnerVariant v) {
    switch (v) {
        case LearnerVariant::dfa_fixed: return "dfa_fixed";
        case LearnerVariant::dfa_mixture: return "dfa_mixture";
        case LearnerVariant::fake_dfa: return "fake_dfa";
        case LearnerVariant::hedge: return "hedge";
        case LearnerVariant::hedge_anytime: return "hedge_anytime";
    }
    return "?";
}

inline LearnerConfig parse_learner(const json& j) {
    LearnerConfig cfg;
    cfg.variant = parse_variant(detail::require(j, "variant", "learner").get<std::string>());
    cfg.eta = detail::get_num(j, "eta", 0.0);
    cfg.horizon = static_cast<int>(detail::get_num(j, "horizon", 0.0));
    cfg.eta_min = detail::get_num(j, "eta_min", cfg.eta_min);
    cfg.grid_cells = static_cast<int>(detail::get_num(j, "grid_cells", cfg.grid_cells));
    cfg.i_max = static_cast<int>(detail::get_num(j, "i_max", 0.0));
    if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
    return cfg;
}

inline json learner_to_json(const LearnerConfig& c) {
    json j;
    j["variant"] = variant_name(c.variant);
    if (c.eta > 0.0) j["eta"] = c.eta;
    if (c.horizon > 0) j["horizon"] = c.horizon;
    if (c.variant == LearnerVariant::dfa_mixture) {
        j["eta_min"] = c.eta_min;
        j["grid_cells"] = c.grid_cells;
    }
    if (c.variant == LearnerVariant::fake_dfa && c.i_max > 0) j["i_max"] = c.i_max;
    j["solver"] = solver_to_json(c.solver);
    return j;
}

inline EnvironmentSpec parse_environment(const json& j) {
    EnvironmentSpec spec;
    std::string kind = detail::require(j, "kind", "environment").get<std::string>();
    if (kind == "iid_uniform") {
        spec.kind = EnvironmentSpec::Kind::iid_uniform;
    } else if (kind == "iid_bernoulli") {
        spec.kind = EnvironmentSpec::Kind::iid_bernoulli;
        spec.bernoulli_q = detail::get_vec(j, "q");
        for (double q : spec.bernoulli_q)
            if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("environment.q entries must be in [0,1]");
    } else if (kind == "alternating") {
        spec.kind = EnvironmentSpec::Kind::alternating;
    } else if (kind == "duplicated_experts") {
        spec.kind = EnvironmentSpec::Kind::duplicated_experts;
        spec.copies = static_cast<int>(detail::get_num(j, "copies", 2));
        if (spec.copies < 1) throw ConfigError("duplicated_experts.copies must be >= 1");
        spec.base = std::make_shared<EnvironmentSpec>(
            parse_environment(detail::require(j, "base", "environment")));
        if (spec.base->kind == EnvironmentSpec::Kind::adaptive_worst_case)
            throw ConfigError("duplicated_experts: adaptive base is not supported");
    } else if (kind == "many_good_experts") {
        spec.kind = EnvironmentSpec::Kind::many_good_experts;
        spec.good_fraction = detail::get_num(j, "good_fraction", spec.good_fraction);
        spec.gap = detail::get_num(j, "gap", spec.gap);
    } else if (kind == "adaptive_worst_case") {
        spec.kind = EnvironmentSpec::Kind::adaptive_worst_case;
    } else {
        throw ConfigError("unknown environment kind '" + kind + "'");
    }
    return spec;
}

inline json environment_to_json(const EnvironmentSpec& s) {
    json j;
    switch (s.kind) {
        case EnvironmentSpec::Kind::iid_uniform: j["kind"] = "iid_uniform"; break;
        case EnvironmentSpec::Kind::iid_bernoulli:
            j["kind"] = "iid_bernoulli";
            if (!s.bernoulli_q.empty()) j["q"] = s.bernoulli_q;
            break;
        case EnvironmentSpec::Kind::alternating: j["kind"] = "alternating"; break;
        case EnvironmentSpec::Kind::duplicated_experts:
            j["kind"] = "duplicated_experts";
            j["copies"] = s.copies;
            j["base"] = environment_to_json(*s.base);
            break;
        case EnvironmentSpec::Kind::many_good_experts:
            j["kind"] = "many_good_experts";
            j["good_fraction"] = s.good_fraction;
            j["gap"] = s.gap;
            break;
        case EnvironmentSpec::Kind::adaptive_worst_case: j["kind"] = "adaptive_worst_case"; break;
    }
    return j;
}

inline RunConfig parse_config(const json& j) {
    RunConfig cfg;
    cfg.game = parse_game(detail::require(j, "game", "config"));
    cfg.learner = parse_learner(detail::require(j, "learner", "config"));
    cfg.env = parse_environment(detail::require(j, "environment", "config"));
    cfg.horizon = detail::require(j, "T", "config").get<int>();
    if (cfg.horizon < 0) throw ConfigError("T must be >= 0");
    cfg.seed = static_cast<uint64_t>(detail::get_num(j, "seed", 0.0));
    cfg.eps_grid = detail::get_vec(j, "eps_grid");
    for (double e : cfg.eps_grid)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("eps_grid entries must be in (0,1]");
    cfg.learner.weights = detail::get_vec(j, "weights");
    cfg.trace_cap = static_cast<size_t>(detail::get_num(j, "trace_cap", 0.0));
    if (j.contains("verify")) cfg.verify = j.at("verify").get<bool>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (cfg.game.kind != GameSpec::Kind::dtol)
        throw ConfigError("simulate drives dtol games; finite_convex games are library-level");
    if (cfg.learner.variant == LearnerVariant::dfa_fixed && cfg.learner.horizon == 0 &&
        !(cfg.learner.eta > 0.0))
        cfg.learner.horizon = cfg.horizon;
    return cfg;
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["game"] = game_to_json(c.game);
    j["learner"] = learner_to_json(c.learner);
    j["environment"] = environment_to_json(c.env);
    j["T"] = c.horizon;
    j["seed"] = c.seed;
    if (!c.eps_grid.empty()) j["eps_grid"] = c.eps_grid;
    if (!c.learner.weights.empty()) j["weights"] = c.learner.weights;
    if (c.trace_cap > 0) j["trace_cap"] = c.trace_cap;
    j["verify"] = c.verify;
    if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

inline std::string config_hash(const RunConfig& c) {
    std::string dump = config_to_json(c).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Run loop.

inline Trace run(const RunConfig& config) {
    const int n = config.game.n_actions;
    Trace trace;
    trace.config = config;
    trace.seed = config.seed;
    trace.config_hash = config_hash(config);
    trace.n_experts = n;

    LearnerConfig lc = config.learner;
    lc.verify_certificates = lc.verify_certificates || config.verify;
    Learner learner(lc, config.game, n);
    ExpertPool pool = learner.pool();
    Vec eps_grid = config.eps_grid.empty() ? default_eps_grid(n, pool.total()) : config.eps_grid;
    Environment env(config.env, n, config.seed);
    ProtocolState proto = make_protocol_state(n, config.trace_cap);

    trace.grid = learner.grid();
    trace.initial_log_f = learner.has_potential() ? learner.potential().log_f_cached
                                                  : std::numeric_limits<double>::quiet_NaN();
    trace.solver_slack = std::expm1(config.horizon * std::log1p(lc.solver.tolerance));

    Environment::AdversaryHook hook = [&](const Decision& g) {
        return learner.adversarial_outcome(g);
    };

    for (int t = 1; t <= config.horizon; ++t) {
        Decision gamma;
        try {
            gamma = learner.decide();
        } catch (const InfeasibleError& e) {
            trace.aborted = true;
            trace.abort_reason = e.what();
            break;
        }
        Outcome omega = env.next(t, gamma, hook);
        StepRecord rec = learner.observe(gamma, omega);
        proto = advance(proto, config.game, gamma, omega);

        TraceRow row;
        row.t = t;
        row.step_loss = rec.step_loss;
        row.cum_loss = proto.cum_loss;
        for (double eps : eps_grid) {
            QuantileQuery q = quantile_regret(proto, pool, eps);
            row.l_eps.push_back(q.loss);
            row.r_eps.push_back(q.regret);
            row.bound_eq6_eps.push_back(bound_eq6(t, eps));
        }
        row.log_f = rec.log_f;
        row.log_capacity = rec.log_capacity_used;
        row.cert_exact = rec.cert_exact;
        row.gamma = gamma;
        row.omega = omega;
        trace.rows.push_back(std::move(row));
    }
    trace.max_cert_discrepancy = learner.max_certificate_discrepancy();

    // Asserted bounds, per variant. Thresholds are inflated by the
    // accumulated per-step solver slack (1+tau)^T.
    const double slack = trace.solver_slack;
    const double step_tol = std::log1p(lc.solver.tolerance);
    auto add_check = [&](std::string name, double eps, bool pass, double lhs, double rhs) {
        trace.summary.push_back(BoundCheck{std::move(name), eps, pass, lhs, rhs});
    };

    if (!trace.rows.empty() && learner.has_potential()) {
        const auto& rows = trace.rows;
        if (lc.variant == LearnerVariant::dfa_fixed || lc.variant == LearnerVariant::dfa_mixture) {
            double worst_gap = neg_inf;
            double prev = trace.initial_log_f;
            for (const TraceRow& row : rows) {
                worst_gap = std::max(worst_gap, row.log_f - prev);
                prev = row.log_f;
            }
            add_check("f_nonincreasing", std::numeric_limits<double>::quiet_NaN(),
                      worst_gap <= step_tol, worst_gap, step_tol);
        }
        if (lc.variant == LearnerVariant::dfa_fixed && lc.horizon == config.horizon &&
            static_cast<int>(rows.size()) == config.horizon) {
            double best = *std::min_element(proto.expert_cum.begin(), proto.expert_cum.end());
            double regret = proto.cum_loss - best;
            double limit = bound_thm1(config.horizon, n) * (1.0 + slack);
            add_check("thm1", std::numeric_limits<double>::quiet_NaN(), regret <= limit, regret,
                      limit);
        }
        if (lc.variant == LearnerVariant::dfa_mixture) {
            for (size_t j = 0; j < eps_grid.size(); ++j) {
                const TraceRow& last = rows.back();
                Eq3Check chk = check_eq3_discrete(last.cum_loss, last.l_eps[j], last.t,
                                                  trace.grid, eps_grid[j], slack);
                add_check("eq3_discrete", eps_grid[j], chk.ok, chk.value,
                          (1.0 / eps_grid[j]) * (1.0 + slack));
            }
        }
        if (lc.variant == LearnerVariant::fake_dfa) {
            double max_log_cap = neg_inf;
            for (const TraceRow& row : rows) max_log_cap = std::max(max_log_cap, row.log_capacity);
            add_check("capacity_le_1", std::numeric_limits<double>::quiet_NaN(),
                      max_log_cap <= 1e-12, std::exp(max_log_cap), 1.0);
            bool concave_ok = true;
            double worst_excess = neg_inf;
            for (size_t i = 0; i + 1 < rows.size(); ++i) {
                double ratio = std::sqrt(static_cast<double>(rows[i].t)) /
                               std::sqrt(static_cast<double>(rows[i].t + 1));
                double excess = rows[i + 1].log_capacity - ratio * rows[i].log_f;
                worst_excess = std::max(worst_excess, excess);
                if (excess > std::log1p(1e-9)) concave_ok = false;
            }
            add_check("capacity_concavity", std::numeric_limits<double>::quiet_NaN(), concave_ok,
                      worst_excess, std::log1p(1e-9));
            for (size_t j = 0; j < eps_grid.size(); ++j) {
                bool ok = true;
                double worst = neg_inf;
                for (const TraceRow& row : rows) {
                    double limit = row.bound_eq6_eps[j] * (1.0 + slack);
                    worst = std::max(worst, row.r_eps[j] - limit);
                    if (row.r_eps[j] > limit) ok = false;
                }
                add_check("eq6_uniform", eps_grid[j], ok, worst, 0.0);
            }
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Emission: CSV trace plus JSON metadata sidecar.

inline std::string csv_header(const Trace& trace, const Vec& eps_grid) {
    std::ostringstream out;
    out << "t,step_loss,cum_loss";
    for (double eps : eps_grid) {
        std::string label = format_shortest(eps);
        out << ",L_eps_" << label << ",R_eps_" << label << ",bound_eq6_" << label;
    }
    out << ",log_f,C_t,cert_exact";
    return out.str();
}

inline Vec trace_eps_grid(const Trace& trace) {
    if (!trace.config.eps_grid.empty()) return trace.config.eps_grid;
    double total = 0.0;
    if (!trace.config.learner.weights.empty())
        for (double w : trace.config.learner.weights) total += w;
    else
        total = 1.0;
    return default_eps_grid(trace.n_experts, total);
}

inline std::string render_csv(const Trace& trace) {
    Vec eps_grid = trace_eps_grid(trace);
    std::ostringstream out;
    out << csv_header(trace, eps_grid) << "\n";
    for (const TraceRow& row : trace.rows) {
        out << row.t << ',' << format_double(row.step_loss) << ',' << format_double(row.cum_loss);
        for (size_t j = 0; j < eps_grid.size(); ++j)
            out << ',' << format_double(row.l_eps[j]) << ',' << format_double(row.r_eps[j]) << ','
                << format_double(row.bound_eq6_eps[j]);
        out << ',' << format_double(row.log_f) << ','
            << format_double(std::exp(row.log_capacity)) << ',' << (row.cert_exact ? 1 : 0)
            << "\n";
    }
    return out.str();
}

inline json metadata_json(const Trace& trace) {
    json meta;
    meta["config"] = config_to_json(trace.config);
    meta["config_hash"] = trace.config_hash;
    meta["seed"] = trace.seed;
    meta["solver_slack"] = {{"tolerance", trace.config.learner.solver.tolerance},
                            {"accumulated", trace.solver_slack}};
    meta["steps"] = trace.rows.size();
    meta["aborted"] = trace.aborted;
    if (trace.aborted) meta["abort_reason"] = trace.abort_reason;
    meta["max_cert_discrepancy"] = trace.max_cert_discrepancy;
    json checks = json::array();
    for (const BoundCheck& c : trace.summary) {
        json entry;
        entry["name"] = c.name;
        if (!std::isnan(c.eps)) entry["eps"] = c.eps;
        entry["pass"] = c.pass;
        entry["lhs"] = c.lhs;
        entry["rhs"] = c.rhs;
        checks.push_back(std::move(entry));
    }
    meta["bounds"] = std::move(checks);
    meta["pass"] = trace.all_pass();
    return meta;
}

inline void emit(const Trace& trace, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(std::filesystem::path(dir) / "trace.csv", std::ios::binary);
        if (!out) throw std::runtime_error("emit: cannot write trace.csv in " + dir);
        out << render_csv(trace);
    }
    {
        std::ofstream out(std::filesystem::path(dir) / "meta.json", std::ios::binary);
        if (!out) throw std::runtime_error("emit: cannot write meta.json in " + dir);
        out << metadata_json(trace).dump(2) << "\n";
    }
}

}  // namespace defcast
