#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defcast/defcast.hpp"

using namespace defcast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBoundViolation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;

void print_summary(const Trace& trace) {
    std::printf("steps: %zu  cum_loss: %.6f\n", trace.rows.size(),
                trace.rows.empty() ? 0.0 : trace.rows.back().cum_loss);
    for (const BoundCheck& check : trace.summary) {
        if (std::isnan(check.eps))
            std::printf("  [%s] %-20s lhs=%.6g rhs=%.6g\n", check.pass ? "pass" : "FAIL",
                        check.name.c_str(), check.lhs, check.rhs);
        else
            std::printf("  [%s] %-20s eps=%-8g lhs=%.6g rhs=%.6g\n", check.pass ? "pass" : "FAIL",
                        check.name.c_str(), check.eps, check.lhs, check.rhs);
    }
    if (trace.aborted) std::printf("  ABORTED: %s\n", trace.abort_reason.c_str());
}

int run_simulate(const std::string& config_path, bool verify, const std::string& seed_flag,
                 const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    if (verify) cfg.verify = true;
    if (const char* env_seed = std::getenv("DEFCAST_SEED"))
        cfg.seed = std::strtoull(env_seed, nullptr, 10);
    if (!seed_flag.empty()) cfg.seed = std::strtoull(seed_flag.c_str(), nullptr, 10);
    Trace trace = run(cfg);
    std::string dir = !out_dir.empty() ? out_dir : cfg.output_dir;
    if (!dir.empty()) {
        emit(trace, dir);
        std::printf("wrote %s/trace.csv and meta.json\n", dir.c_str());
    }
    print_summary(trace);
    if (trace.aborted) return kExitInfeasible;
    return trace.all_pass() ? kExitOk : kExitBoundViolation;
}

int run_bounds(double t, int n, double eps, int delta_points, double l_eps) {
    std::vector<double> delta_grid = default_delta_grid(delta_points);
    double best_eq10 = min_bound_eq10(t, n, eps, delta_grid);
    std::printf("bound report  T=%g  N=%d  eps=%g\n", t, n, eps);
    std::printf("  %-12s %12.2f\n", "thm1", bound_thm1(t, n));
    std::printf("  %-12s %12.2f\n", "eq6", bound_eq6(t, eps));
    std::printf("  %-12s %12.2f\n", "eq9", bound_eq9(t, n));
    std::printf("  %-12s %12.2f  (min over %d deltas)\n", "eq10_min", best_eq10, delta_points);
    std::printf("  %-12s %12.2f  (c=1)\n", "kv", bound_kv(t, eps, 1.0));
    std::printf("  %-12s %12.2f  (c=1, eta=1, L_eps=%g)\n", "aa", bound_aa(l_eps, eps, 1.0, 1.0),
                l_eps);
    if (t >= 16)
        std::printf("  %-12s %12.2f  (reference only)\n", "eq4_ref", bound_eq4_reference(t, eps));
    std::printf("  %-12s %12.2f  (reference only)\n", "eq1_ref", bound_eq1_reference(t, n, eps));
    CrossoverResult cross = crossover(n, eps, delta_grid);
    if (cross.found)
        std::printf("  crossover T* = %.0f  (1e6 ln^4 N = %.3g)\n", cross.t_star,
                    1e6 * std::pow(std::log(static_cast<double>(n)), 4));
    else
        std::printf("  crossover not found in search range\n");
    return kExitOk;
}

int run_verify_levin(int omega_size, int resolution, int instances, uint64_t seed, double tol) {
    CounterRng rng(seed, 0xa11ce);
    int found = 0;
    for (int inst = 0; inst < instances; ++inst) {
        // Random finite-outcome game, predictions, and a short random history.
        int gens = 2 + static_cast<int>(rng.next_below(3));
        std::vector<Vec> generators;
        for (int g = 0; g < gens; ++g) {
            Vec row(static_cast<size_t>(omega_size));
            for (double& v : row) v = rng.next_double();
            generators.push_back(std::move(row));
        }
        std::vector<std::string> symbols;
        for (int s = 0; s < omega_size; ++s) symbols.push_back("w" + std::to_string(s));
        GameSpec game = GameSpec::finite_convex(symbols, generators);
        int experts = 2 + static_cast<int>(rng.next_below(3));
        std::vector<Decision> preds;
        for (int n = 0; n < experts; ++n) {
            Vec w(static_cast<size_t>(gens));
            double sum = 0.0;
            for (double& v : w) {
                v = 0.05 + rng.next_double();
                sum += v;
            }
            for (double& v : w) v /= sum;
            preds.push_back(Decision{std::move(w)});
        }
        PotentialState st =
            make_mixture_potential(theorem2_grid(1e-3, 8), ExpertPool::uniform(experts));
        int warmup = static_cast<int>(rng.next_below(6));
        for (int s = 0; s < warmup; ++s) {
            Vec xs(static_cast<size_t>(experts));
            for (double& x : xs) x = rng.next_double();
            st = update(std::move(st), rng.next_double(), xs);
        }
        double cap = std::exp(log_mass(st));
        Relation q = make_hoeffding_relation(st, game, preds, 3.0 / resolution);
        LevinResult res = levin_search(q, omega_size, resolution, cap, tol);
        std::printf("  instance %2d: %s  slack=%.3g\n", inst, res.found ? "found" : "MISSED",
                    res.slack);
        if (res.found) ++found;
    }
    std::printf("levin verification: %d/%d instances within %.0e\n", found, instances, tol);
    return found == instances ? kExitOk : kExitBoundViolation;
}

int run_compare(const std::vector<std::string>& learners, const std::string& env_kind, int n,
                int t, uint64_t seed) {
    json env_json = {{"kind", env_kind}};
    EnvironmentSpec env = parse_environment(env_json);
    int exit_code = kExitOk;
    std::printf("%-14s %12s %12s %12s\n", "learner", "cum_loss", "regret_best", "R_eps_0.25");
    for (const std::string& name : learners) {
        RunConfig cfg;
        cfg.game = GameSpec::dtol(n);
        cfg.learner.variant = parse_variant(name);
        if (cfg.learner.variant == LearnerVariant::dfa_fixed) cfg.learner.horizon = t;
        if (cfg.learner.variant == LearnerVariant::hedge)
            cfg.learner.eta = std::sqrt(8.0 * std::log(static_cast<double>(n)) / t);
        cfg.env = env;
        cfg.horizon = t;
        cfg.seed = seed;  // shared environment stream across learners
        Trace trace = run(cfg);
        if (trace.aborted) {
            std::printf("%-14s aborted: %s\n", name.c_str(), trace.abort_reason.c_str());
            exit_code = kExitInfeasible;
            continue;
        }
        ExpertPool pool = ExpertPool::uniform(n);
        Vec expert_cum(static_cast<size_t>(n), 0.0);
        for (const TraceRow& row : trace.rows)
            for (int j = 0; j < n; ++j)
                expert_cum[static_cast<size_t>(j)] += row.omega.losses[static_cast<size_t>(j)];
        double best = *std::min_element(expert_cum.begin(), expert_cum.end());
        double r25 = trace.rows.empty()
                         ? 0.0
                         : trace.rows.back().cum_loss -
                               quantile_loss(expert_cum, pool.weights, 0.25);
        std::printf("%-14s %12.4f %12.4f %12.4f\n", name.c_str(),
                    trace.rows.empty() ? 0.0 : trace.rows.back().cum_loss,
                    (trace.rows.empty() ? 0.0 : trace.rows.back().cum_loss) - best, r25);
        if (!trace.all_pass()) exit_code = kExitBoundViolation;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"defcast: defensive forecasting for decision-theoretic online learning"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run one configured protocol simulation");
    std::string config_path, seed_flag, out_dir;
    bool verify = false;
    sim->add_option("--config", config_path, "JSON run configuration")->required();
    sim->add_flag("--verify", verify, "enable inline invariant checks");
    sim->add_option("--seed", seed_flag, "override the config seed");
    sim->add_option("--out", out_dir, "output directory for trace.csv/meta.json");

    auto* bounds_cmd = app.add_subcommand("bounds", "print the closed-form bound report");
    double bt = 1000;
    int bn = 10;
    double beps = 0.1;
    int delta_points = 100;
    double l_eps = 0.0;
    bounds_cmd->add_option("--T", bt, "horizon")->required();
    bounds_cmd->add_option("--N", bn, "number of experts")->required();
    bounds_cmd->add_option("--eps", beps, "quantile")->required();
    bounds_cmd->add_option("--delta-grid", delta_points, "NormalHedge delta grid size");
    bounds_cmd->add_option("--l-eps", l_eps, "quantile loss for the AA form");

    auto* levin = app.add_subcommand("verify-levin", "run the Levin-lemma verification suite");
    int omega_size = 2, resolution = 1000, instances = 50;
    uint64_t levin_seed = 1;
    double levin_tol = 1e-2;
    levin->add_option("--omega-size", omega_size, "outcome alphabet size (2-4)");
    levin->add_option("--resolution", resolution, "simplex lattice denominator");
    levin->add_option("--instances", instances, "number of random instances");
    levin->add_option("--seed", levin_seed, "master seed");
    levin->add_option("--tol", levin_tol, "slack tolerance");

    auto* cmp = app.add_subcommand("compare", "run several learners on a shared environment");
    std::vector<std::string> learners;
    std::string env_kind = "iid_uniform";
    int cn = 4, ct = 200;
    uint64_t cseed = 1;
    cmp->add_option("--learners", learners, "comma-separated learner list")
        ->required()
        ->delimiter(',');
    cmp->add_option("--env", env_kind, "environment kind");
    cmp->add_option("--N", cn, "number of experts");
    cmp->add_option("--T", ct, "horizon");
    cmp->add_option("--seed", cseed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sim) return run_simulate(config_path, verify, seed_flag, out_dir);
        if (*bounds_cmd) return run_bounds(bt, bn, beps, delta_points, l_eps);
        if (*levin) return run_verify_levin(omega_size, resolution, instances, levin_seed, levin_tol);
        if (*cmp) return run_compare(learners, env_kind, cn, ct, cseed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const InfeasibleError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return kExitInfeasible;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
