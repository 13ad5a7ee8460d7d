// Acceptance suite: runs every bound the library asserts at desk scale and
// prints one pass/fail line per criterion. Exit code 0 iff everything holds.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "defcast/defcast.hpp"

using namespace defcast;

namespace {

struct Aggregate {
    int runs = 0;
    int aborted = 0;
    double max_cert_discrepancy = 0.0;
};

Aggregate g_agg;
int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    if (!pass) ++g_failures;
}

std::vector<EnvironmentSpec> environment_suite() {
    std::vector<EnvironmentSpec> suite;
    EnvironmentSpec e;
    e.kind = EnvironmentSpec::Kind::iid_uniform;
    suite.push_back(e);
    e = EnvironmentSpec{};
    e.kind = EnvironmentSpec::Kind::iid_bernoulli;
    e.bernoulli_q = {0.25, 0.75, 0.5, 0.9};
    suite.push_back(e);
    e = EnvironmentSpec{};
    e.kind = EnvironmentSpec::Kind::alternating;
    suite.push_back(e);
    e = EnvironmentSpec{};
    e.kind = EnvironmentSpec::Kind::many_good_experts;
    e.good_fraction = 0.5;
    e.gap = 0.3;
    suite.push_back(e);
    e = EnvironmentSpec{};
    e.kind = EnvironmentSpec::Kind::adaptive_worst_case;
    suite.push_back(e);
    return suite;
}

RunConfig suite_config(LearnerVariant variant, int n, int t, const EnvironmentSpec& env,
                       uint64_t seed) {
    RunConfig cfg;
    cfg.game = GameSpec::dtol(n);
    cfg.learner.variant = variant;
    if (variant == LearnerVariant::dfa_fixed) cfg.learner.horizon = t;
    cfg.learner.grid_cells = 32;
    cfg.env = env;
    cfg.horizon = t;
    cfg.seed = seed;
    cfg.verify = true;
    return cfg;
}

Trace tracked_run(const RunConfig& cfg) {
    Trace trace = run(cfg);
    ++g_agg.runs;
    if (trace.aborted) ++g_agg.aborted;
    g_agg.max_cert_discrepancy = std::max(g_agg.max_cert_discrepancy, trace.max_cert_discrepancy);
    return trace;
}

bool summary_pass(const Trace& trace, const std::string& name) {
    bool seen = false;
    for (const BoundCheck& c : trace.summary)
        if (c.name == name) {
            if (!c.pass) return false;
            seen = true;
        }
    return seen;
}

// Criterion 1 + 3: supermartingale decrease for dfa_fixed/dfa_mixture over
// the suite, plus the uniform-in-time discrete eta-integral check on every
// mixture run.
void criterion_1_and_3() {
    const int t_max = 1000;
    bool decrease_ok = true;
    bool eq3_ok = true;
    double worst_excess = -1e300;
    int runs = 0;
    double timed_run_seconds = 0.0;
    for (LearnerVariant variant : {LearnerVariant::dfa_fixed, LearnerVariant::dfa_mixture}) {
        for (int n : {2, 4, 8}) {
            int env_index = 0;
            for (const EnvironmentSpec& env : environment_suite()) {
                for (uint64_t seed : {1ULL, 2ULL}) {
                    RunConfig cfg =
                        suite_config(variant, n, t_max, env, seed * 1000 + n * 10 + env_index);
                    auto t0 = std::chrono::steady_clock::now();
                    Trace trace = tracked_run(cfg);
                    auto t1 = std::chrono::steady_clock::now();
                    if (variant == LearnerVariant::dfa_mixture && n == 8 && env_index == 0 &&
                        seed == 1)
                        timed_run_seconds = std::chrono::duration<double>(t1 - t0).count();
                    ++runs;
                    if (trace.aborted || !summary_pass(trace, "f_nonincreasing"))
                        decrease_ok = false;
                    double prev = trace.initial_log_f;
                    for (const TraceRow& row : trace.rows) {
                        worst_excess = std::max(worst_excess, row.log_f - prev -
                                                                  std::log1p(1e-9));
                        prev = row.log_f;
                    }
                    if (variant == LearnerVariant::dfa_mixture) {
                        Vec eps_grid = trace_eps_grid(trace);
                        for (const TraceRow& row : trace.rows) {
                            double slack = std::expm1(row.t * std::log1p(1e-9));
                            for (size_t j = 0; j < eps_grid.size(); ++j) {
                                Eq3Check chk =
                                    check_eq3_discrete(row.cum_loss, row.l_eps[j], row.t,
                                                       trace.grid, eps_grid[j], slack);
                                if (!chk.ok) eq3_ok = false;
                            }
                        }
                    }
                }
                ++env_index;
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "(%d runs, worst step excess %.2e, N=8 K=32 run %.2fs < 60s)", runs,
                  worst_excess, timed_run_seconds);
    report(1, "supermartingale decrease", decrease_ok && timed_run_seconds < 60.0, detail);
    report(3, "theorem 2 discrete eq3", eq3_ok, "(every prefix, every eps, every mixture run)");
}

void criterion_2() {
    const int t_max = 200;
    bool ok = true;
    double worst_margin = -1e300;
    int runs = 0;
    std::vector<EnvironmentSpec> envs = environment_suite();  // random + adversarial kinds
    for (int n : {2, 4, 8}) {
        int env_index = 0;
        for (const EnvironmentSpec& env : envs) {
            for (uint64_t seed : {11ULL, 12ULL}) {
                RunConfig cfg =
                    suite_config(LearnerVariant::dfa_fixed, n, t_max, env, seed + env_index);
                Trace trace = tracked_run(cfg);
                ++runs;
                if (trace.aborted || !summary_pass(trace, "thm1")) ok = false;
                for (const BoundCheck& c : trace.summary)
                    if (c.name == "thm1") worst_margin = std::max(worst_margin, c.lhs - c.rhs);
            }
            ++env_index;
        }
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(%d runs, worst regret-bound gap %.3f)", runs,
                  worst_margin);
    report(2, "theorem 1 reproduction", ok, detail);
}

void criterion_4() {
    const int t_max = 1000;
    bool ok = true;
    double worst_capacity = -1e300;
    int runs = 0;
    for (int n : {2, 4, 8}) {
        int env_index = 0;
        for (const EnvironmentSpec& env : environment_suite()) {
            for (uint64_t seed : {21ULL, 22ULL}) {
                RunConfig cfg = suite_config(LearnerVariant::fake_dfa, n, t_max, env,
                                             seed * 100 + n + env_index);
                Trace trace = tracked_run(cfg);
                ++runs;
                if (trace.aborted) ok = false;
                for (const TraceRow& row : trace.rows) {
                    worst_capacity = std::max(worst_capacity, row.log_capacity);
                    if (!(row.log_capacity <= 1e-12)) ok = false;
                }
                for (size_t i = 0; i + 1 < trace.rows.size(); ++i) {
                    double ratio = std::sqrt(static_cast<double>(trace.rows[i].t)) /
                                   std::sqrt(static_cast<double>(trace.rows[i].t + 1));
                    if (!(trace.rows[i + 1].log_capacity <=
                          ratio * trace.rows[i].log_f + std::log1p(1e-9)))
                        ok = false;
                }
                Vec eps_grid = trace_eps_grid(trace);
                for (const TraceRow& row : trace.rows)
                    for (size_t j = 0; j < eps_grid.size(); ++j)
                        if (!(row.r_eps[j] <= row.bound_eq6_eps[j])) ok = false;
            }
            ++env_index;
        }
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(%d runs, max C_T %.12f)", runs,
                  std::exp(worst_capacity));
    report(4, "theorem 3 capacity + eq6", ok, detail);
}

void criterion_5() {
    CounterRng rng(20260810, 5);
    const int samples = 100000;
    const int atoms = 5;
    int pass_pairs = 0;
    const int pairs = 100;
    for (int pair = 0; pair < pairs; ++pair) {
        int n = 2 + static_cast<int>(rng.next_below(7));
        // Random potential state: only its eta grid matters for the term.
        PotentialState st;
        switch (rng.next_below(3)) {
            case 0: st = make_fixed_potential(rng.uniform(0.05, 1.0), ExpertPool::uniform(n)); break;
            case 1:
                st = make_mixture_potential(theorem2_grid(1e-3, 4 + static_cast<int>(rng.next_below(5))),
                                            ExpertPool::uniform(n));
                break;
            default: st = make_theorem3_potential(2 + static_cast<int>(rng.next_below(3)),
                                                  ExpertPool::uniform(n));
        }
        StepPrep prep = prepare_step(st);
        // pi: random mixture of point outcomes with an exactly computable mean.
        std::vector<Vec> atom_losses;
        Vec atom_weight(atoms);
        double wsum = 0.0;
        for (int a = 0; a < atoms; ++a) {
            Vec v(static_cast<size_t>(n));
            for (double& x : v) x = rng.next_double();
            atom_losses.push_back(std::move(v));
            atom_weight[static_cast<size_t>(a)] = 0.1 + rng.next_double();
            wsum += atom_weight[static_cast<size_t>(a)];
        }
        for (double& w : atom_weight) w /= wsum;
        Vec mean(static_cast<size_t>(n), 0.0);
        for (int a = 0; a < atoms; ++a)
            for (int j = 0; j < n; ++j)
                mean[static_cast<size_t>(j)] +=
                    atom_weight[static_cast<size_t>(a)] * atom_losses[static_cast<size_t>(a)][static_cast<size_t>(j)];
        std::vector<int> face = best_response(MeanOutcome{mean}, GameSpec::dtol(n));
        Decision gamma = face_centroid(face, n);
        // Multinomial draw over atoms stands in for the outcome sample.
        std::vector<long> counts(atoms, 0);
        for (int s = 0; s < samples; ++s) {
            double u = rng.next_double();
            double acc = 0.0;
            for (int a = 0; a < atoms; ++a) {
                acc += atom_weight[static_cast<size_t>(a)];
                if (u < acc || a + 1 == atoms) {
                    ++counts[static_cast<size_t>(a)];
                    break;
                }
            }
        }
        bool pair_ok = true;
        for (int k = 0; k < prep.nodes && pair_ok; ++k) {
            double eta = prep.eta[static_cast<size_t>(k)];
            for (int gp = 0; gp < n && pair_ok; ++gp) {
                double m1 = 0.0, m2 = 0.0;
                for (int a = 0; a < atoms; ++a) {
                    double learner_loss = dot(gamma.weights, atom_losses[static_cast<size_t>(a)]);
                    double term = std::exp(hoeffding_exponent(
                        eta, learner_loss, atom_losses[static_cast<size_t>(a)][static_cast<size_t>(gp)]));
                    double frac = static_cast<double>(counts[static_cast<size_t>(a)]) / samples;
                    m1 += frac * term;
                    m2 += frac * term * term;
                }
                double se = std::sqrt(std::max(0.0, m2 - m1 * m1) / samples);
                if (!(m1 <= 1.0 + 3.0 * se)) pair_ok = false;
            }
        }
        if (pair_ok) ++pass_pairs;
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(%d/%d pairs within 1+3SE, %d samples each)",
                  pass_pairs, pairs, samples);
    report(5, "lemma 8 monte carlo", pass_pairs >= 99, detail);
}

void criterion_6() {
    auto t0 = std::chrono::steady_clock::now();
    CounterRng rng(606, 6);
    const int resolution = 1000;
    int found = 0;
    const int instances = 50;
    for (int inst = 0; inst < instances; ++inst) {
        int gens = 2 + static_cast<int>(rng.next_below(3));
        std::vector<Vec> generators;
        for (int g = 0; g < gens; ++g)
            generators.push_back(Vec{rng.next_double(), rng.next_double()});
        GameSpec game = GameSpec::finite_convex({"h", "t"}, generators);
        int experts = 2 + static_cast<int>(rng.next_below(3));
        std::vector<Decision> preds;
        for (int e = 0; e < experts; ++e) {
            Vec w(static_cast<size_t>(gens));
            double sum = 0;
            for (double& v : w) {
                v = 0.05 + rng.next_double();
                sum += v;
            }
            for (double& v : w) v /= sum;
            preds.push_back(Decision{std::move(w)});
        }
        PotentialState st =
            make_mixture_potential(theorem2_grid(1e-3, 8), ExpertPool::uniform(experts));
        int warmup = static_cast<int>(rng.next_below(8));
        for (int s = 0; s < warmup; ++s) {
            Vec xs(static_cast<size_t>(experts));
            for (double& x : xs) x = rng.next_double();
            st = update(std::move(st), rng.next_double(), xs);
        }
        double cap = std::exp(log_mass(st));
        Relation q = make_hoeffding_relation(st, game, preds, 3.0 / resolution);
        LevinResult res = levin_search(q, 2, resolution, cap, 1e-2);
        if (res.found) ++found;
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(%d/%d found at resolution 1e3, %.1fs < 30s)", found,
                  instances, seconds);
    report(6, "levin verification", found == instances && seconds < 30.0, detail);
}

void criterion_7() {
    bool ok = true;
    for (double lg : {10.0, 20.0}) {
        auto grid = theorem2_grid(std::exp(-lg), 64);
        double mass = 0.0;
        for (const EtaNode& node : grid) mass += node.weight;
        if (std::abs(mass - (1.0 - 1.0 / lg)) > 1e-12) ok = false;
    }
    // Partial Basel sum in reverse order plus the Euler-Maclaurin tail; the
    // bare partial sum is 6e-7 short at i_max = 1e6, so the tail closes the
    // identity 1/c = sum 1/i^2 to full precision.
    const double m = 1e6;
    double partial = 0.0;
    for (long i = 1000000; i >= 1; --i) partial += 1.0 / (static_cast<double>(i) * i);
    double tail = 1.0 / m - 1.0 / (2 * m * m) + 1.0 / (6 * m * m * m);
    double total = basel_weight() * (partial + tail);
    if (std::abs(total - 1.0) > 1e-12) ok = false;
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(grid mass exact; c*(sum+tail)-1 = %.2e)", total - 1.0);
    report(7, "measure normalization", ok, detail);
}

void criterion_8() {
    const int n = 4;
    const int t_max = 300;
    bool ok = true;
    double worst_diff = 0.0;
    std::vector<EnvironmentSpec> envs;
    EnvironmentSpec e;
    e.kind = EnvironmentSpec::Kind::iid_uniform;
    envs.push_back(e);
    e.kind = EnvironmentSpec::Kind::alternating;
    envs.push_back(e);
    for (const EnvironmentSpec& env : envs) {
        RunConfig base_cfg = suite_config(LearnerVariant::fake_dfa, n, t_max, env, 808);
        base_cfg.learner.i_max = 3;
        Trace base = tracked_run(base_cfg);
        ExpertPool base_pool = ExpertPool::uniform(n);
        for (int copies : {2, 4}) {
            RunConfig dup_cfg = base_cfg;
            dup_cfg.game = GameSpec::dtol(n * copies);
            dup_cfg.learner.weights.assign(static_cast<size_t>(n * copies),
                                           1.0 / (n * copies));
            dup_cfg.env = EnvironmentSpec{};
            dup_cfg.env.kind = EnvironmentSpec::Kind::duplicated_experts;
            dup_cfg.env.copies = copies;
            dup_cfg.env.base = std::make_shared<EnvironmentSpec>(env);
            Trace dup = tracked_run(dup_cfg);
            if (dup.rows.size() != base.rows.size()) {
                ok = false;
                continue;
            }
            for (double eps : {0.25, 0.5}) {
                Vec base_cum(static_cast<size_t>(n), 0.0);
                Vec dup_cum(static_cast<size_t>(n * copies), 0.0);
                for (size_t i = 0; i < base.rows.size(); ++i) {
                    for (int j = 0; j < n; ++j)
                        base_cum[static_cast<size_t>(j)] +=
                            base.rows[i].omega.losses[static_cast<size_t>(j)];
                    for (int j = 0; j < n * copies; ++j)
                        dup_cum[static_cast<size_t>(j)] +=
                            dup.rows[i].omega.losses[static_cast<size_t>(j)];
                }
                double base_r = base.rows.back().cum_loss -
                                quantile_loss(base_cum, base_pool.weights, eps);
                double dup_r =
                    dup.rows.back().cum_loss -
                    quantile_loss(dup_cum, Vec(static_cast<size_t>(n * copies), 1.0 / (n * copies)),
                                  eps);
                worst_diff = std::max(worst_diff, std::abs(base_r - dup_r));
                if (!(std::abs(base_r - dup_r) <= 1e-9)) ok = false;
            }
            // Nominal-N baseline strictly worsens under duplication.
            if (!(bound_eq9(t_max, n * copies) > bound_eq9(t_max, n))) ok = false;
        }
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(max |R_eps difference| %.2e over k in {2,4})",
                  worst_diff);
    report(8, "duplication invariance", ok, detail);
}

void criterion_9() {
    std::vector<double> delta_grid = default_delta_grid();
    bool sign_ok = bound_eq6(1e5, 0.05) < min_bound_eq10(1e5, 100, 0.05, delta_grid);
    bool ok = sign_ok;
    std::string log_lines;
    for (int n : {10, 100, 1000}) {
        CrossoverResult res = crossover(n, 0.01, delta_grid);
        if (!res.found) ok = false;
        double reference = 1e6 * std::pow(std::log(static_cast<double>(n)), 4);
        char line[120];
        std::snprintf(line, sizeof(line), " N=%d: T*=%.3g vs 1e6 ln^4 N=%.3g (ratio %.2f)", n,
                      res.t_star, reference, res.t_star / reference);
        log_lines += line;
    }
    std::printf("      crossover log:%s\n", log_lines.c_str());
    report(9, "crossover analysis", ok, sign_ok ? "(eq6 < min eq10 at N=100, eps=0.05, T=1e5)"
                                                : "(sign check failed)");
}

void criterion_10() {
    char detail[120];
    std::snprintf(detail, sizeof(detail), "(%d runs, %d infeasible, max cert discrepancy %.2e)",
                  g_agg.runs, g_agg.aborted, g_agg.max_cert_discrepancy);
    report(10, "solver feasibility", g_agg.aborted == 0 && g_agg.max_cert_discrepancy <= 1e-12,
           detail);
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    criterion_1_and_3();
    criterion_2();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("acceptance surface: %s (%d failures, %.1fs)\n",
                g_failures == 0 ? "PASS" : "FAIL", g_failures, seconds);
    return g_failures == 0 ? 0 : 1;
}
