#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "defcast/game.hpp"
#include "defcast/logsumexp.hpp"
#include "defcast/potential.hpp"
#include "defcast/rng.hpp"

namespace defcast {

struct MeanOutcome {
    Vec mu;  // dtol: mean loss vector; finite_convex: distribution over symbols
};

struct SolveOptions {
    enum class Oracle { exact_vertex, sampled_vertex };

    double tolerance = 1e-9;
    int max_iterations = 10000;
    Oracle oracle = Oracle::exact_vertex;
    int sample_count = 256;  // M for sampled_vertex
    int exact_cap = 16;
    uint64_t seed = 0;
};

struct Certificate {
    Decision gamma;
    double worst_value_log = neg_inf;
    Outcome worst_outcome;
    bool exact = true;
    int iterations = 0;
};

class InfeasibleError : public std::runtime_error {
  public:
    InfeasibleError(double best_log, double cap_log)
        : std::runtime_error("solver infeasible: best worst-case log value " +
                             std::to_string(best_log) + " exceeds log capacity " +
                             std::to_string(cap_log)),
          best_log_value(best_log),
          log_capacity(cap_log) {}

    double best_log_value;
    double log_capacity;
};

// Argmin index set of the expected loss: the face of the simplex supporting
// all best responses to mu. Ties within 1e-12 of the minimum are included.
inline std::vector<int> best_response(const MeanOutcome& mean, const GameSpec& game) {
    Vec expected;
    if (game.kind == GameSpec::Kind::dtol) {
        if (static_cast<int>(mean.mu.size()) != game.n_actions)
            throw std::invalid_argument("best_response: dimension mismatch");
        expected = mean.mu;
    } else {
        if (mean.mu.size() != game.outcomes.size())
            throw std::invalid_argument("best_response: distribution dimension mismatch");
        expected.resize(game.generators.size());
        for (size_t j = 0; j < game.generators.size(); ++j)
            expected[j] = dot(game.generators[j], mean.mu);
    }
    double lo = expected[0];
    for (double v : expected) lo = std::min(lo, v);
    std::vector<int> face;
    for (size_t j = 0; j < expected.size(); ++j)
        if (expected[j] <= lo + 1e-12) face.push_back(static_cast<int>(j));
    return face;
}

inline Decision face_centroid(const std::vector<int>& face, int dim) {
    Vec w(static_cast<size_t>(dim), 0.0);
    for (int j : face) w[static_cast<size_t>(j)] = 1.0 / face.size();
    return Decision{std::move(w)};
}

// One candidate outcome of the inner maximization. For DTOL the decision
// coefficients coincide with the expert losses (a cube vertex), so `x` is
// left empty and `a` serves both roles.
struct OutcomeCand {
    Vec a;        // loss coefficients: lambda(gamma, omega) = gamma . a
    Vec x;        // expert losses (empty for dtol)
    Vec sk;       // per-node inner LSE, precomputed
    int symbol = -1;

    std::span<const double> expert_losses() const { return x.empty() ? a : x; }

    Outcome to_outcome() const {
        return symbol >= 0 ? symbol_outcome(symbol) : Outcome{a, -1};
    }
};

struct StepProblem {
    StepPrep prep;
    std::vector<OutcomeCand> cands;
    std::vector<Decision> expert_decisions;  // announced predictions this step
    int dim = 0;
    bool exact = true;
    GameSpec::Kind kind = GameSpec::Kind::dtol;
};

namespace detail {

inline void add_candidate(StepProblem& problem, Vec a, Vec x, int symbol) {
    OutcomeCand cand;
    cand.a = std::move(a);
    cand.x = std::move(x);
    cand.symbol = symbol;
    cand.sk = node_lse(problem.prep, cand.expert_losses());
    problem.cands.push_back(std::move(cand));
}

inline Vec cube_vertex(uint64_t bits, int n) {
    Vec v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = (bits >> i) & 1u ? 1.0 : 0.0;
    return v;
}

}  // namespace detail

// Builds the outcome set the solver certifies against. DTOL with the exact
// oracle enumerates all cube vertices (sufficient: each potential term is
// exp of an affine function of omega, so f is convex in omega); the sampled
// oracle seeds a working set of random vertices. Finite games enumerate the
// outcome alphabet and are always exact.
inline StepProblem make_step_problem(const PotentialState& state, const GameSpec& game,
                                     const std::vector<Decision>& preds, const SolveOptions& opts,
                                     uint64_t sample_salt = 0) {
    StepProblem problem;
    problem.prep = prepare_step(state);
    problem.dim = game.decision_dim();
    problem.kind = game.kind;
    if (game.kind == GameSpec::Kind::dtol) {
        const int n = game.n_actions;
        if (n != state.n_experts())
            throw std::invalid_argument("step problem: potential/game expert count mismatch");
        problem.expert_decisions.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) problem.expert_decisions.push_back(unit_decision(n, i));
        if (opts.oracle == SolveOptions::Oracle::exact_vertex) {
            if (n > opts.exact_cap)
                throw std::invalid_argument(
                    "step problem: N exceeds exact_cap for the exact vertex oracle");
            const uint64_t count = uint64_t{1} << n;
            problem.cands.reserve(count);
            for (uint64_t bits = 0; bits < count; ++bits)
                detail::add_candidate(problem, detail::cube_vertex(bits, n), {}, -1);
            problem.exact = true;
        } else {
            CounterRng rng(opts.seed, 0x5e61u ^ sample_salt);
            problem.cands.reserve(static_cast<size_t>(opts.sample_count));
            for (int m = 0; m < opts.sample_count; ++m) {
                uint64_t bits = rng.next_u64() & ((uint64_t{1} << n) - 1);
                detail::add_candidate(problem, detail::cube_vertex(bits, n), {}, -1);
            }
            problem.exact = false;
        }
        return problem;
    }
    if (static_cast<int>(preds.size()) != state.n_experts())
        throw std::invalid_argument("step problem: one prediction per expert required");
    problem.expert_decisions = preds;
    for (int s = 0; s < game.outcome_count(); ++s) {
        Outcome omega = symbol_outcome(s);
        Vec a = game.action_losses(omega);
        Vec x(preds.size());
        for (size_t n = 0; n < preds.size(); ++n) x[n] = dot(preds[n].weights, a);
        detail::add_candidate(problem, std::move(a), std::move(x), s);
    }
    problem.exact = true;
    return problem;
}

namespace detail {

struct EvalResult {
    double value = neg_inf;  // max_omega log f(gamma, omega)
    int argmax = -1;
    Vec subgradient;         // averaged over the active set
};

inline double cand_value(const StepProblem& p, const OutcomeCand& cand, double learner_loss) {
    return log_f_from_node_lse(p.prep, cand.sk, learner_loss);
}

// Gradient of log f(gamma, omega) w.r.t. gamma is scal * a, where scal is
// the softmax-weighted mean of eta over nodes.
inline double grad_scale(const StepProblem& p, const OutcomeCand& cand, double learner_loss,
                         double value) {
    double scal = 0.0;
    for (int k = 0; k < p.prep.nodes; ++k) {
        const size_t ku = static_cast<size_t>(k);
        double term = cand.sk[ku] + p.prep.eta[ku] * learner_loss - p.prep.half_eta_sq[ku];
        scal += std::exp(term - value) * p.prep.eta[ku];
    }
    return scal;
}

inline EvalResult evaluate(const StepProblem& p, const Decision& gamma, bool want_grad) {
    EvalResult res;
    std::vector<double> values(p.cands.size());
    for (size_t i = 0; i < p.cands.size(); ++i) {
        double loss = dot(gamma.weights, p.cands[i].a);
        values[i] = cand_value(p, p.cands[i], loss);
        if (values[i] > res.value) {
            res.value = values[i];
            res.argmax = static_cast<int>(i);
        }
    }
    if (!want_grad) return res;
    // Average the gradient over every active outcome. This keeps the solver
    // equivariant under expert permutation and duplication, where the argmax
    // is typically a symmetric tie.
    res.subgradient.assign(gamma.weights.size(), 0.0);
    int active = 0;
    for (size_t i = 0; i < p.cands.size(); ++i) {
        if (values[i] < res.value - 1e-12) continue;
        double loss = dot(gamma.weights, p.cands[i].a);
        double scal = grad_scale(p, p.cands[i], loss, values[i]);
        for (size_t m = 0; m < gamma.weights.size(); ++m)
            res.subgradient[m] += scal * p.cands[i].a[m];
        ++active;
    }
    for (double& g : res.subgradient) g /= active;
    return res;
}

// Per-node exponential-weights mixtures. Node k weighs expert n by
// softmax_n(base(k,n)); candidates blend the induced decisions (expert
// predictions averaged under those weights) across nodes, by node mass and
// by eta-scaled node mass.
inline std::vector<Decision> warm_starts(const StepProblem& p) {
    const StepPrep& prep = p.prep;
    const int k_count = prep.nodes;
    const int n_count = prep.experts;
    std::vector<double> node_mass(static_cast<size_t>(k_count));
    std::vector<double> u(static_cast<size_t>(k_count) * static_cast<size_t>(n_count));
    double total = neg_inf;
    for (int k = 0; k < k_count; ++k) {
        LogSumAccumulator acc;
        for (int n = 0; n < n_count; ++n) acc.add(prep.base_at(k, n));
        node_mass[static_cast<size_t>(k)] = acc.value();
        total = log_add(total, acc.value());
        for (int n = 0; n < n_count; ++n)
            u[static_cast<size_t>(k) * n_count + n] =
                std::exp(prep.base_at(k, n) - acc.value());
    }
    Vec blend(static_cast<size_t>(n_count), 0.0);
    Vec blend_eta(static_cast<size_t>(n_count), 0.0);
    double eta_norm = 0.0;
    for (int k = 0; k < k_count; ++k) {
        double share = std::exp(node_mass[static_cast<size_t>(k)] - total);
        for (int n = 0; n < n_count; ++n) {
            double w = u[static_cast<size_t>(k) * n_count + n];
            blend[static_cast<size_t>(n)] += share * w;
            blend_eta[static_cast<size_t>(n)] += share * prep.eta[static_cast<size_t>(k)] * w;
        }
        eta_norm += share * prep.eta[static_cast<size_t>(k)];
    }
    auto project = [&](const Vec& expert_mix) {
        Vec w(static_cast<size_t>(p.dim), 0.0);
        for (int n = 0; n < n_count; ++n)
            for (size_t m = 0; m < w.size(); ++m)
                w[m] += expert_mix[static_cast<size_t>(n)] *
                        p.expert_decisions[static_cast<size_t>(n)].weights[m];
        return Decision{std::move(w)};
    };
    std::vector<Decision> starts;
    starts.push_back(project(blend));
    if (eta_norm > 1e-300) {
        for (double& v : blend_eta) v /= eta_norm;
        starts.push_back(project(blend_eta));
    }
    starts.push_back(uniform_decision(p.dim));
    return starts;
}

inline void renormalize(Vec& w) {
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
}

}  // namespace detail

// Maximizing outcome for a fixed decision. Exact problems report the true
// sup over the outcome space; sampled problems refine the best sampled
// vertex by coordinate-wise local search.
inline std::pair<Outcome, double> worst_outcome(const StepProblem& problem, const Decision& gamma) {
    detail::EvalResult res = detail::evaluate(problem, gamma, false);
    if (problem.exact || problem.kind == GameSpec::Kind::finite_convex)
        return {problem.cands[static_cast<size_t>(res.argmax)].to_outcome(), res.value};
    Vec v = problem.cands[static_cast<size_t>(res.argmax)].a;
    double best = res.value;
    bool improved = true;
    while (improved) {
        improved = false;
        for (size_t i = 0; i < v.size(); ++i) {
            v[i] = 1.0 - v[i];
            double loss = dot(gamma.weights, v);
            double val = log_f(problem.prep, loss, v);
            if (val > best + 1e-15) {
                best = val;
                improved = true;
            } else {
                v[i] = 1.0 - v[i];
            }
        }
    }
    return {vector_outcome(v), best};
}

// Finds gamma with certified max_omega log f(gamma, omega) <= c_log +
// log1p(tolerance). Warm starts come from exponential-weights mixtures;
// when none is feasible, Polyak-stepped multiplicative updates descend the
// convex objective max_omega log f (a log-sum-exp of affine forms in gamma),
// with iterate averaging. Feasibility is guaranteed by the supermartingale
// structure, so failure after the iteration cap indicates numerical trouble.
inline Certificate solve(StepProblem& problem, double c_log, const SolveOptions& opts) {
    if (!(c_log > neg_inf)) throw InfeasibleError(neg_inf, c_log);
    const double accept = c_log + std::log1p(opts.tolerance);

    auto finish = [&](Decision gamma, double value, int argmax, int iters) {
        Certificate cert;
        cert.gamma = std::move(gamma);
        cert.worst_value_log = value;
        cert.worst_outcome = problem.cands[static_cast<size_t>(argmax)].to_outcome();
        cert.exact = problem.exact;
        cert.iterations = iters;
        return cert;
    };

    Decision current;
    double best_seen = neg_inf;
    bool have_start = false;
    for (Decision& start : detail::warm_starts(problem)) {
        detail::EvalResult res = detail::evaluate(problem, start, false);
        if (res.value <= accept) return finish(std::move(start), res.value, res.argmax, 0);
        if (!have_start || res.value < best_seen) {
            best_seen = res.value;
            current = std::move(start);
            have_start = true;
        }
    }

    Vec avg_sum(current.weights.size(), 0.0);
    for (int it = 1; it <= opts.max_iterations; ++it) {
        detail::EvalResult res = detail::evaluate(problem, current, true);
        if (res.value <= accept) return finish(current, res.value, res.argmax, it);
        best_seen = std::min(best_seen, res.value);
        double g_inf = 0.0;
        for (double g : res.subgradient) g_inf = std::max(g_inf, std::abs(g));
        if (g_inf < 1e-300) break;  // flat objective above capacity: hopeless
        double step = (res.value - c_log) / (g_inf * g_inf);
        step = std::min(step, 30.0 / g_inf);
        for (size_t m = 0; m < current.weights.size(); ++m) {
            current.weights[m] *= std::exp(-step * res.subgradient[m]);
            current.weights[m] = std::max(current.weights[m], 1e-300);
        }
        detail::renormalize(current.weights);
        for (size_t m = 0; m < avg_sum.size(); ++m) avg_sum[m] += current.weights[m];
        if (it % 8 == 0) {
            Decision averaged{avg_sum};
            detail::renormalize(averaged.weights);
            detail::EvalResult ares = detail::evaluate(problem, averaged, false);
            if (ares.value <= accept)
                return finish(std::move(averaged), ares.value, ares.argmax, it);
        }
    }
    throw InfeasibleError(best_seen, c_log);
}

inline Certificate solve(const PotentialState& state, const GameSpec& game,
                         const std::vector<Decision>& preds, double c_log,
                         const SolveOptions& opts, uint64_t sample_salt = 0) {
    StepProblem problem = make_step_problem(state, game, preds, opts, sample_salt);
    return solve(problem, c_log, opts);
}

// ---------------------------------------------------------------------------
// Levin-lemma verification at desk scale.

// A relation maps a distribution pi over the outcome alphabet to a finite
// set of candidate loss functions (each a per-outcome value vector).
using Relation = std::function<std::vector<Vec>(const Vec& pi)>;

struct LevinResult {
    bool found = false;
    Vec pi;
    Vec g;
    double slack = std::numeric_limits<double>::infinity();  // max_omega g - C
};

namespace detail {

template <typename Visit>
inline void walk_simplex_lattice(int dim, int denom, Vec& point, int coord, int remaining,
                                 Visit&& visit) {
    if (coord + 1 == dim) {
        point[static_cast<size_t>(coord)] = static_cast<double>(remaining) / denom;
        visit(point);
        return;
    }
    for (int k = 0; k <= remaining; ++k) {
        point[static_cast<size_t>(coord)] = static_cast<double>(k) / denom;
        walk_simplex_lattice(dim, denom, point, coord + 1, remaining - k,
                             std::forward<Visit>(visit));
    }
}

}  // namespace detail

// Scans the simplex lattice of the given resolution for a pi whose relation
// contains a g with max_omega g(omega) <= C + slack_tol. Stops at the first
// hit; otherwise reports the best slack achieved.
inline LevinResult levin_search(const Relation& q, int omega_size, int resolution, double c,
                                double slack_tol = 1e-2) {
    if (omega_size < 2 || omega_size > 4)
        throw std::invalid_argument("levin_search: outcome alphabet size must be in [2,4]");
    if (resolution < 1) throw std::invalid_argument("levin_search: resolution must be >= 1");
    LevinResult best;
    Vec point(static_cast<size_t>(omega_size), 0.0);
    bool done = false;
    detail::walk_simplex_lattice(omega_size, resolution, point, 0, resolution, [&](const Vec& pi) {
        if (done) return;
        for (Vec& g : q(pi)) {
            double worst = neg_inf;
            for (double v : g) worst = std::max(worst, v);
            double slack = worst - c;
            if (slack < best.slack) {
                best.slack = slack;
                best.pi = pi;
                best.g = std::move(g);
                if (slack <= slack_tol) {
                    best.found = true;
                    done = true;
                    return;
                }
            }
        }
    });
    return best;
}

// Wraps a potential over a finite-outcome game as a Levin relation: q(pi) is
// the set of potential slices f_t(gamma, .) for gamma ranging over a sampled
// best-response face of E_pi loss. face_tol widens the argmin tie so lattice
// neighbours of the equalizing pi still expose the full face.
inline Relation make_hoeffding_relation(const PotentialState& state, const GameSpec& game,
                                        const std::vector<Decision>& preds, double face_tol,
                                        int face_samples = 64) {
    if (game.kind != GameSpec::Kind::finite_convex)
        throw std::invalid_argument("hoeffding relation: finite_convex game required");
    StepPrep prep = prepare_step(state);
    const int n_out = game.outcome_count();
    // Per-symbol tables.
    std::vector<Vec> coeff(static_cast<size_t>(n_out));
    std::vector<Vec> sk(static_cast<size_t>(n_out));
    for (int s = 0; s < n_out; ++s) {
        Outcome omega = symbol_outcome(s);
        coeff[static_cast<size_t>(s)] = game.action_losses(omega);
        Vec x(preds.size());
        for (size_t n = 0; n < preds.size(); ++n)
            x[n] = dot(preds[n].weights, coeff[static_cast<size_t>(s)]);
        sk[static_cast<size_t>(s)] = node_lse(prep, x);
    }
    const int dim = game.decision_dim();
    return [=](const Vec& pi) {
        Vec expected(static_cast<size_t>(dim), 0.0);
        for (int j = 0; j < dim; ++j)
            for (int s = 0; s < n_out; ++s)
                expected[static_cast<size_t>(j)] +=
                    pi[static_cast<size_t>(s)] * coeff[static_cast<size_t>(s)][static_cast<size_t>(j)];
        double lo = expected[0];
        for (double v : expected) lo = std::min(lo, v);
        std::vector<int> face;
        for (int j = 0; j < dim; ++j)
            if (expected[static_cast<size_t>(j)] <= lo + face_tol) face.push_back(j);
        std::vector<Vec> gammas;
        for (int j : face) gammas.push_back(unit_decision(dim, j).weights);
        if (face.size() >= 2) {
            gammas.push_back(face_centroid(face, dim).weights);
            if (face.size() == 2) {
                for (int i = 1; i < face_samples; ++i) {
                    double lam = static_cast<double>(i) / face_samples;
                    Vec w(static_cast<size_t>(dim), 0.0);
                    w[static_cast<size_t>(face[0])] = 1.0 - lam;
                    w[static_cast<size_t>(face[1])] = lam;
                    gammas.push_back(std::move(w));
                }
            }
        }
        std::vector<Vec> out;
        out.reserve(gammas.size());
        for (const Vec& gw : gammas) {
            Vec g(static_cast<size_t>(n_out));
            for (int s = 0; s < n_out; ++s) {
                double loss = dot(gw, coeff[static_cast<size_t>(s)]);
                g[static_cast<size_t>(s)] =
                    std::exp(log_f_from_node_lse(prep, sk[static_cast<size_t>(s)], loss));
            }
            out.push_back(std::move(g));
        }
        return out;
    };
}

}  // namespace defcast
