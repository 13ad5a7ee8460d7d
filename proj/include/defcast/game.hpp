#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace defcast {

using Vec = std::vector<double>;

constexpr double simplex_tol = 1e-12;

// Point of the decision simplex. In a DTOL game the weights are over the N
// actions; in a finite-convex game they are over the generators of the
// prediction set.
struct Decision {
    Vec weights;
};

inline void validate_decision(const Decision& d) {
    if (d.weights.empty()) throw std::invalid_argument("decision: empty weight vector");
    double sum = 0.0;
    for (double w : d.weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("decision: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > simplex_tol)
        throw std::invalid_argument("decision: weights do not sum to 1");
}

inline Decision make_decision(Vec w) {
    Decision d{std::move(w)};
    validate_decision(d);
    return d;
}

inline Decision uniform_decision(int n) {
    return Decision{Vec(static_cast<size_t>(n), 1.0 / n)};
}

inline Decision unit_decision(int n, int index) {
    Vec w(static_cast<size_t>(n), 0.0);
    w.at(static_cast<size_t>(index)) = 1.0;
    return Decision{std::move(w)};
}

// DTOL outcome: a loss vector in [0,1]^N. Finite-convex outcome: a symbol
// index into GameSpec::outcomes (losses stays empty).
struct Outcome {
    Vec losses;
    int symbol = -1;
};

inline Outcome vector_outcome(Vec losses) { return Outcome{std::move(losses), -1}; }
inline Outcome symbol_outcome(int symbol) { return Outcome{{}, symbol}; }

struct GameSpec {
    enum class Kind { dtol, finite_convex };

    Kind kind = Kind::dtol;
    int n_actions = 0;                   // dtol
    std::vector<std::string> outcomes;   // finite_convex: symbol names
    std::vector<Vec> generators;         // finite_convex: loss vectors over outcomes

    static GameSpec dtol(int n) {
        GameSpec g;
        g.kind = Kind::dtol;
        g.n_actions = n;
        g.validate();
        return g;
    }

    static GameSpec finite_convex(std::vector<std::string> outs, std::vector<Vec> gens) {
        GameSpec g;
        g.kind = Kind::finite_convex;
        g.outcomes = std::move(outs);
        g.generators = std::move(gens);
        g.validate();
        return g;
    }

    int decision_dim() const {
        return kind == Kind::dtol ? n_actions : static_cast<int>(generators.size());
    }

    int outcome_count() const {
        return kind == Kind::dtol ? -1 : static_cast<int>(outcomes.size());
    }

    void validate() const {
        if (kind == Kind::dtol) {
            if (n_actions < 1) throw std::invalid_argument("dtol game: N must be >= 1");
            return;
        }
        if (outcomes.size() < 2)
            throw std::invalid_argument("finite_convex game: need at least 2 outcomes");
        if (generators.empty())
            throw std::invalid_argument("finite_convex game: need at least 1 generator");
        for (const Vec& g : generators) {
            if (g.size() != outcomes.size())
                throw std::invalid_argument("finite_convex game: generator arity mismatch");
            for (double v : g)
                if (!(v >= 0.0 && v <= 1.0))
                    throw std::invalid_argument("finite_convex game: generator loss outside [0,1]");
        }
    }

    // Coefficient vector a with lambda(gamma, omega) = gamma . a.
    Vec action_losses(const Outcome& omega) const {
        if (kind == Kind::dtol) {
            if (static_cast<int>(omega.losses.size()) != n_actions)
                throw std::invalid_argument("outcome dimension mismatch");
            return omega.losses;
        }
        if (omega.symbol < 0 || omega.symbol >= static_cast<int>(outcomes.size()))
            throw std::invalid_argument("unknown outcome symbol");
        Vec a(generators.size());
        for (size_t j = 0; j < generators.size(); ++j)
            a[j] = generators[j][static_cast<size_t>(omega.symbol)];
        return a;
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// lambda(gamma, omega) = gamma . omega for the DTOL game.
inline double dtol_loss(const Decision& gamma, const Outcome& omega) {
    return dot(gamma.weights, omega.losses);
}

inline double decision_loss(const GameSpec& game, const Decision& gamma, const Outcome& omega) {
    return dot(gamma.weights, game.action_losses(omega));
}

// PEA -> DTOL reduction: coordinate n of the induced DTOL outcome is expert
// n's loss at the announced symbol.
inline Outcome reduce_pea_outcome(const std::vector<Decision>& expert_predictions, int symbol,
                                  const GameSpec& game) {
    if (game.kind != GameSpec::Kind::finite_convex)
        throw std::invalid_argument("reduce_pea_outcome: finite_convex game required");
    Outcome omega = symbol_outcome(symbol);
    Vec a = game.action_losses(omega);  // validates the symbol
    Vec losses(expert_predictions.size());
    for (size_t n = 0; n < expert_predictions.size(); ++n)
        losses[n] = dot(expert_predictions[n].weights, a);
    return vector_outcome(std::move(losses));
}

struct ExpertPool {
    Vec weights;

    static ExpertPool uniform(int n) {
        return ExpertPool{Vec(static_cast<size_t>(n), 1.0 / n)};
    }

    int size() const { return static_cast<int>(weights.size()); }

    double total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

    void validate() const {
        if (weights.empty()) throw std::invalid_argument("expert pool: empty");
        for (double p : weights)
            if (!(p > 0.0)) throw std::invalid_argument("expert pool: weights must be positive");
        if (total() > 1.0 + simplex_tol)
            throw std::invalid_argument("expert pool: weights must sum to at most 1");
    }
};

struct StepRow {
    int t = 0;
    Decision gamma;
    Outcome omega;
    double learner_loss = 0.0;
    Vec expert_losses;
};

struct ProtocolState {
    int t = 0;
    double cum_loss = 0.0;  // L_t
    Vec expert_cum;         // L_t^n
    std::deque<StepRow> trace;
    size_t trace_cap = 0;   // 0 keeps full history, otherwise a ring buffer
};

inline ProtocolState make_protocol_state(int n_experts, size_t trace_cap = 0) {
    ProtocolState s;
    s.expert_cum.assign(static_cast<size_t>(n_experts), 0.0);
    s.trace_cap = trace_cap;
    return s;
}

// Per-step expert losses: DTOL reads them off the outcome vector, a
// finite-convex game evaluates the announced predictions at the symbol.
inline Vec expert_step_losses(const GameSpec& game, const Outcome& omega,
                              const std::vector<Decision>& preds) {
    if (game.kind == GameSpec::Kind::dtol) {
        if (static_cast<int>(omega.losses.size()) != game.n_actions)
            throw std::invalid_argument("outcome dimension mismatch");
        for (double v : omega.losses)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("outcome loss outside [0,1]");
        return omega.losses;
    }
    Vec a = game.action_losses(omega);
    Vec losses(preds.size());
    for (size_t n = 0; n < preds.size(); ++n) losses[n] = dot(preds[n].weights, a);
    return losses;
}

inline ProtocolState advance(ProtocolState state, const GameSpec& game, const Decision& gamma,
                             const Outcome& omega, const std::vector<Decision>& preds = {}) {
    Vec xs = expert_step_losses(game, omega, preds);
    if (xs.size() != state.expert_cum.size())
        throw std::invalid_argument("advance: expert count mismatch");
    double loss = dot(gamma.weights, game.action_losses(omega));
    if (!(loss >= -simplex_tol && loss <= 1.0 + simplex_tol))
        throw std::invalid_argument("advance: learner loss outside [0,1]");
    state.t += 1;
    state.cum_loss += loss;
    for (size_t n = 0; n < xs.size(); ++n) state.expert_cum[n] += xs[n];
    state.trace.push_back(StepRow{state.t, gamma, omega, loss, xs});
    if (state.trace_cap > 0 && state.trace.size() > state.trace_cap) state.trace.pop_front();
    return state;
}

// Smallest v with sum{ p_n : L^n <= v } >= eps. Ties at v are all included,
// so with uniform weights this is the ceil(eps*N)-th smallest loss.
inline double quantile_loss(std::span<const double> losses, std::span<const double> weights,
                            double eps) {
    if (losses.size() != weights.size())
        throw std::invalid_argument("quantile_loss: dimension mismatch");
    double total = 0.0;
    for (double p : weights) total += p;
    if (!(eps > 0.0)) throw std::invalid_argument("quantile_loss: eps must be positive");
    if (eps > total + simplex_tol)
        throw std::invalid_argument("quantile_loss: eps exceeds total expert weight");
    std::vector<size_t> order(losses.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return losses[a] < losses[b]; });
    double covered = 0.0;
    for (size_t i = 0; i < order.size(); ++i) {
        covered += weights[order[i]];
        bool group_end = (i + 1 == order.size()) || losses[order[i + 1]] > losses[order[i]];
        if (group_end && covered >= eps - simplex_tol) return losses[order[i]];
    }
    return losses[order.back()];
}

struct QuantileQuery {
    double eps = 0.0;
    double loss = 0.0;    // L^eps
    double regret = 0.0;  // R^eps = L - L^eps
};

inline QuantileQuery quantile_regret(const ProtocolState& state, const ExpertPool& pool,
                                     double eps) {
    double l_eps = quantile_loss(state.expert_cum, pool.weights, eps);
    return QuantileQuery{eps, l_eps, state.cum_loss - l_eps};
}

}  // namespace defcast
