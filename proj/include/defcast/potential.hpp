#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "defcast/game.hpp"
#include "defcast/logsumexp.hpp"

namespace defcast {

// Reciprocal of sum_{i>=1} 1/i^2.
inline constexpr double basel_weight() { return 6.0 / (std::numbers::pi * std::numbers::pi); }

inline double inv_e() { return std::exp(-1.0); }

struct EtaNode {
    double eta = 0.0;     // learning rate
    double weight = 0.0;  // mixture mass
};

// Exponent of one Hoeffding factor: eta*(learner_loss - expert_loss) - eta^2/2.
inline double hoeffding_exponent(double eta, double learner_loss, double expert_loss) {
    return eta * (learner_loss - expert_loss) - eta * eta / 2.0;
}

// Geometric partition of [eta_min, 1/e] into K cells under the measure
// d_eta / (eta ln^2(1/eta)). The antiderivative of the density is
// 1/ln(1/eta), so each cell mass is exact and the grid mass telescopes to
// 1 - 1/ln(1/eta_min).
inline std::vector<EtaNode> theorem2_grid(double eta_min, int cells) {
    if (!(eta_min > 0.0) || !(eta_min < inv_e()))
        throw std::invalid_argument("theorem2_grid: eta_min must lie in (0, 1/e)");
    if (cells < 1) throw std::invalid_argument("theorem2_grid: need at least one cell");
    std::vector<EtaNode> grid;
    grid.reserve(static_cast<size_t>(cells));
    double ratio = std::pow(inv_e() / eta_min, 1.0 / cells);
    double lo = eta_min;
    for (int j = 0; j < cells; ++j) {
        double hi = (j + 1 == cells) ? inv_e() : eta_min * std::pow(ratio, j + 1);
        double mass = 1.0 / std::log(1.0 / hi) - 1.0 / std::log(1.0 / lo);
        grid.push_back(EtaNode{std::sqrt(lo * hi), mass});
        lo = hi;
    }
    return grid;
}

// Time-varying grid of Theorem 3: eta_i = i/sqrt(T) with weights c/i^2,
// kept unrenormalized after truncation.
inline std::vector<EtaNode> theorem3_grid(int t, int i_max) {
    if (t < 1) throw std::invalid_argument("theorem3_grid: step index must be >= 1");
    if (i_max < 1) throw std::invalid_argument("theorem3_grid: i_max must be >= 1");
    const double c = basel_weight();
    const double rsqrt_t = 1.0 / std::sqrt(static_cast<double>(t));
    std::vector<EtaNode> grid;
    grid.reserve(static_cast<size_t>(i_max));
    for (int i = 1; i <= i_max; ++i)
        grid.push_back(EtaNode{i * rsqrt_t, c / (static_cast<double>(i) * i)});
    return grid;
}

inline int default_i_max(int n_effective) {
    double ln_n = std::log(static_cast<double>(std::max(n_effective, 3)));
    return static_cast<int>(std::ceil(std::sqrt(ln_n))) + 1;
}

enum class PotentialMode { fixed_eta, theorem2_mixture, theorem3_time_varying };

// State of the supermartingale potential between steps. All aggregation is
// done in the log domain; the linear-domain potential is exp(log_f) > 0.
struct PotentialState {
    PotentialMode mode = PotentialMode::fixed_eta;
    std::vector<EtaNode> grid;  // theorem3: refreshed per step from i_max
    Vec regrets;                // R^n = L_{t-1} - L^n_{t-1}
    Vec log_weight;             // log p_n
    int step_count = 0;         // t-1
    double rsqrt_sum = 0.0;     // sum_{s<=t-1} 1/sqrt(s)
    double log_f_cached = 0.0;  // log f_{t-1}(gamma_{t-1}, omega_{t-1})
    int i_max = 0;              // theorem3 truncation

    int n_experts() const { return static_cast<int>(regrets.size()); }
};

namespace detail {

inline double initial_log_f(const std::vector<EtaNode>& grid, const ExpertPool& pool) {
    double mass = 0.0;
    for (const EtaNode& node : grid) mass += node.weight;
    return std::log(mass) + std::log(pool.total());
}

inline PotentialState base_state(PotentialMode mode, std::vector<EtaNode> grid,
                                 const ExpertPool& pool) {
    pool.validate();
    for (const EtaNode& node : grid) {
        if (!(node.eta >= 0.0)) throw std::invalid_argument("potential: negative eta");
        if (!(node.weight > 0.0)) throw std::invalid_argument("potential: nonpositive node weight");
    }
    PotentialState s;
    s.mode = mode;
    s.grid = std::move(grid);
    s.regrets.assign(pool.weights.size(), 0.0);
    s.log_weight.resize(pool.weights.size());
    for (size_t n = 0; n < pool.weights.size(); ++n) s.log_weight[n] = std::log(pool.weights[n]);
    s.log_f_cached = initial_log_f(s.grid, pool);
    return s;
}

}  // namespace detail

inline PotentialState make_fixed_potential(double eta, const ExpertPool& pool) {
    if (!(eta >= 0.0)) throw std::invalid_argument("fixed potential: eta must be >= 0");
    return detail::base_state(PotentialMode::fixed_eta, {EtaNode{eta, 1.0}}, pool);
}

inline PotentialState make_mixture_potential(std::vector<EtaNode> grid, const ExpertPool& pool) {
    return detail::base_state(PotentialMode::theorem2_mixture, std::move(grid), pool);
}

inline PotentialState make_theorem3_potential(int i_max, const ExpertPool& pool) {
    PotentialState s =
        detail::base_state(PotentialMode::theorem3_time_varying, theorem3_grid(1, i_max), pool);
    s.i_max = i_max;
    return s;
}

// Per-step tables: base(k,n) = log w_k + log p_n + eta_k R^n - accumulated
// variance term for the mode. The step about to be played is step_count+1.
struct StepPrep {
    std::vector<double> eta;
    std::vector<double> half_eta_sq;
    std::vector<double> base;  // K x N, row-major by node
    int nodes = 0;
    int experts = 0;

    double base_at(int k, int n) const {
        return base[static_cast<size_t>(k) * static_cast<size_t>(experts) + static_cast<size_t>(n)];
    }
};

inline StepPrep prepare_step(const PotentialState& state) {
    const int t = state.step_count + 1;
    std::vector<EtaNode> grid = (state.mode == PotentialMode::theorem3_time_varying)
                                    ? theorem3_grid(t, state.i_max)
                                    : state.grid;
    StepPrep prep;
    prep.nodes = static_cast<int>(grid.size());
    prep.experts = state.n_experts();
    prep.eta.resize(grid.size());
    prep.half_eta_sq.resize(grid.size());
    prep.base.resize(grid.size() * state.regrets.size());
    for (size_t k = 0; k < grid.size(); ++k) {
        const double eta = grid[k].eta;
        double var_term;
        if (state.mode == PotentialMode::theorem3_time_varying) {
            // (i/(2 sqrt(T))) * sum_{s<T} i/sqrt(s) = eta^2 * sqrt(T) * rsqrt_sum / 2
            var_term = eta * eta * std::sqrt(static_cast<double>(t)) * state.rsqrt_sum / 2.0;
        } else {
            var_term = state.step_count * eta * eta / 2.0;
        }
        prep.eta[k] = eta;
        prep.half_eta_sq[k] = eta * eta / 2.0;
        const double node_base = std::log(grid[k].weight) - var_term;
        for (size_t n = 0; n < state.regrets.size(); ++n)
            prep.base[k * state.regrets.size() + n] =
                node_base + state.log_weight[n] + eta * state.regrets[n];
    }
    return prep;
}

// Per-node inner aggregation for a fixed outcome: s_k = LSE_n(base - eta_k x_n).
inline std::vector<double> node_lse(const StepPrep& prep, std::span<const double> expert_losses) {
    if (static_cast<int>(expert_losses.size()) != prep.experts)
        throw std::invalid_argument("node_lse: expert loss dimension mismatch");
    std::vector<double> sk(static_cast<size_t>(prep.nodes));
    for (int k = 0; k < prep.nodes; ++k) {
        LogSumAccumulator acc;
        for (int n = 0; n < prep.experts; ++n)
            acc.add(prep.base_at(k, n) - prep.eta[static_cast<size_t>(k)] * expert_losses[n]);
        sk[static_cast<size_t>(k)] = acc.value();
    }
    return sk;
}

inline double log_f_from_node_lse(const StepPrep& prep, std::span<const double> sk,
                                  double learner_loss) {
    LogSumAccumulator acc;
    for (int k = 0; k < prep.nodes; ++k)
        acc.add(sk[static_cast<size_t>(k)] + prep.eta[static_cast<size_t>(k)] * learner_loss -
                prep.half_eta_sq[static_cast<size_t>(k)]);
    return acc.value();
}

inline double log_f(const StepPrep& prep, double learner_loss,
                    std::span<const double> expert_losses) {
    return log_f_from_node_lse(prep, node_lse(prep, expert_losses), learner_loss);
}

// log f_t(gamma, omega) for the step currently being played.
inline double log_f(const PotentialState& state, double learner_loss,
                    std::span<const double> expert_losses) {
    return log_f(prepare_step(state), learner_loss, expert_losses);
}

// Total accumulated mass log sum_{n,k} p_n w_k e^{eta_k R^n - var}. In the
// fixed/mixture modes this equals the cached previous potential value.
inline double log_mass(const PotentialState& state) {
    StepPrep prep = prepare_step(state);
    LogSumAccumulator acc;
    for (double b : prep.base) acc.add(b);
    return acc.value();
}

// Capacity C_T of the time-varying potential, log domain.
inline double log_capacity(const PotentialState& state) {
    if (state.mode != PotentialMode::theorem3_time_varying)
        throw std::logic_error("capacity: defined for the time-varying mode only");
    return log_mass(state);
}

inline PotentialState update(PotentialState state, double learner_loss,
                             std::span<const double> expert_losses) {
    if (static_cast<int>(expert_losses.size()) != state.n_experts())
        throw std::invalid_argument("update: expert loss dimension mismatch");
    const double played = log_f(state, learner_loss, expert_losses);
    const int t = state.step_count + 1;
    for (size_t n = 0; n < state.regrets.size(); ++n)
        state.regrets[n] += learner_loss - expert_losses[n];
    if (state.mode == PotentialMode::theorem3_time_varying)
        state.grid = theorem3_grid(t + 1, state.i_max);
    state.rsqrt_sum += 1.0 / std::sqrt(static_cast<double>(t));
    state.step_count = t;
    state.log_f_cached = played;
    return state;
}

}  // namespace defcast
