#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "defcast/game.hpp"
#include "defcast/potential.hpp"
#include "defcast/solver.hpp"

namespace defcast {

enum class LearnerVariant { dfa_fixed, dfa_mixture, fake_dfa, hedge, hedge_anytime };

struct LearnerConfig {
    LearnerVariant variant = LearnerVariant::dfa_fixed;
    double eta = 0.0;      // dfa_fixed explicit rate, or the hedge rate
    int horizon = 0;       // dfa_fixed: sets eta = sqrt(2 ln N / T)
    double eta_min = 1e-4; // dfa_mixture grid floor
    int grid_cells = 64;   // dfa_mixture grid size
    int i_max = 0;         // fake_dfa truncation; 0 picks the default
    SolveOptions solver;
    Vec weights;           // expert weights; empty means uniform
    bool verify_certificates = false;
};

struct StepRecord {
    int t = 0;
    Decision gamma;
    Outcome omega;
    double step_loss = 0.0;
    double log_f = std::numeric_limits<double>::quiet_NaN();
    double log_capacity_used = std::numeric_limits<double>::quiet_NaN();
    bool cert_exact = true;
};

// One online learner driving one run: decide() announces gamma_t, observe()
// feeds back omega_t. The DFA variants carry a potential state and call the
// min-max solver; the hedge variants are closed-form baselines.
class Learner {
  public:
    Learner(LearnerConfig cfg, GameSpec game, int n_experts)
        : cfg_(std::move(cfg)), game_(std::move(game)), n_experts_(n_experts) {
        if (n_experts_ < 1) throw std::invalid_argument("learner: need at least one expert");
        if (game_.kind == GameSpec::Kind::dtol && game_.n_actions != n_experts_)
            throw std::invalid_argument("learner: dtol expert count must equal N");
        pool_ = cfg_.weights.empty() ? ExpertPool::uniform(n_experts_)
                                     : ExpertPool{cfg_.weights};
        pool_.validate();
        if (static_cast<int>(pool_.weights.size()) != n_experts_)
            throw std::invalid_argument("learner: weight vector size mismatch");
        switch (cfg_.variant) {
            case LearnerVariant::dfa_fixed: {
                if (cfg_.horizon > 0) {
                    cfg_.eta = std::sqrt(2.0 * std::log(static_cast<double>(n_experts_)) /
                                         cfg_.horizon);
                } else if (!(cfg_.eta > 0.0)) {
                    throw std::invalid_argument(
                        "dfa_fixed: horizon (or an explicit eta) must be given in advance");
                }
                potential_ = make_fixed_potential(cfg_.eta, pool_);
                break;
            }
            case LearnerVariant::dfa_mixture:
                potential_ =
                    make_mixture_potential(theorem2_grid(cfg_.eta_min, cfg_.grid_cells), pool_);
                break;
            case LearnerVariant::fake_dfa: {
                int i_max = cfg_.i_max;
                if (i_max <= 0) {
                    double min_p = pool_.weights[0];
                    for (double p : pool_.weights) min_p = std::min(min_p, p);
                    int n_eff = cfg_.weights.empty()
                                    ? n_experts_
                                    : static_cast<int>(std::ceil(1.0 / min_p - 1e-9));
                    i_max = default_i_max(n_eff);
                }
                cfg_.i_max = i_max;
                potential_ = make_theorem3_potential(i_max, pool_);
                break;
            }
            case LearnerVariant::hedge:
                if (!(cfg_.eta > 0.0)) throw std::invalid_argument("hedge: eta must be positive");
                expert_cum_.assign(static_cast<size_t>(n_experts_), 0.0);
                break;
            case LearnerVariant::hedge_anytime:
                expert_cum_.assign(static_cast<size_t>(n_experts_), 0.0);
                break;
        }
    }

    bool has_potential() const {
        return cfg_.variant == LearnerVariant::dfa_fixed ||
               cfg_.variant == LearnerVariant::dfa_mixture ||
               cfg_.variant == LearnerVariant::fake_dfa;
    }

    const PotentialState& potential() const {
        if (!has_potential()) throw std::logic_error("learner has no potential state");
        return *potential_;
    }

    const LearnerConfig& config() const { return cfg_; }
    const ExpertPool& pool() const { return pool_; }

    // Grid used by the mixture potential (for the discrete Eq.-style checks).
    std::vector<EtaNode> grid() const {
        if (!has_potential()) return {};
        return potential_->grid;
    }

    Decision decide(const std::vector<Decision>& preds = {}) {
        if (pending_) throw std::logic_error("decide called twice without observe");
        const int t = steps_ + 1;
        Decision gamma = has_potential() ? decide_dfa(preds, t) : decide_hedge(preds, t);
        pending_ = true;
        return gamma;
    }

    StepRecord observe(const Decision& gamma, const Outcome& omega,
                       const std::vector<Decision>& preds = {}) {
        Vec xs = expert_step_losses(game_, omega, preds);
        if (static_cast<int>(xs.size()) != n_experts_)
            throw std::invalid_argument("observe: expert count mismatch");
        double loss = decision_loss(game_, gamma, omega);
        StepRecord rec;
        rec.t = steps_ + 1;
        rec.gamma = gamma;
        rec.omega = omega;
        rec.step_loss = loss;
        if (has_potential()) {
            potential_ = update(std::move(*potential_), loss, xs);
            rec.log_f = potential_->log_f_cached;
            rec.log_capacity_used = capacity_used_;
            rec.cert_exact = cert_ ? cert_->exact : true;
        } else {
            for (size_t n = 0; n < xs.size(); ++n) expert_cum_[n] += xs[n];
        }
        steps_ += 1;
        pending_ = false;
        problem_.reset();
        cert_.reset();
        return rec;
    }

    // Adversarial feedback hook: the outcome maximizing the learner's own
    // potential at gamma. Baselines without a potential get a deterministic
    // median-split vertex instead.
    Outcome adversarial_outcome(const Decision& gamma) const {
        if (has_potential()) {
            if (!problem_) throw std::logic_error("adversarial_outcome: no pending step problem");
            return worst_outcome(*problem_, gamma).first;
        }
        Vec sorted = gamma.weights;
        std::sort(sorted.begin(), sorted.end());
        double median = sorted[sorted.size() / 2];
        Vec v(gamma.weights.size());
        for (size_t n = 0; n < v.size(); ++n) v[n] = gamma.weights[n] >= median ? 1.0 : 0.0;
        return vector_outcome(std::move(v));
    }

    double log_capacity_used() const { return capacity_used_; }
    double max_certificate_discrepancy() const { return max_cert_discrepancy_; }
    int steps() const { return steps_; }

  private:
    Decision decide_dfa(const std::vector<Decision>& preds, int t) {
        capacity_used_ = (cfg_.variant == LearnerVariant::fake_dfa)
                             ? log_capacity(*potential_)
                             : potential_->log_f_cached;
        problem_ = make_step_problem(*potential_, game_, preds, cfg_.solver,
                                     static_cast<uint64_t>(t));
        cert_ = solve(*problem_, capacity_used_, cfg_.solver);
        if (cfg_.verify_certificates) {
            double recheck = worst_outcome(*problem_, cert_->gamma).second;
            max_cert_discrepancy_ =
                std::max(max_cert_discrepancy_, std::abs(recheck - cert_->worst_value_log));
        }
        return cert_->gamma;
    }

    Decision decide_hedge(const std::vector<Decision>& preds, int t) {
        double eta = cfg_.eta;
        if (cfg_.variant == LearnerVariant::hedge_anytime)
            eta = std::sqrt(8.0 * std::log(static_cast<double>(std::max(n_experts_, 2))) / t);
        Vec logits(static_cast<size_t>(n_experts_));
        for (int n = 0; n < n_experts_; ++n)
            logits[static_cast<size_t>(n)] =
                std::log(pool_.weights[static_cast<size_t>(n)]) -
                eta * expert_cum_[static_cast<size_t>(n)];
        double norm = log_sum_exp(logits);
        Vec mix(static_cast<size_t>(n_experts_));
        for (int n = 0; n < n_experts_; ++n)
            mix[static_cast<size_t>(n)] = std::exp(logits[static_cast<size_t>(n)] - norm);
        if (game_.kind == GameSpec::Kind::dtol) return Decision{std::move(mix)};
        if (static_cast<int>(preds.size()) != n_experts_)
            throw std::invalid_argument("hedge: one prediction per expert required");
        Vec w(static_cast<size_t>(game_.decision_dim()), 0.0);
        for (int n = 0; n < n_experts_; ++n)
            for (size_t m = 0; m < w.size(); ++m)
                w[m] += mix[static_cast<size_t>(n)] * preds[static_cast<size_t>(n)].weights[m];
        return Decision{std::move(w)};
    }

    LearnerConfig cfg_;
    GameSpec game_;
    int n_experts_ = 0;
    ExpertPool pool_;
    std::optional<PotentialState> potential_;
    Vec expert_cum_;  // hedge-only bookkeeping
    std::optional<StepProblem> problem_;
    std::optional<Certificate> cert_;
    double capacity_used_ = std::numeric_limits<double>::quiet_NaN();
    double max_cert_discrepancy_ = 0.0;
    int steps_ = 0;
    bool pending_ = false;
};

// Closed-form exponential-weights decision; exposed for tests and for the
// feasibility cross-check against the single-eta potential.
inline Decision hedge_step(std::span<const double> cum_losses, std::span<const double> weights,
                           double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("hedge_step: eta must be positive");
    if (cum_losses.size() != weights.size())
        throw std::invalid_argument("hedge_step: dimension mismatch");
    Vec logits(cum_losses.size());
    for (size_t n = 0; n < cum_losses.size(); ++n)
        logits[n] = std::log(weights[n]) - eta * cum_losses[n];
    double norm = log_sum_exp(logits);
    Vec w(cum_losses.size());
    for (size_t n = 0; n < w.size(); ++n) w[n] = std::exp(logits[n] - norm);
    return Decision{std::move(w)};
}

}  // namespace defcast
