#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "defcast/game.hpp"
#include "defcast/rng.hpp"

namespace defcast {

struct EnvironmentSpec {
    enum class Kind {
        iid_uniform,
        iid_bernoulli,
        alternating,
        duplicated_experts,
        many_good_experts,
        adaptive_worst_case
    };

    Kind kind = Kind::iid_uniform;
    Vec bernoulli_q;                        // per-expert success odds, cycled if short
    int copies = 2;                         // duplicated_experts
    std::shared_ptr<EnvironmentSpec> base;  // duplicated_experts: inner generator
    double good_fraction = 0.5;             // many_good_experts
    double gap = 0.3;                       // many_good_experts
};

// Loss-vector generator for one run. Every emitted coordinate lies in [0,1].
// The adaptive kind plays the learner's own worst outcome back, so it needs
// the per-step hook the runner wires in.
class Environment {
  public:
    using AdversaryHook = std::function<Outcome(const Decision&)>;

    Environment(const EnvironmentSpec& spec, int n, uint64_t seed, uint64_t stream = 1)
        : spec_(spec), n_(n), rng_(seed, stream) {
        if (n_ < 1) throw std::invalid_argument("environment: N must be >= 1");
        if (spec_.kind == EnvironmentSpec::Kind::duplicated_experts) {
            if (!spec_.base)
                throw std::invalid_argument("duplicated_experts: base environment required");
            if (spec_.copies < 1 || n_ % spec_.copies != 0)
                throw std::invalid_argument("duplicated_experts: copies must divide N");
            base_ = std::make_unique<Environment>(*spec_.base, n_ / spec_.copies, seed, stream);
        }
        if (spec_.kind == EnvironmentSpec::Kind::many_good_experts) {
            if (!(spec_.good_fraction > 0.0 && spec_.good_fraction <= 1.0))
                throw std::invalid_argument("many_good_experts: fraction outside (0,1]");
            if (!(spec_.gap >= 0.0 && spec_.gap < 1.0))
                throw std::invalid_argument("many_good_experts: gap outside [0,1)");
        }
    }

    int n() const { return n_; }

    Outcome next(int t, const Decision& gamma, const AdversaryHook& hook) {
        switch (spec_.kind) {
            case EnvironmentSpec::Kind::iid_uniform: {
                Vec v(static_cast<size_t>(n_));
                for (double& x : v) x = rng_.next_double();
                return vector_outcome(std::move(v));
            }
            case EnvironmentSpec::Kind::iid_bernoulli: {
                Vec v(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    double q = spec_.bernoulli_q.empty()
                                   ? 0.5
                                   : spec_.bernoulli_q[static_cast<size_t>(i) %
                                                       spec_.bernoulli_q.size()];
                    v[static_cast<size_t>(i)] = rng_.bernoulli(q) ? 1.0 : 0.0;
                }
                return vector_outcome(std::move(v));
            }
            case EnvironmentSpec::Kind::alternating: {
                Vec v(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i)
                    v[static_cast<size_t>(i)] = ((t + i) % 2 == 0) ? 1.0 : 0.0;
                return vector_outcome(std::move(v));
            }
            case EnvironmentSpec::Kind::duplicated_experts: {
                Outcome inner = base_->next(t, aggregate(gamma), hook);
                Vec v(static_cast<size_t>(n_));
                const int nb = n_ / spec_.copies;
                for (int c = 0; c < spec_.copies; ++c)
                    for (int j = 0; j < nb; ++j)
                        v[static_cast<size_t>(c * nb + j)] = inner.losses[static_cast<size_t>(j)];
                return vector_outcome(std::move(v));
            }
            case EnvironmentSpec::Kind::many_good_experts: {
                const int good = std::max(1, static_cast<int>(std::ceil(spec_.good_fraction * n_)));
                Vec v(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    double u = rng_.next_double();
                    v[static_cast<size_t>(i)] =
                        i < good ? u * (1.0 - spec_.gap) : spec_.gap + u * (1.0 - spec_.gap);
                }
                return vector_outcome(std::move(v));
            }
            case EnvironmentSpec::Kind::adaptive_worst_case: {
                if (!hook) throw std::invalid_argument("adaptive_worst_case: hook required");
                Outcome omega = hook(gamma);
                if (static_cast<int>(omega.losses.size()) != n_)
                    throw std::invalid_argument("adaptive_worst_case: hook dimension mismatch");
                return omega;
            }
        }
        throw std::logic_error("environment: unknown kind");
    }

  private:
    Decision aggregate(const Decision& gamma) const {
        const int nb = n_ / spec_.copies;
        Vec w(static_cast<size_t>(nb), 0.0);
        for (int c = 0; c < spec_.copies; ++c)
            for (int j = 0; j < nb; ++j)
                w[static_cast<size_t>(j)] += gamma.weights[static_cast<size_t>(c * nb + j)];
        return Decision{std::move(w)};
    }

    EnvironmentSpec spec_;
    int n_ = 0;
    CounterRng rng_;
    std::unique_ptr<Environment> base_;
};

}  // namespace defcast
