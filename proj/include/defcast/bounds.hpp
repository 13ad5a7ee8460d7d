#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "defcast/logsumexp.hpp"
#include "defcast/potential.hpp"

namespace defcast {

// sqrt(2 T ln N): the fixed-horizon best-expert bound.
inline double bound_thm1(double t, int n) {
    if (t < 1) throw std::invalid_argument("bound_thm1: T must be >= 1");
    if (n < 1) throw std::invalid_argument("bound_thm1: N must be >= 1");
    if (n == 1) return 0.0;
    return std::sqrt(2.0 * t * std::log(static_cast<double>(n)));
}

// 2 sqrt(T ln(1/eps)) + 7 sqrt(T): the uniform quantile-regret bound.
inline double bound_eq6(double t, double eps) {
    if (t < 1) throw std::invalid_argument("bound_eq6: T must be >= 1");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("bound_eq6: eps outside (0,1]");
    return 2.0 * std::sqrt(t * std::log(1.0 / eps)) + 7.0 * std::sqrt(t);
}

// sqrt(2 T ln N) + sqrt(ln(N)/8): the best uniform-in-T best-expert bound.
inline double bound_eq9(double t, int n) {
    if (n < 1) throw std::invalid_argument("bound_eq9: N must be >= 1");
    if (n == 1) return 0.0;
    double ln_n = std::log(static_cast<double>(n));
    return std::sqrt(2.0 * t * ln_n) + std::sqrt(ln_n / 8.0);
}

// The NormalHedge quantile bound, valid uniformly for delta in (0, 1/2].
inline double bound_eq10(double t, int n, double eps, double delta) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("bound_eq10: eps outside (0,1]");
    if (!(delta > 0.0 && delta <= 0.5))
        throw std::invalid_argument("bound_eq10: delta outside (0,1/2]");
    if (n < 2) throw std::invalid_argument("bound_eq10: N must be >= 2");
    double ln_n = std::log(static_cast<double>(n));
    double inner = 3.0 * (1.0 + 50.0 * delta) * t +
                   (16.0 * ln_n * ln_n / delta) * (10.2 / (delta * delta) + ln_n);
    return std::sqrt(1.0 + std::log(1.0 / eps)) * std::sqrt(inner);
}

inline std::vector<double> default_delta_grid(int points = 100) {
    // Log-spaced over (1e-3, 1/2].
    std::vector<double> grid(static_cast<size_t>(points));
    for (int i = 0; i < points; ++i) {
        double frac = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
        grid[static_cast<size_t>(i)] = 1e-3 * std::pow(0.5 / 1e-3, frac);
    }
    grid.back() = 0.5;
    return grid;
}

inline double min_bound_eq10(double t, int n, double eps, std::span<const double> delta_grid) {
    double best = std::numeric_limits<double>::infinity();
    for (double d : delta_grid) best = std::min(best, bound_eq10(t, n, eps, d));
    return best;
}

// Weighted-Average / Kalnishkan-Vyugin quantile bound, constant fixed ahead.
inline double bound_kv(double t, double eps, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("bound_kv: c must be positive");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("bound_kv: eps outside (0,1]");
    return (1.0 / c) * std::sqrt(t) * std::log(1.0 / eps) + c * std::sqrt(t);
}

// Aggregating Algorithm form: an upper bound on L_T itself.
inline double bound_aa(double l_eps, double eps, double c, double eta) {
    if (!(c >= 1.0)) throw std::invalid_argument("bound_aa: c must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("bound_aa: eta must be positive");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("bound_aa: eps outside (0,1]");
    return c * l_eps + (c / eta) * std::log(1.0 / eps);
}

// Explicit part of the mixture-integral bound; reference only, the O(ln 1/eps)
// tail is unspecified. Defined for T >= 16 so that ln ln T > 0.
inline double bound_eq4_reference(double t, double eps) {
    if (t < 16) throw std::invalid_argument("bound_eq4_reference: defined for T >= 16");
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("bound_eq4_reference: eps outside (0,1]");
    double lnt = std::log(t);
    return (1.0 + 1.0 / lnt) *
           std::sqrt(2.0 * t * std::log(1.0 / eps) + 5.0 * t * std::log(lnt));
}

// O(sqrt(T ln 1/eps) + ln^2 N) with constant 1; reference only, never asserted.
inline double bound_eq1_reference(double t, int n, double eps) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("bound_eq1_reference: eps outside (0,1]");
    double ln_n = std::log(static_cast<double>(std::max(n, 1)));
    return std::sqrt(t * std::log(1.0 / eps)) + ln_n * ln_n;
}

// Weighted quantile bound of the time-varying strategy:
// sum_n u_n L^n + 2 sqrt(T sum_n u_n ln(u_n/p_n)) + 7 sqrt(T), regret part only.
inline double bound_remark2(double t, std::span<const double> u, std::span<const double> p) {
    if (u.size() != p.size()) throw std::invalid_argument("bound_remark2: dimension mismatch");
    double divergence = 0.0;
    for (size_t n = 0; n < u.size(); ++n) {
        if (u[n] < 0.0) throw std::invalid_argument("bound_remark2: u must be nonnegative");
        if (u[n] == 0.0) continue;
        if (!(p[n] > 0.0)) throw std::invalid_argument("bound_remark2: p must be positive on supp u");
        divergence += u[n] * std::log(u[n] / p[n]);
    }
    return 2.0 * std::sqrt(t * divergence) + 7.0 * std::sqrt(t);
}

enum class RefBound { eq9, eq10, kv, aa, eq4_reference, eq1_reference, remark2 };

struct BoundParams {
    double t = 0;
    int n = 0;
    double eps = 0;
    double delta = 0.5;    // NormalHedge free parameter
    double c_kv = 1.0;
    double c_aa = 1.0;
    double eta_aa = 1.0;
    double l_eps = 0.0;    // for the AA form
    Vec u, p;              // for remark2
};

inline double reference_bounds(const BoundParams& params, RefBound which) {
    switch (which) {
        case RefBound::eq9: return bound_eq9(params.t, params.n);
        case RefBound::eq10: return bound_eq10(params.t, params.n, params.eps, params.delta);
        case RefBound::kv: return bound_kv(params.t, params.eps, params.c_kv);
        case RefBound::aa: return bound_aa(params.l_eps, params.eps, params.c_aa, params.eta_aa);
        case RefBound::eq4_reference: return bound_eq4_reference(params.t, params.eps);
        case RefBound::eq1_reference: return bound_eq1_reference(params.t, params.n, params.eps);
        case RefBound::remark2: return bound_remark2(params.t, params.u, params.p);
    }
    throw std::invalid_argument("reference_bounds: unknown selector");
}

struct Eq3Check {
    double value = 0.0;  // sum_j w_j exp((L-L^eps) eta_j - T eta_j^2 / 2)
    bool ok = false;
};

// Discrete analog of the eta-integral inequality: exact for the discretized
// mixture, so it is asserted (with the accumulated solver slack) rather than
// the asymptotic expansion.
inline Eq3Check check_eq3_discrete(double cum_loss, double quantile_loss_value, double t,
                                   std::span<const EtaNode> grid, double eps,
                                   double slack = 0.0) {
    if (grid.empty()) throw std::invalid_argument("check_eq3_discrete: empty grid");
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("check_eq3_discrete: eps outside (0,1]");
    double gap = cum_loss - quantile_loss_value;
    LogSumAccumulator acc;
    for (const EtaNode& node : grid)
        acc.add(std::log(node.weight) + gap * node.eta - t * node.eta * node.eta / 2.0);
    double log_value = acc.value();
    double log_limit = std::log(1.0 / eps) + std::log1p(slack);
    return Eq3Check{std::exp(log_value), log_value <= log_limit};
}

struct CrossoverResult {
    bool found = false;
    double t_star = std::numeric_limits<double>::quiet_NaN();
};

// Largest T where the time-varying bound beats the best NormalHedge bound
// over the delta grid. Bisection on log T; the predicate flips once because
// eq10 carries the smaller sqrt(T) coefficient but a large additive constant.
inline CrossoverResult crossover(int n, double eps, std::span<const double> delta_grid) {
    if (n < 2) throw std::invalid_argument("crossover: N must be >= 2");
    auto better = [&](double t) { return bound_eq6(t, eps) <= min_bound_eq10(t, n, eps, delta_grid); };
    const double t_max = 1e16;
    if (!better(1.0)) return CrossoverResult{false, std::numeric_limits<double>::quiet_NaN()};
    if (better(t_max)) return CrossoverResult{false, std::numeric_limits<double>::quiet_NaN()};
    double lo = 0.0, hi = std::log(t_max);
    for (int it = 0; it < 200; ++it) {
        double mid = (lo + hi) / 2.0;
        if (better(std::exp(mid)))
            lo = mid;
        else
            hi = mid;
    }
    return CrossoverResult{true, std::floor(std::exp(lo))};
}

inline CrossoverResult crossover(int n, double eps) {
    std::vector<double> grid = default_delta_grid();
    return crossover(n, eps, grid);
}

}  // namespace defcast
