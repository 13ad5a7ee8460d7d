#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace defcast {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(e^a + e^b) without overflow; tolerates -inf on either side.
inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == neg_inf) return a;
    return a + std::log1p(std::exp(b - a));
}

// log(sum_i e^{args_i}), max-shifted. Empty input yields -inf.
inline double log_sum_exp(std::span<const double> args) {
    if (args.empty()) return neg_inf;
    double m = *std::max_element(args.begin(), args.end());
    if (m == neg_inf) return neg_inf;
    double s = 0.0;
    for (double a : args) s += std::exp(a - m);
    return m + std::log(s);
}

// Streaming variant for loops that do not want to materialize a vector.
class LogSumAccumulator {
  public:
    void add(double x) {
        if (x == neg_inf) return;
        if (x > max_) {
            sum_ = sum_ * std::exp(max_ - x) + 1.0;
            max_ = x;
        } else {
            sum_ += std::exp(x - max_);
        }
    }
    double value() const {
        if (max_ == neg_inf) return neg_inf;
        return max_ + std::log(sum_);
    }

  private:
    double max_ = neg_inf;
    double sum_ = 0.0;
};

}  // namespace defcast
