#pragma once

#include <cstdint>

namespace defcast {

// Counter-based generator: output i of stream (seed, stream) is a pure
// function of (seed, stream, i), so runs can be replayed and split without
// sharing state. The mixer is the splitmix64 finalizer.
class CounterRng {
  public:
    CounterRng() : CounterRng(0, 0) {}
    CounterRng(uint64_t seed, uint64_t stream) {
        key_ = mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ mix(stream + 0xbf58476d1ce4e5b9ULL));
    }

    uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    // Uniform on [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    bool bernoulli(double p) { return next_double() < p; }

  private:
    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace defcast
