#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bsg {

/// SplitMix64 step; used only to derive seeds for substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Generator for substream `stream` of a master seed. Tasks seeded this way
/// produce the same draws regardless of scheduling, which keeps runs
/// bit-identical across thread counts.
inline std::mt19937_64 substream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed + 0x632be59bd9b4e019ull * (stream + 1);
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform on [0, 1). Explicit so that draws are a pure function of the
/// generator state; library distributions may cache values across calls,
/// which leaks state between tasks that share a thread.
inline double uniform_01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal by the Marsaglia polar method, stateless (the paired
/// variate is discarded).
inline double standard_normal(std::mt19937_64& rng) {
    for (;;) {
        const double u = 2.0 * uniform_01(rng) - 1.0;
        const double v = 2.0 * uniform_01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Unit-rate exponential.
inline double standard_exponential(std::mt19937_64& rng) {
    return -std::log1p(-uniform_01(rng));
}

/// Streaming mean/variance accumulator (Welford).
class MeanVar {
  public:
    void push(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_of_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

  private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace bsg
