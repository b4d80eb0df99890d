#pragma once

// Deterministic random machinery. Every randomized routine in this library is
// reproducible bit-for-bit from a 64-bit seed:
//
//   * stream seeding: splitmix64 over (seed, stream index), so independent
//     streams (one per bootstrap resample, one per pair-sampling anchor) can
//     be evaluated in any order without changing results;
//   * generator: std::mt19937_64, whose output sequence is fixed by the C++
//     standard, never std::*_distribution (those vary across standard
//     libraries);
//   * uniform doubles: top 53 bits of the generator output scaled by 2^-53;
//   * normals: Box-Muller on two such uniforms;
//   * truncation to [-1, 1]: rejection with a bounded retry budget.

#include <cstdint>
#include <random>

#include "fdi/core.hpp"

namespace fdi {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for sub-stream `index` of master seed `seed`.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Unbiased integer in [0, n) via 128-bit multiply-shift.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    // Standard normal via Box-Muller; the cosine branch only, one normal per
    // two uniforms, keeping the draw count of a spec predictable.
    double normal() {
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 == 0.0) u1 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }

    // Normal(mean, stddev) conditioned on [-1, 1] by rejection.
    double truncated_normal(double mean, double stddev) {
        constexpr int kRetryBudget = 1000;
        for (int i = 0; i < kRetryBudget; ++i) {
            double v = mean + stddev * normal();
            if (v >= -1.0 && v <= 1.0) return v;
        }
        throw Error("truncated_normal: retry budget exhausted; "
                    "distribution mass in [-1, 1] is too small");
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace fdi
