// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace gridcal {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream key for (seed, i, j, ...). Distinct index tuples give unrelated streams,
/// so results never depend on which worker draws which sample.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> indices = {}) {
    return Rng(derive_seed(seed, indices));
}

/// Standard normal draw by Box–Muller on the raw engine output, so the stream is
/// identical across standard-library implementations.
class NormalSampler {
public:
    double operator()(Rng& rng) {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        constexpr double kTwoPi = 6.283185307179586476925286766559;
        double u1;
        do {
            u1 = uniform(rng);
        } while (u1 <= 0.0);
        const double u2 = uniform(rng);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        spare_ = radius * std::sin(kTwoPi * u2);
        has_spare_ = true;
        return radius * std::cos(kTwoPi * u2);
    }

private:
    static double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gridcal
