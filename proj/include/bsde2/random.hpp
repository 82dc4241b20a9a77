#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsde2 {

// Counter-based stream: every variate is a pure function of
// (seed, path, step, lane), so paths can be simulated in any order.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform on the open interval (0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t lane) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ path);
    h = splitmix64(h ^ (step * 4 + lane));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by Box-Muller on two counter uniforms.
inline double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step) noexcept {
    const double u1 = counter_uniform(seed, path, step, 0);
    const double u2 = counter_uniform(seed, path, step, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace bsde2
