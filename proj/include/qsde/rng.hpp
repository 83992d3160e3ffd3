#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "qsde/errors.hpp"

namespace qsde {

// SplitMix64 finalizer; a full-avalanche 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so parallel trajectories get reproducible streams regardless of
// how the work is scheduled.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(mix64(seed) ^ (stream * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL))) {}

    std::uint64_t bits(std::uint64_t counter) const { return mix64(key_ ^ mix64(counter + key_)); }

    // Uniform on the open interval (0, 1).
    double uniform(std::uint64_t counter) const {
        return (double(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes uniform slots 2c and 2c+1.
    double gaussian(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // +/- 1 with probability 1/2 each; consumes slot 2c.
    double rademacher(std::uint64_t counter) const {
        return (bits(2 * counter) & 1u) ? 1.0 : -1.0;
    }

private:
    std::uint64_t key_;
};

enum class NoiseKind { rademacher, gaussian };

struct NoiseLaw {
    NoiseKind kind = NoiseKind::rademacher;

    double sample(const CounterRng& rng, std::uint64_t counter) const {
        return kind == NoiseKind::rademacher ? rng.rademacher(counter) : rng.gaussian(counter);
    }
};

inline NoiseLaw parse_noise_law(const std::string& name) {
    if (name == "rademacher") return {NoiseKind::rademacher};
    if (name == "gaussian") return {NoiseKind::gaussian};
    throw ConfigError("unknown noise law '" + name + "' (valid: rademacher, gaussian)");
}

inline const char* noise_name(const NoiseLaw& law) {
    return law.kind == NoiseKind::rademacher ? "rademacher" : "gaussian";
}

// Stream ids per trajectory; purpose 0 drives the noise increments, purpose 1
// the initial-state sampler.
inline std::uint64_t trajectory_stream(std::uint64_t trajectory, std::uint64_t purpose) {
    return trajectory * 4 + purpose;
}

} // namespace qsde
