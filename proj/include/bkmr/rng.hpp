#pragma once

#include <cstdint>
#include <random>

namespace bkmr {

using Rng = std::mt19937_64;

/// Mixes (seed, stream, substream) through SplitMix64 so that every chain,
/// replicate and posterior draw gets an independent, order-free generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0) {
    return Rng(derive_seed(seed, stream, substream));
}

inline double std_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

/// Gamma variate with shape/rate parameterization.
inline double gamma_shape_rate(Rng& rng, double shape, double rate) {
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    return dist(rng);
}

}  // namespace bkmr
