#pragma once

#include <cmath>
#include <cstdint>

namespace riskstop {

/// SplitMix64 stream. One instance per trajectory, derived deterministically
/// from a run seed and the trajectory index, so simulations are reproducible
/// and order-independent under any thread count.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) {
        // decorrelate (seed, stream) pairs before using the state
        state_ = mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
        state_ = mix(state_ ^ 0xBF58476D1CE4E5B9ULL);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Exponential with the given rate, by inversion.
    double exponential(double rate) {
        return -std::log1p(-uniform()) / rate;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace riskstop
