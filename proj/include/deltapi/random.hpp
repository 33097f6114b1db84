#pragma once

#include <cstdint>
#include <random>

namespace deltapi {

// Every random stream is derived from the run seed by hashing (seed, stream id),
// so streams are independent of evaluation order and of each other.
namespace stream {
inline constexpr std::uint64_t kControlChannel = 0x100;      // + channel index
inline constexpr std::uint64_t kDisturbanceChannel = 0x200;  // + channel index
inline constexpr std::uint64_t kRestartStates = 0x300;
inline constexpr std::uint64_t kOnPolicyStates = 0x400;
inline constexpr std::uint64_t kNoiseOffset = 0x5eed;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    return splitmix64(seed ^ splitmix64(stream_id));
}

/// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Portable uniform draws (std::uniform_real_distribution is implementation-defined).
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

    double next(double lo, double hi) { return lo + (hi - lo) * unit_double(engine_()); }

private:
    std::mt19937_64 engine_;
};

}  // namespace deltapi
