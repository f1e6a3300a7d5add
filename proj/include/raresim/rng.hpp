#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace raresim {

// Named substreams. Each consumer of randomness draws from its own stream so
// toggling one feature never shifts another feature's draws.
enum class Stream : std::uint64_t {
    ConstantTraits = 1,
    VariableTraits = 2,
    Graph = 3,
    PairSelection = 4,
    Outcomes = 5,
    Replacement = 6,
    Sweep = 7,
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// 64-bit Mersenne twister with a few draw helpers. Uniforms are computed from
/// raw bits rather than through std::uniform_real_distribution so streams stay
/// identical across standard library implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent stream derived from a master seed and a stream tag.
    static Rng substream(std::uint64_t master_seed, Stream stream);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1); never returns 0.
    double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    double normal(double mean, double sd);
    std::uint64_t poisson(double rate);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace raresim
