#include "raresim/rng.hpp"

#include <cmath>

namespace raresim {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::substream(std::uint64_t master_seed, Stream stream) {
    std::uint64_t state = master_seed ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL);
    splitmix64(state);
    return Rng(splitmix64(state));
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Lemire's nearly-divisionless method.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = -bound % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(engine_()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal(double mean, double sd) {
    // Marsaglia polar method.
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return mean + sd * u * std::sqrt(-2.0 * std::log(s) / s);
}

std::uint64_t Rng::poisson(double rate) {
    if (rate <= 0.0) return 0;
    if (rate < 30.0) {
        // Knuth multiplication; fine for the small rates used for wealth.
        const double limit = std::exp(-rate);
        std::uint64_t k = 0;
        double p = uniform_open();
        while (p > limit) {
            ++k;
            p *= uniform_open();
        }
        return k;
    }
    if (rate > 700.0) {
        // exp(-rate) underflows; the normal approximation is exact enough here.
        const double x = std::round(normal(rate, std::sqrt(rate)));
        return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }
    // Inversion by sequential search for moderate rates.
    const double u = uniform();
    double pmf = std::exp(-rate);
    double cdf = pmf;
    std::uint64_t k = 0;
    while (cdf < u && k < 100000) {
        ++k;
        pmf *= rate / static_cast<double>(k);
        cdf += pmf;
    }
    return k;
}

} // namespace raresim
