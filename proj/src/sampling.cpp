#include "raresim/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace raresim {

namespace {

template <class Vec>
void shuffle(Vec& v, Rng& rng) {
    // Fisher-Yates on our own bounded draws, for cross-library determinism.
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace

std::vector<double> stratified_uniforms(std::size_t n, SamplingMode mode, Rng& rng) {
    std::vector<double> out(n);
    if (mode == SamplingMode::Random) {
        for (auto& u : out) u = rng.uniform_open();
        return out;
    }
    std::vector<std::size_t> strata(n);
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    shuffle(strata, rng);
    const double width = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = (static_cast<double>(strata[i]) + rng.uniform_open()) * width;
        // Guard the upper stratum edge against rounding up to its neighbour.
        const double hi = static_cast<double>(strata[i] + 1) * width;
        if (u >= hi) u = std::nextafter(hi, 0.0);
        out[i] = u;
    }
    return out;
}

std::vector<std::vector<double>> latin_hypercube(std::size_t n_samples, std::size_t n_dims, Rng& rng) {
    std::vector<std::vector<double>> points(n_samples, std::vector<double>(n_dims));
    for (std::size_t d = 0; d < n_dims; ++d) {
        const auto column = stratified_uniforms(n_samples, SamplingMode::LatinHypercube, rng);
        for (std::size_t i = 0; i < n_samples; ++i) points[i][d] = column[i];
    }
    return points;
}

std::vector<std::vector<double>> random_design(std::size_t n_samples, std::size_t n_dims, Rng& rng) {
    std::vector<std::vector<double>> points(n_samples, std::vector<double>(n_dims));
    for (auto& p : points)
        for (auto& x : p) x = rng.uniform();
    return points;
}

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

double clamped_normal_quantile(double p, double mean, double sd) {
    const double x = sd > 0.0 ? mean + sd * normal_quantile(p) : mean;
    return std::clamp(x, 0.0, 1.0);
}

double clamped_normal_mean(double mean, double sd) {
    if (sd <= 0.0) return std::clamp(mean, 0.0, 1.0);
    const boost::math::normal_distribution<double> standard;
    const double a = (0.0 - mean) / sd;
    const double b = (1.0 - mean) / sd;
    const double phi_a = boost::math::pdf(standard, a);
    const double phi_b = boost::math::pdf(standard, b);
    const double cdf_a = boost::math::cdf(standard, a);
    const double cdf_b = boost::math::cdf(standard, b);
    // P(X > 1) * 1 + E[X; 0 < X < 1]
    return (1.0 - cdf_b) + mean * (cdf_b - cdf_a) + sd * (phi_a - phi_b);
}

std::uint64_t poisson_quantile(double p, double rate) {
    if (rate <= 0.0) return 0;
    if (rate > 700.0) {
        const double x = std::round(rate + std::sqrt(rate) * normal_quantile(p));
        return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }
    double pmf = std::exp(-rate);
    double cdf = pmf;
    std::uint64_t k = 0;
    while (cdf < p && k < 1000000) {
        ++k;
        pmf *= rate / static_cast<double>(k);
        cdf += pmf;
        if (pmf == 0.0 && static_cast<double>(k) > rate) break;
    }
    return k;
}

double education_quantile(double p, const std::array<double, 4>& fractions) {
    double cumulative = 0.0;
    for (std::size_t level = 0; level < 4; ++level) {
        cumulative += fractions[level];
        if (p < cumulative) return static_cast<double>(level) / 3.0;
    }
    // p beyond the accumulated mass (rounding): highest level with mass.
    for (std::size_t level = 4; level-- > 0;)
        if (fractions[level] > 0.0) return static_cast<double>(level) / 3.0;
    return 0.0;
}

} // namespace raresim
