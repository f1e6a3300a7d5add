#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "raresim/config.hpp"
#include "raresim/rng.hpp"

namespace raresim {

/// n probabilities in (0,1). Under LatinHypercube each of the n equal-width
/// strata [k/n, (k+1)/n) receives exactly one value, in random order.
std::vector<double> stratified_uniforms(std::size_t n, SamplingMode mode, Rng& rng);

/// n_samples points in [0,1)^n_dims with one point per stratum per dimension.
std::vector<std::vector<double>> latin_hypercube(std::size_t n_samples, std::size_t n_dims, Rng& rng);

/// Same layout as latin_hypercube, without stratification.
std::vector<std::vector<double>> random_design(std::size_t n_samples, std::size_t n_dims, Rng& rng);

double normal_quantile(double p);

/// Quantile of clamp(N(mean, sd), 0, 1).
double clamped_normal_quantile(double p, double mean, double sd);

/// E[clamp(N(mean, sd), 0, 1)].
double clamped_normal_mean(double mean, double sd);

/// Smallest k with P(X <= k) >= p for X ~ Poisson(rate).
std::uint64_t poisson_quantile(double p, double rate);

/// Education level in {0, 1/3, 2/3, 1} for the cumulative probability p.
double education_quantile(double p, const std::array<double, 4>& fractions);

} // namespace raresim
