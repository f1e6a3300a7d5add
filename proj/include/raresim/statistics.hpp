#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "raresim/scheduler.hpp"

namespace raresim {

struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 for a single sample
    double median = 0.0;    // lower of the two middles for even counts
    double max = 0.0;
    double zero_fraction = 0.0;
};

/// Throws ValidationError on empty input.
SummaryStats summarize(std::span<const double> samples);

struct Histogram {
    std::vector<double> edges;           // strictly increasing, bins + 1 entries
    std::vector<std::uint64_t> counts;   // one per bin
    std::uint64_t total = 0;

    std::size_t bins() const { return counts.size(); }
    /// Throws ValidationError when the invariants do not hold.
    void validate() const;
};

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

/// Bin i covers [edges[i], edges[i+1]); the last bin is closed on the right.
/// Values outside the edge range are clamped into the outer bins.
Histogram make_histogram(std::span<const double> samples, std::vector<double> edges);

/// Histogram of signed predisposition over a symmetric range [-m, m] with
/// m = max |value|; an all-zero input uses [-1, 1].
Histogram predisposition_histogram(std::span<const double> signed_values, std::size_t bins);
Histogram predisposition_histogram(const Snapshot& snapshot, std::size_t bins);
std::vector<double> signed_predispositions(const Snapshot& snapshot);

/// Edges used for death-toll histograms: 0, 1, 2, 3, 5, 10, 20, 50, 100, 200,
/// 500, 1000 and a catch-all top edge.
const std::vector<double>& death_toll_edges();

struct GammaFit {
    double shape = 0.0;
    double scale = 0.0;
    std::string method = "moments";
};

/// Method of moments on strictly positive samples (zeros must be removed by
/// the caller). Throws ValidationError for fewer than 2 samples, non-positive
/// samples or zero variance.
GammaFit fit_gamma_moments(std::span<const double> samples);

/// Drops zeros and negatives.
std::vector<double> positive_only(std::span<const double> samples);

/// Silverman's rule of thumb: 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate at each evaluation point.
std::vector<double> kde(std::span<const double> samples, double bandwidth, std::span<const double> eval_points);

/// KL(p || q) over normalized bin masses. Bins that are empty in either
/// histogram receive epsilon in both before normalization. Throws
/// ValidationError for mismatched edges or empty histograms.
double kl_divergence(const Histogram& p, const Histogram& q, double epsilon = 1e-12);

/// 1 - mass of the central bin of a 5-bin symmetric predisposition histogram.
double polarization_index(std::span<const double> signed_values);
double polarization_index(const Snapshot& snapshot);

/// Distribution summary used on both sides of a comparison.
struct SampleProfile {
    SummaryStats stats;
    Histogram histogram;
    std::optional<GammaFit> gamma;  // absent when fewer than 2 distinct positive samples
};

SampleProfile profile_samples(std::span<const double> samples, const std::vector<double>& edges = death_toll_edges());

struct ComparisonReport {
    SampleProfile synthetic;
    SampleProfile recorded;
    double mean_delta = 0.0;  // synthetic - recorded
    double variance_delta = 0.0;
    double zero_fraction_delta = 0.0;
    double kl_synthetic_recorded = 0.0;
    double kl_recorded_synthetic = 0.0;
    std::optional<double> gamma_shape_delta;
    std::optional<double> gamma_scale_delta;
};

/// Throws ValidationError when the two histograms use different bins.
ComparisonReport compare(const SampleProfile& synthetic, const SampleProfile& recorded);

nlohmann::json to_json(const SummaryStats& s);
nlohmann::json to_json(const Histogram& h);
nlohmann::json to_json(const GammaFit& g);
nlohmann::json to_json(const ComparisonReport& r);
std::string format_report(const ComparisonReport& r);

} // namespace raresim
