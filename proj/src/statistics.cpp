#include "raresim/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "raresim/error.hpp"
#include "text_util.hpp"

namespace raresim {

using nlohmann::json;

SummaryStats summarize(std::span<const double> samples) {
    if (samples.empty()) throw ValidationError("samples", "summarize needs at least one sample");
    SummaryStats s;
    s.count = samples.size();
    const double n = static_cast<double>(s.count);
    // Two-pass moments, summed in sorted order so the result does not depend
    // on the input permutation.
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    std::size_t zeros = 0;
    for (double x : sorted) {
        sum += x;
        if (x == 0.0) ++zeros;
    }
    s.mean = sum / n;
    double ss = 0.0;
    for (double x : sorted) ss += (x - s.mean) * (x - s.mean);
    s.variance = s.count > 1 ? ss / (n - 1.0) : 0.0;
    s.median = sorted[(s.count - 1) / 2];
    s.max = sorted.back();
    s.zero_fraction = static_cast<double>(zeros) / n;
    return s;
}

void Histogram::validate() const {
    if (edges.size() < 2) throw ValidationError("edges", "need at least two edges");
    if (counts.size() + 1 != edges.size()) throw ValidationError("counts", "must have one entry per bin");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw ValidationError("edges", "must be strictly increasing");
    if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) != total)
        throw ValidationError("total", "must equal the sum of counts");
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
    if (bins < 1 || !(hi > lo)) throw ValidationError("edges", "need bins >= 1 and hi > lo");
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    edges.back() = hi;
    return edges;
}

Histogram make_histogram(std::span<const double> samples, std::vector<double> edges) {
    Histogram h;
    h.edges = std::move(edges);
    h.counts.assign(h.edges.size() - 1, 0);
    h.validate();
    for (double x : samples) {
        // upper_bound gives the first edge strictly above x.
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
        std::size_t bin = it == h.edges.begin() ? 0 : static_cast<std::size_t>(it - h.edges.begin()) - 1;
        bin = std::min(bin, h.counts.size() - 1);
        ++h.counts[bin];
        ++h.total;
    }
    return h;
}

Histogram predisposition_histogram(std::span<const double> signed_values, std::size_t bins) {
    if (bins < 2) throw ValidationError("bins", "must be >= 2");
    double m = 0.0;
    for (double x : signed_values) m = std::max(m, std::abs(x));
    if (m == 0.0) m = 1.0;
    return make_histogram(signed_values, uniform_edges(-m, m, bins));
}

std::vector<double> signed_predispositions(const Snapshot& snapshot) {
    std::vector<double> values;
    values.reserve(snapshot.agents.size());
    for (const auto& a : snapshot.agents) values.push_back(signed_predisposition(a.tensor));
    return values;
}

Histogram predisposition_histogram(const Snapshot& snapshot, std::size_t bins) {
    const auto values = signed_predispositions(snapshot);
    return predisposition_histogram(values, bins);
}

const std::vector<double>& death_toll_edges() {
    static const std::vector<double> edges{0, 1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000, 1e12};
    return edges;
}

std::vector<double> positive_only(std::span<const double> samples) {
    std::vector<double> out;
    for (double x : samples)
        if (x > 0.0) out.push_back(x);
    return out;
}

GammaFit fit_gamma_moments(std::span<const double> samples) {
    if (samples.size() < 2) throw ValidationError("samples", "gamma fit needs at least two samples");
    for (double x : samples)
        if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError("samples", "gamma fit needs strictly positive samples");
    const SummaryStats s = summarize(samples);
    if (!(s.variance > 0.0)) throw ValidationError("samples", "gamma fit needs non-zero variance");
    GammaFit g;
    g.shape = s.mean * s.mean / s.variance;
    g.scale = s.variance / s.mean;
    return g;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.size() < 2) throw ValidationError("samples", "bandwidth needs at least two samples");
    const SummaryStats s = summarize(samples);
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double sd = std::sqrt(s.variance);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) throw ValidationError("samples", "bandwidth needs non-zero spread");
    return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

std::vector<double> kde(std::span<const double> samples, double bandwidth, std::span<const double> eval_points) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValidationError("bandwidth", "must be > 0");
    if (samples.empty()) throw ValidationError("samples", "kde needs at least one sample");
    const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out;
    out.reserve(eval_points.size());
    for (double x : eval_points) {
        double sum = 0.0;
        for (double xi : samples) {
            const double z = (x - xi) / bandwidth;
            sum += std::exp(-0.5 * z * z);
        }
        out.push_back(sum * norm);
    }
    return out;
}

double kl_divergence(const Histogram& p, const Histogram& q, double epsilon) {
    p.validate();
    q.validate();
    if (p.edges != q.edges) throw ValidationError("edges", "histograms must share bin edges");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon", "must be > 0");
    if (p.total == 0 || q.total == 0) throw ValidationError("total", "histograms must be non-empty");
    const std::size_t bins = p.bins();
    std::vector<double> pm(bins), qm(bins);
    double psum = 0.0, qsum = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const bool smooth = p.counts[i] == 0 || q.counts[i] == 0;
        pm[i] = static_cast<double>(p.counts[i]) / static_cast<double>(p.total) + (smooth ? epsilon : 0.0);
        qm[i] = static_cast<double>(q.counts[i]) / static_cast<double>(q.total) + (smooth ? epsilon : 0.0);
        psum += pm[i];
        qsum += qm[i];
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double pi = pm[i] / psum;
        const double qi = qm[i] / qsum;
        if (pi > 0.0) kl += pi * std::log(pi / qi);
    }
    return std::max(0.0, kl);
}

double polarization_index(std::span<const double> signed_values) {
    if (signed_values.empty()) return 0.0;
    const Histogram h = predisposition_histogram(signed_values, 5);
    return 1.0 - static_cast<double>(h.counts[2]) / static_cast<double>(h.total);
}

double polarization_index(const Snapshot& snapshot) {
    const auto values = signed_predispositions(snapshot);
    return polarization_index(values);
}

SampleProfile profile_samples(std::span<const double> samples, const std::vector<double>& edges) {
    SampleProfile p;
    p.stats = summarize(samples);
    p.histogram = make_histogram(samples, edges);
    const auto positive = positive_only(samples);
    if (positive.size() >= 2 && std::adjacent_find(positive.begin(), positive.end(), std::not_equal_to<>()) != positive.end())
        p.gamma = fit_gamma_moments(positive);
    return p;
}

ComparisonReport compare(const SampleProfile& synthetic, const SampleProfile& recorded) {
    if (synthetic.histogram.edges != recorded.histogram.edges)
        throw ValidationError("histogram", "synthetic and recorded binning differ");
    ComparisonReport r;
    r.synthetic = synthetic;
    r.recorded = recorded;
    r.mean_delta = synthetic.stats.mean - recorded.stats.mean;
    r.variance_delta = synthetic.stats.variance - recorded.stats.variance;
    r.zero_fraction_delta = synthetic.stats.zero_fraction - recorded.stats.zero_fraction;
    r.kl_synthetic_recorded = kl_divergence(synthetic.histogram, recorded.histogram);
    r.kl_recorded_synthetic = kl_divergence(recorded.histogram, synthetic.histogram);
    if (synthetic.gamma && recorded.gamma) {
        r.gamma_shape_delta = synthetic.gamma->shape - recorded.gamma->shape;
        r.gamma_scale_delta = synthetic.gamma->scale - recorded.gamma->scale;
    }
    return r;
}

json to_json(const SummaryStats& s) {
    return {{"count", s.count},   {"mean", s.mean}, {"variance", s.variance},
            {"median", s.median}, {"max", s.max},   {"zero_fraction", s.zero_fraction}};
}

json to_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}, {"total", h.total}}; }

json to_json(const GammaFit& g) { return {{"shape", g.shape}, {"scale", g.scale}, {"method", g.method}}; }

namespace {

json profile_json(const SampleProfile& p) {
    json j{{"summary", to_json(p.stats)}, {"histogram", to_json(p.histogram)}};
    j["gamma"] = p.gamma ? to_json(*p.gamma) : json(nullptr);
    return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

json to_json(const ComparisonReport& r) {
    return {{"synthetic", profile_json(r.synthetic)},
            {"recorded", profile_json(r.recorded)},
            {"mean_delta", r.mean_delta},
            {"variance_delta", r.variance_delta},
            {"zero_fraction_delta", r.zero_fraction_delta},
            {"kl_synthetic_recorded", r.kl_synthetic_recorded},
            {"kl_recorded_synthetic", r.kl_recorded_synthetic},
            {"gamma_shape_delta", optional_json(r.gamma_shape_delta)},
            {"gamma_scale_delta", optional_json(r.gamma_scale_delta)}};
}

std::string format_report(const ComparisonReport& r) {
    using detail::format_double;
    std::ostringstream out;
    auto row = [&](const char* name, double syn, double rec) {
        out << "  " << name << ": synthetic " << format_double(syn) << ", recorded " << format_double(rec) << ", delta "
            << format_double(syn - rec) << '\n';
    };
    out << "  count: synthetic " << r.synthetic.stats.count << ", recorded " << r.recorded.stats.count << '\n';
    row("mean", r.synthetic.stats.mean, r.recorded.stats.mean);
    row("variance", r.synthetic.stats.variance, r.recorded.stats.variance);
    row("median", r.synthetic.stats.median, r.recorded.stats.median);
    row("zero_fraction", r.synthetic.stats.zero_fraction, r.recorded.stats.zero_fraction);
    out << "  kl(synthetic||recorded): " << format_double(r.kl_synthetic_recorded) << '\n';
    out << "  kl(recorded||synthetic): " << format_double(r.kl_recorded_synthetic) << '\n';
    if (r.gamma_shape_delta) {
        row("gamma_shape", r.synthetic.gamma->shape, r.recorded.gamma->shape);
        row("gamma_scale", r.synthetic.gamma->scale, r.recorded.gamma->scale);
    } else {
        out << "  gamma: not fitted (too few positive samples)\n";
    }
    return out.str();
}

} // namespace raresim
