#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "raresim/error.hpp"
#include "raresim/rng.hpp"
#include "raresim/statistics.hpp"

using namespace raresim;

namespace {

Histogram hist_of(std::vector<std::uint64_t> counts) {
    Histogram h;
    h.edges = uniform_edges(0.0, static_cast<double>(counts.size()), counts.size());
    h.counts = std::move(counts);
    h.total = std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0});
    return h;
}

} // namespace

TEST_SUITE("statistics") {
    TEST_CASE("summary of a small sample") {
        const std::vector<double> x{0, 0, 1, 5};
        const auto s = summarize(x);
        CHECK(s.count == 4);
        CHECK(s.mean == doctest::Approx(1.5));
        CHECK(s.variance == doctest::Approx(17.0 / 3.0));
        CHECK(s.median == 0.0);
        CHECK(s.max == 5.0);
        CHECK(s.zero_fraction == 0.5);
        const std::vector<double> one{7.0};
        CHECK(summarize(one).variance == 0.0);
        CHECK(summarize(one).median == 7.0);
        CHECK_THROWS_AS(summarize(std::vector<double>{}), ValidationError);
    }

    TEST_CASE("histogram edges and clamping") {
        const std::vector<double> x{-5.0, 0.0, 0.5, 1.0, 1.999, 2.0, 9.0};
        const auto h = make_histogram(x, uniform_edges(0.0, 2.0, 2));
        CHECK(h.counts == std::vector<std::uint64_t>{3, 4});
        CHECK(h.total == 7);
        CHECK_THROWS_AS(make_histogram(x, {0.0, 0.0, 1.0}), ValidationError);
        CHECK_THROWS_AS(make_histogram(x, {1.0}), ValidationError);
    }

    TEST_CASE("property: histogram counts add up to the sample size") {
        Rng rng(1);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(1 + rng.below(500));
            for (auto& v : x) v = rng.normal(0.0, 3.0);
            const auto h = make_histogram(x, uniform_edges(-4.0, 4.0, 1 + rng.below(30)));
            REQUIRE(h.total == x.size());
            REQUIRE(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}) == x.size());
            CHECK_NOTHROW(h.validate());
        }
    }

    TEST_CASE("predisposition histogram is symmetric about zero") {
        const std::vector<double> x{-0.5, 0.2, 2.0};
        const auto h = predisposition_histogram(x, 4);
        CHECK(h.edges.front() == -2.0);
        CHECK(h.edges.back() == 2.0);
        const std::vector<double> zeros(10, 0.0);
        const auto z = predisposition_histogram(zeros, 5);
        CHECK(z.edges.front() == -1.0);
        CHECK(z.counts[2] == 10);
    }

    TEST_CASE("KL divergence of a histogram with itself is zero") {
        Rng rng(2);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::uint64_t> c(2 + rng.below(20));
            for (auto& v : c) v = rng.below(50);
            c[0] += 1;
            const auto h = hist_of(c);
            REQUIRE(kl_divergence(h, h) == doctest::Approx(0.0));
        }
    }

    TEST_CASE("KL divergence on two bins") {
        const auto p = hist_of({1, 0});
        const auto q = hist_of({1, 1});
        CHECK(std::fabs(kl_divergence(p, q) - std::log(2.0)) < 1e-9);
        // Independent oracle for a case without empty bins.
        const auto a = hist_of({3, 1});
        const auto b = hist_of({1, 3});
        const double oracle = 0.75 * std::log(3.0) + 0.25 * std::log(1.0 / 3.0);
        CHECK(kl_divergence(a, b) == doctest::Approx(oracle).epsilon(1e-12));
    }

    TEST_CASE("property: KL divergence is finite and non-negative") {
        Rng rng(3);
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t bins = 2 + rng.below(12);
            std::vector<std::uint64_t> a(bins), b(bins);
            for (auto& v : a) v = rng.below(6);
            for (auto& v : b) v = rng.below(6);
            a[0] += 1;
            b[bins - 1] += 1;
            const double kl = kl_divergence(hist_of(a), hist_of(b));
            REQUIRE(std::isfinite(kl));
            REQUIRE(kl >= 0.0);
        }
    }

    TEST_CASE("KL divergence rejects mismatched or empty histograms") {
        CHECK_THROWS_AS(kl_divergence(hist_of({1, 2}), hist_of({1, 2, 3})), ValidationError);
        CHECK_THROWS_AS(kl_divergence(hist_of({0, 0}), hist_of({1, 2})), ValidationError);
    }

    TEST_CASE("gamma method of moments recovers its parameters") {
        std::mt19937_64 gen(17);
        std::gamma_distribution<double> g(2.0, 3.0);
        std::vector<double> x(100000);
        for (auto& v : x) v = g(gen);
        const auto fit = fit_gamma_moments(x);
        CHECK(std::fabs(fit.shape - 2.0) / 2.0 < 0.1);
        CHECK(std::fabs(fit.scale - 3.0) / 3.0 < 0.1);
        CHECK(fit.method == "moments");
    }

    TEST_CASE("gamma fit preconditions") {
        CHECK_THROWS_AS(fit_gamma_moments(std::vector<double>{1.0}), ValidationError);
        CHECK_THROWS_AS(fit_gamma_moments(std::vector<double>{0.0, 1.0}), ValidationError);
        CHECK_THROWS_AS(fit_gamma_moments(std::vector<double>{2.0, 2.0}), ValidationError);
        CHECK(positive_only(std::vector<double>{0.0, -1.0, 3.0, 0.0, 4.0}) == std::vector<double>{3.0, 4.0});
    }

    TEST_CASE("Silverman bandwidth against a direct computation") {
        Rng rng(4);
        std::vector<double> x(1000);
        for (auto& v : x) v = rng.normal(1.0, 2.0);
        std::vector<double> sorted = x;
        std::sort(sorted.begin(), sorted.end());
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / (x.size() - 1));
        auto quantile = [&](double q) {
            const double pos = q * (sorted.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const double frac = pos - lo;
            return sorted[lo] + frac * (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);
        };
        const double iqr = quantile(0.75) - quantile(0.25);
        const double oracle = 0.9 * std::min(sd, iqr / 1.34) * std::pow(1000.0, -0.2);
        CHECK(silverman_bandwidth(x) == doctest::Approx(oracle).epsilon(0.01));
    }

    TEST_CASE("KDE integrates to one") {
        Rng rng(5);
        std::vector<double> x(500);
        for (auto& v : x) v = rng.normal(0.0, 1.0);
        const double bw = silverman_bandwidth(x);
        std::vector<double> grid;
        const double lo = -10.0, hi = 10.0, dx = 0.005;
        for (double t = lo; t <= hi + 1e-9; t += dx) grid.push_back(t);
        const auto density = kde(x, bw, grid);
        double integral = 0.0;
        for (std::size_t i = 1; i < density.size(); ++i) integral += 0.5 * (density[i] + density[i - 1]) * dx;
        CHECK(std::fabs(integral - 1.0) < 1e-3);
        for (double d : density) REQUIRE(d >= 0.0);
    }

    TEST_CASE("KDE of a single point is the Gaussian kernel") {
        const std::vector<double> x{0.0};
        const std::vector<double> at{0.0, 1.0};
        const auto d = kde(x, 1.0, at);
        CHECK(d[0] == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)));
        CHECK(d[1] == doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * M_PI)));
    }

    TEST_CASE("polarization extremes") {
        CHECK(polarization_index(std::vector<double>(100, 0.0)) == 0.0);
        std::vector<double> split;
        for (int i = 0; i < 50; ++i) {
            split.push_back(-1.0);
            split.push_back(1.0);
        }
        CHECK(polarization_index(split) == 1.0);
        std::vector<double> mixed = split;
        mixed.insert(mixed.end(), 100, 0.0);
        CHECK(polarization_index(mixed) == doctest::Approx(0.5));
    }

    TEST_CASE("property: polarization stays in the unit interval") {
        Rng rng(6);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<double> x(1 + rng.below(200));
            for (auto& v : x) v = rng.normal(0.0, 1.0 + trial * 0.01);
            const double p = polarization_index(x);
            REQUIRE(p >= 0.0);
            REQUIRE(p <= 1.0);
        }
    }

    TEST_CASE("comparing a sample with itself") {
        const std::vector<double> x{0, 0, 0, 1, 2, 2, 7, 30, 0, 4};
        const auto p = profile_samples(x);
        REQUIRE(p.gamma.has_value());
        const auto r = compare(p, p);
        CHECK(r.mean_delta == 0.0);
        CHECK(r.variance_delta == 0.0);
        CHECK(r.zero_fraction_delta == 0.0);
        CHECK(r.kl_synthetic_recorded == doctest::Approx(0.0));
        CHECK(r.kl_recorded_synthetic == doctest::Approx(0.0));
        CHECK(*r.gamma_shape_delta == 0.0);
        CHECK_FALSE(format_report(r).empty());
        CHECK(to_json(r).contains("mean_delta"));
    }

    TEST_CASE("a shifted sample moves the mean by the shift") {
        const std::vector<double> x{0, 1, 2, 3, 10};
        std::vector<double> y = x;
        for (auto& v : y) v += 1.0;
        const auto r = compare(profile_samples(y), profile_samples(x));
        CHECK(r.mean_delta == doctest::Approx(1.0));
        CHECK(r.variance_delta == doctest::Approx(0.0));
        CHECK(r.zero_fraction_delta == doctest::Approx(-0.2));
        CHECK(r.kl_synthetic_recorded > 0.0);
    }

    TEST_CASE("comparison requires shared bins") {
        const std::vector<double> x{0, 1, 2};
        CHECK_THROWS_AS(compare(profile_samples(x), profile_samples(x, uniform_edges(0, 3, 3))), ValidationError);
    }

    TEST_CASE("death toll edges are strictly increasing from zero") {
        const auto& e = death_toll_edges();
        CHECK(e.front() == 0.0);
        for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] > e[i - 1]);
    }
}
