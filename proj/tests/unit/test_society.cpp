#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "raresim/error.hpp"
#include "raresim/fixtures.hpp"
#include "raresim/society.hpp"

using namespace raresim;

namespace {

RegionIndicators region() { return default_region(); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

TEST_SUITE("society-init") {
    TEST_CASE("married fraction 1 gives married agents only") {
        RegionIndicators r = region();
        r.married_fraction = 1.0;
        Rng rng(1);
        for (const auto& t : sample_constant_traits(r, SamplingMode::Random, 500, rng)) REQUIRE(t.married == 1.0);
    }

    TEST_CASE("point-mass tertiary education") {
        RegionIndicators r = region();
        r.education = {0.0, 0.0, 0.0, 1.0};
        Rng rng(2);
        for (const auto& t : sample_constant_traits(r, SamplingMode::LatinHypercube, 500, rng))
            REQUIRE(t.education == 1.0);
    }

    TEST_CASE("latin hypercube puts one religiosity draw in each stratum") {
        // Narrow normal so clamping to [0, 1] never merges strata.
        RegionIndicators r = region();
        r.religiosity_mean = 0.5;
        r.religiosity_sd = 0.1;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            const std::size_t n = 100;
            const auto traits = sample_constant_traits(r, SamplingMode::LatinHypercube, n, rng);
            std::vector<int> per_stratum(n, 0);
            for (const auto& t : traits) {
                const double p = normal_cdf((t.religious_training - r.religiosity_mean) / r.religiosity_sd);
                const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
                ++per_stratum[std::min(k, n - 1)];
            }
            for (int c : per_stratum) REQUIRE(c == 1);
        }
    }

    TEST_CASE("random mode is not stratified in general") {
        RegionIndicators r = region();
        r.religiosity_mean = 0.5;
        r.religiosity_sd = 0.1;
        Rng rng(3);
        const std::size_t n = 100;
        const auto traits = sample_constant_traits(r, SamplingMode::Random, n, rng);
        std::set<std::size_t> strata;
        for (const auto& t : traits)
            strata.insert(static_cast<std::size_t>(
                std::floor(normal_cdf((t.religious_training - 0.5) / 0.1) * static_cast<double>(n))));
        CHECK(strata.size() < n);
    }

    TEST_CASE("constant trait marginals converge to the region targets") {
        const RegionIndicators r = region();
        const auto targets = constant_trait_targets(r);
        Rng rng(4);
        const std::size_t n = 10000;
        const auto traits = sample_constant_traits(r, SamplingMode::Random, n, rng);
        std::array<double, 5> mean{}, sq{};
        for (const auto& t : traits) {
            const auto v = t.as_array();
            for (std::size_t k = 0; k < 5; ++k) {
                mean[k] += v[k];
                sq[k] += v[k] * v[k];
            }
        }
        for (std::size_t k = 0; k < 5; ++k) {
            mean[k] /= n;
            const double sd = std::sqrt(std::max(0.0, sq[k] / n - mean[k] * mean[k]));
            CHECK(std::fabs(mean[k] - targets[k]) <= 3.0 * sd / std::sqrt(double(n)) + 1e-12);
        }
    }

    TEST_CASE("variable traits at birth") {
        InitialTraitsConfig cfg;
        Rng rng(5);
        for (const auto& v : init_variable_traits(1000, cfg, rng)) {
            REQUIRE(v.crimes_committed == 0);
            REQUIRE(v.power >= cfg.power_min);
            REQUIRE(v.power <= cfg.power_max);
        }
        cfg.predisposition_scale = 0.0;
        for (const auto& v : init_variable_traits(100, cfg, rng)) {
            REQUIRE(v.police_predisposition == 0.0);
            REQUIRE(v.terror_predisposition == 0.0);
        }
    }

    TEST_CASE("most agents start below the terror threshold in absolute signed predisposition") {
        const SimulationConfig defaults;
        const double scale = defaults.initial.predisposition_scale;
        const double threshold = defaults.thresholds.terror_pred_threshold;
        // Monte Carlo oracle on an independent generator.
        std::mt19937_64 gen(99);
        std::normal_distribution<double> z(0.0, 1.0);
        const int draws = 1000000;
        int inside = 0;
        for (int i = 0; i < draws; ++i)
            if (std::fabs(std::fabs(z(gen)) * scale - std::fabs(z(gen)) * scale) < threshold) ++inside;
        const double expected = double(inside) / draws;
        CHECK(expected > 0.9);

        Rng rng(6);
        const int n = 1000;
        int near_neutral = 0;
        for (const auto& v : init_variable_traits(n, defaults.initial, rng))
            if (std::fabs(v.police_predisposition - v.terror_predisposition) < threshold) ++near_neutral;
        const double sigma = std::sqrt(expected * (1.0 - expected) / n);
        CHECK(std::fabs(double(near_neutral) / n - expected) < 3.0 * sigma);
    }

    TEST_CASE("graph on four nodes") {
        GraphConfig cfg;
        cfg.n_agents = 4;
        cfg.cluster_fraction = 0.0;
        cfg.base_random_edges_per_node = 2;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Rng rng(seed);
            const auto g = build_ideology_graph(cfg, rng);
            for (const auto& row : g.adjacency) REQUIRE(row.size() >= 2);
            REQUIRE(g.edge_count() <= 6);
        }
    }

    TEST_CASE("three triangles over nine clustered nodes") {
        GraphConfig cfg;
        cfg.n_agents = 100;
        cfg.cluster_fraction = 0.09;
        cfg.cluster_size = 3;
        Rng rng(7);
        const auto g = build_ideology_graph(cfg, rng);
        REQUIRE(g.clustered.size() == 9);
        // Count triangles among clustered nodes: each node sits in exactly one.
        std::set<std::uint32_t> clustered(g.clustered.begin(), g.clustered.end());
        for (std::uint32_t v : g.clustered) {
            int partners = 0;
            for (std::uint32_t w : g.adjacency[v])
                if (clustered.count(w)) ++partners;
            CHECK(partners >= 2);
        }
        int triangles = 0;
        for (std::uint32_t a : g.clustered)
            for (std::uint32_t b : g.clustered)
                for (std::uint32_t c : g.clustered) {
                    if (!(a < b && b < c)) continue;
                    auto has = [&](std::uint32_t x, std::uint32_t y) {
                        return std::binary_search(g.adjacency[x].begin(), g.adjacency[x].end(), y);
                    };
                    if (has(a, b) && has(b, c) && has(a, c)) ++triangles;
                }
        CHECK(triangles >= 3);
    }

    TEST_CASE("graph has no self loops or duplicates") {
        GraphConfig cfg;
        Rng rng(8);
        const auto g = build_ideology_graph(cfg, rng);
        for (std::size_t v = 0; v < g.adjacency.size(); ++v) {
            const auto& row = g.adjacency[v];
            REQUIRE(std::is_sorted(row.begin(), row.end()));
            REQUIRE(std::adjacent_find(row.begin(), row.end()) == row.end());
            REQUIRE_FALSE(std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(v)));
            for (std::uint32_t w : row) REQUIRE(std::binary_search(g.adjacency[w].begin(), g.adjacency[w].end(), v));
        }
    }

    TEST_CASE("default graphs keep the degree floor and the cluster cap") {
        const GraphConfig cfg;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            Rng rng = Rng::substream(seed, Stream::Graph);
            const auto g = build_ideology_graph(cfg, rng);
            std::size_t min_degree = g.adjacency.size();
            for (const auto& row : g.adjacency) min_degree = std::min(min_degree, row.size());
            REQUIRE(min_degree >= 2);
            REQUIRE(g.clustered.size() < 100);
        }
    }

    TEST_CASE("graph config rejects infeasible settings") {
        GraphConfig cfg;
        cfg.cluster_fraction = 0.10;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        cfg = GraphConfig{};
        cfg.n_agents = 3;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        cfg = GraphConfig{};
        cfg.base_random_edges_per_node = 1;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        cfg = GraphConfig{};
        cfg.n_agents = 4;
        cfg.cluster_fraction = 0.0;
        cfg.base_random_edges_per_node = 4;
        Rng rng(1);
        CHECK_THROWS_AS(build_ideology_graph(cfg, rng), ValidationError);
    }

    TEST_CASE("ten-agent society") {
        SimulationConfig cfg;
        cfg.graph.n_agents = 10;
        cfg.graph.cluster_fraction = 0.0;
        const Society s = build_society(cfg, region());
        CHECK(s.size() == 10);
        CHECK(s.tick() == 0);
        for (std::size_t slot = 0; slot < s.size(); ++slot) CHECK(s.degree(slot) >= 2);
    }

    TEST_CASE("balance holds for married fraction at n = 10000") {
        // Binomial oracle: P(|mean - 0.5| > 0.02) at n = 10000 is far below 1e-3.
        const double sd = std::sqrt(0.25 / 10000.0);
        CHECK(2.0 * (1.0 - normal_cdf(0.02 / sd)) < 1e-3);

        SimulationConfig cfg;
        cfg.graph.n_agents = 10000;
        cfg.balance_tolerance = 0.02;
        RegionIndicators r = region();
        r.married_fraction = 0.5;
        const Society s = build_society(cfg, r);
        double married = 0.0;
        for (const auto& a : s.agents()) married += a.tensor.constant.married;
        married /= static_cast<double>(s.size());
        CHECK(married >= 0.48);
        CHECK(married <= 0.52);
    }

    TEST_CASE("same seed gives the same society") {
        SimulationConfig cfg;
        cfg.seed = 77;
        const Society a = build_society(cfg, region());
        const Society b = build_society(cfg, region());
        CHECK(society_digest(a) == society_digest(b));
        CHECK(a.edges() == b.edges());
        cfg.seed = 78;
        CHECK(society_digest(build_society(cfg, region())) != society_digest(a));
    }

    TEST_CASE("failed balance names the worst trait") {
        SimulationConfig cfg;
        cfg.graph.n_agents = 10;
        cfg.graph.cluster_fraction = 0.0;
        cfg.balance_tolerance = 1e-9;
        cfg.balance_max_retries = 0;
        const std::set<std::string> names = {"education", "married", "wealth", "religious_training", "crime_exposure"};
        int failures = 0;
        for (std::uint64_t seed = 1; seed <= 400; ++seed) {
            cfg.seed = seed;
            try {
                build_society(cfg, region());
            } catch (const ValidationError& e) {
                ++failures;
                CHECK(names.count(e.field()) == 1);
            }
        }
        CHECK(failures > 0);
    }

    TEST_CASE("fresh tensors are valid") {
        const SimulationConfig cfg;
        Rng rng(9);
        for (int i = 0; i < 1000; ++i) {
            const FeatureTensor t = sample_fresh_tensor(region(), cfg, rng);
            REQUIRE(t.is_valid());
            REQUIRE(t.variable.crimes_committed == 0);
        }
    }
}
