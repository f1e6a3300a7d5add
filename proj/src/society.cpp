#include "raresim/society.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "digest.hpp"
#include "raresim/error.hpp"
#include "raresim/sampling.hpp"

namespace raresim {

std::size_t IdeologyGraph::edge_count() const {
    std::size_t twice = 0;
    for (const auto& row : adjacency) twice += row.size();
    return twice / 2;
}

Society::Society(std::vector<AgentState> agents, IdeologyGraph graph)
    : agents_(std::move(agents)), graph_(std::move(graph)) {
    if (graph_.adjacency.size() != agents_.size())
        throw ContractViolation("society: adjacency size does not match agent count");
    index_.reserve(agents_.size());
    for (std::size_t slot = 0; slot < agents_.size(); ++slot) {
        if (!index_.emplace(agents_[slot].id, slot).second)
            throw ContractViolation("society: duplicate agent id " + std::to_string(agents_[slot].id));
        next_id_ = std::max(next_id_, agents_[slot].id + 1);
    }
}

std::optional<std::size_t> Society::slot_of(AgentId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Society::adjacent(AgentId a, AgentId b) const {
    const auto sa = slot_of(a);
    const auto sb = slot_of(b);
    if (!sa || !sb) return false;
    const auto& row = graph_.adjacency[*sa];
    return std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(*sb));
}

std::vector<std::pair<AgentId, AgentId>> Society::edges() const {
    std::vector<std::pair<AgentId, AgentId>> out;
    out.reserve(graph_.edge_count());
    for (std::size_t s = 0; s < agents_.size(); ++s) {
        for (std::uint32_t t : graph_.adjacency[s]) {
            if (t <= s) continue;
            AgentId a = agents_[s].id, b = agents_[t].id;
            if (a > b) std::swap(a, b);
            out.emplace_back(a, b);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> Society::slots_by_id() const {
    std::vector<std::size_t> order(agents_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return agents_[x].id < agents_[y].id; });
    return order;
}

AgentState Society::replace(std::size_t slot, FeatureTensor tensor) {
    AgentState removed = agents_.at(slot);
    index_.erase(removed.id);
    AgentState fresh;
    fresh.id = next_id_++;
    fresh.tensor = tensor;
    fresh.born_tick = tick_;
    agents_[slot] = fresh;
    index_.emplace(fresh.id, slot);
    return removed;
}

void Society::clear_edges() {
    for (auto& row : graph_.adjacency) row.clear();
    graph_.clustered.clear();
}

double Society::mean_signed_predisposition() const {
    if (agents_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& a : agents_) sum += signed_predisposition(a.tensor);
    return sum / static_cast<double>(agents_.size());
}

std::vector<ConstantTraits> sample_constant_traits(const RegionIndicators& region, SamplingMode mode,
                                                   std::size_t n, Rng& rng) {
    region.validate();
    if (n == 0) throw ValidationError("n", "must be >= 1");

    // One independent column of probabilities per trait: no feature correlation.
    const auto u_edu = stratified_uniforms(n, mode, rng);
    const auto u_married = stratified_uniforms(n, mode, rng);
    const auto u_wealth = stratified_uniforms(n, mode, rng);
    const auto u_religion = stratified_uniforms(n, mode, rng);
    const auto u_crime = stratified_uniforms(n, mode, rng);

    std::vector<ConstantTraits> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& t = out[i];
        t.education = education_quantile(u_edu[i], region.education);
        t.married = u_married[i] < region.married_fraction ? 1.0 : 0.0;
        t.wealth = static_cast<double>(poisson_quantile(u_wealth[i], region.wealth_rate)) / region.wealth_rate;
        t.religious_training = clamped_normal_quantile(u_religion[i], region.religiosity_mean, region.religiosity_sd);
        t.crime_exposure = clamped_normal_quantile(u_crime[i], region.crime_density_mean, region.crime_density_sd);
    }
    return out;
}

std::vector<VariableTraits> init_variable_traits(std::size_t n, const InitialTraitsConfig& cfg, Rng& rng) {
    std::vector<VariableTraits> out(n);
    for (auto& v : out) {
        v.crimes_committed = 0;
        v.police_predisposition = std::fabs(rng.normal(0.0, 1.0)) * cfg.predisposition_scale;
        v.terror_predisposition = std::fabs(rng.normal(0.0, 1.0)) * cfg.predisposition_scale;
        v.power = cfg.power_min + (cfg.power_max - cfg.power_min) * rng.uniform();
    }
    return out;
}

namespace {

bool add_edge(IdeologyGraph& g, std::uint32_t a, std::uint32_t b) {
    if (a == b) return false;
    auto& ra = g.adjacency[a];
    auto it = std::lower_bound(ra.begin(), ra.end(), b);
    if (it != ra.end() && *it == b) return false;
    ra.insert(it, b);
    auto& rb = g.adjacency[b];
    rb.insert(std::lower_bound(rb.begin(), rb.end(), a), a);
    return true;
}

} // namespace

IdeologyGraph build_ideology_graph(const GraphConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.n_agents);
    const auto floor_degree = static_cast<std::size_t>(cfg.base_random_edges_per_node);
    const auto cluster_size = static_cast<std::size_t>(cfg.cluster_size);

    IdeologyGraph g;
    g.adjacency.resize(n);

    // (a) cliques over a random sample of < 10% of the nodes.
    const auto budget = static_cast<std::size_t>(std::floor(cfg.cluster_fraction * static_cast<double>(n)));
    const std::size_t n_clusters = budget / cluster_size;
    if (n_clusters > 0) {
        std::vector<std::uint32_t> nodes(n);
        std::iota(nodes.begin(), nodes.end(), 0u);
        const std::size_t take = n_clusters * cluster_size;
        // Partial Fisher-Yates: the first `take` entries form the sample.
        for (std::size_t i = 0; i < take; ++i) std::swap(nodes[i], nodes[i + rng.below(n - i)]);
        for (std::size_t c = 0; c < n_clusters; ++c) {
            const std::size_t base = c * cluster_size;
            for (std::size_t i = 0; i < cluster_size; ++i)
                for (std::size_t j = i + 1; j < cluster_size; ++j) add_edge(g, nodes[base + i], nodes[base + j]);
        }
        g.clustered.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(g.clustered.begin(), g.clustered.end());
    }

    // (b) random distinct partners until the degree floor holds everywhere.
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t v = 0; v < n; ++v) {
        int misses = 0;
        while (g.adjacency[v].size() < floor_degree) {
            if (misses < 32) {
                const auto w = static_cast<std::uint32_t>(rng.below(n));
                if (!add_edge(g, v, w)) ++misses;
                continue;
            }
            // Dense corner (tiny n): draw from the explicit candidate list.
            candidates.clear();
            for (std::uint32_t w = 0; w < n; ++w) {
                if (w == v) continue;
                if (!std::binary_search(g.adjacency[v].begin(), g.adjacency[v].end(), w)) candidates.push_back(w);
            }
            if (candidates.empty())
                throw ValidationError("graph.base_random_edges_per_node", "degree floor infeasible");
            add_edge(g, v, candidates[rng.below(candidates.size())]);
        }
    }
    return g;
}

std::array<double, 5> constant_trait_targets(const RegionIndicators& region) {
    double education = 0.0;
    for (std::size_t k = 0; k < 4; ++k) education += region.education[k] * static_cast<double>(k) / 3.0;
    return {education, region.married_fraction, 1.0,
            clamped_normal_mean(region.religiosity_mean, region.religiosity_sd),
            clamped_normal_mean(region.crime_density_mean, region.crime_density_sd)};
}

namespace {

std::array<double, 5> constant_trait_sds(const RegionIndicators& region, const std::array<double, 5>& targets) {
    double edu_second = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double level = static_cast<double>(k) / 3.0;
        edu_second += region.education[k] * level * level;
    }
    const double p = region.married_fraction;
    return {std::sqrt(std::max(0.0, edu_second - targets[0] * targets[0])), std::sqrt(p * (1.0 - p)),
            1.0 / std::sqrt(region.wealth_rate), region.religiosity_sd, region.crime_density_sd};
}

constexpr const char* kTraitNames[5] = {"education", "married", "wealth", "religious_training", "crime_exposure"};

} // namespace

Society build_society(const SimulationConfig& cfg, const RegionIndicators& region) {
    cfg.validate();
    region.validate();
    const auto n = static_cast<std::size_t>(cfg.graph.n_agents);

    Rng constant_rng = Rng::substream(cfg.seed, Stream::ConstantTraits);
    Rng variable_rng = Rng::substream(cfg.seed, Stream::VariableTraits);
    Rng graph_rng = Rng::substream(cfg.seed, Stream::Graph);

    const auto targets = constant_trait_targets(region);
    const auto sds = constant_trait_sds(region, targets);
    std::array<double, 5> tolerance{};
    for (std::size_t k = 0; k < 5; ++k)
        tolerance[k] = std::max(cfg.balance_tolerance, 3.0 * sds[k] / std::sqrt(static_cast<double>(n)));

    std::vector<ConstantTraits> constant;
    std::size_t worst = 0;
    double worst_ratio = 0.0;
    bool balanced = false;
    for (std::int64_t attempt = 0; attempt <= cfg.balance_max_retries && !balanced; ++attempt) {
        constant = sample_constant_traits(region, cfg.sampling_mode, n, constant_rng);
        std::array<double, 5> mean{};
        for (const auto& c : constant) {
            const auto values = c.as_array();
            for (std::size_t k = 0; k < 5; ++k) mean[k] += values[k];
        }
        balanced = true;
        worst_ratio = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            mean[k] /= static_cast<double>(n);
            const double ratio = std::fabs(mean[k] - targets[k]) / tolerance[k];
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                worst = k;
            }
            if (ratio > 1.0) balanced = false;
        }
    }
    if (!balanced)
        throw ValidationError(kTraitNames[worst], "empirical mean outside balance tolerance after " +
                                                      std::to_string(cfg.balance_max_retries) + " retries");

    const auto variable = init_variable_traits(n, cfg.initial, variable_rng);
    IdeologyGraph graph = build_ideology_graph(cfg.graph, graph_rng);

    std::vector<AgentState> agents(n);
    for (std::size_t i = 0; i < n; ++i) {
        agents[i].id = i;
        agents[i].tensor.constant = constant[i];
        agents[i].tensor.variable = variable[i];
        agents[i].born_tick = 0;
    }
    return Society(std::move(agents), std::move(graph));
}

FeatureTensor sample_fresh_tensor(const RegionIndicators& region, const SimulationConfig& cfg, Rng& rng) {
    FeatureTensor t;
    t.constant = sample_constant_traits(region, SamplingMode::Random, 1, rng).front();
    t.variable = init_variable_traits(1, cfg.initial, rng).front();
    return t;
}

std::uint64_t society_digest(const Society& society) {
    detail::Fnv1a h;
    h.add(society.tick());
    h.add(society.next_id());
    h.add(static_cast<std::uint64_t>(society.size()));
    for (std::size_t s = 0; s < society.size(); ++s) {
        const auto& a = society.at(s);
        h.add(a.id);
        h.add(a.born_tick);
        for (double x : a.tensor.constant.as_array()) h.add(x);
        h.add(a.tensor.variable.crimes_committed);
        h.add(a.tensor.variable.police_predisposition);
        h.add(a.tensor.variable.terror_predisposition);
        h.add(a.tensor.variable.power);
        h.add(static_cast<std::uint64_t>(society.degree(s)));
        for (std::uint32_t t : society.neighbors(s)) h.add(static_cast<std::uint64_t>(t));
    }
    return h.value();
}

} // namespace raresim
