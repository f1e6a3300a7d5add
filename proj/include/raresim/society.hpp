#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "raresim/agent.hpp"
#include "raresim/config.hpp"
#include "raresim/region.hpp"
#include "raresim/rng.hpp"

namespace raresim {

/// Undirected ideological-affinity graph over agent slots 0..n-1.
struct IdeologyGraph {
    std::vector<std::vector<std::uint32_t>> adjacency;  // sorted, no self-loops, no duplicates
    std::vector<std::uint32_t> clustered;               // slots that belong to a clique

    std::size_t edge_count() const;
};

/// Agent population plus the affinity graph. Agents live in fixed slots; a
/// replacement takes over the slot (and therefore the edges) of the agent it
/// replaces, so the graph structure is stable across ticks.
class Society {
public:
    Society() = default;
    Society(std::vector<AgentState> agents, IdeologyGraph graph);

    std::size_t size() const { return agents_.size(); }
    std::span<const AgentState> agents() const { return agents_; }
    const AgentState& at(std::size_t slot) const { return agents_[slot]; }
    const std::vector<std::uint32_t>& neighbors(std::size_t slot) const { return graph_.adjacency[slot]; }
    std::size_t degree(std::size_t slot) const { return graph_.adjacency[slot].size(); }
    const IdeologyGraph& graph() const { return graph_; }

    std::optional<std::size_t> slot_of(AgentId id) const;
    bool adjacent(AgentId a, AgentId b) const;
    /// Unordered id pairs, each listed once with the smaller id first, sorted.
    std::vector<std::pair<AgentId, AgentId>> edges() const;
    /// Slots ordered by ascending agent id.
    std::vector<std::size_t> slots_by_id() const;

    Tick tick() const { return tick_; }
    AgentId next_id() const { return next_id_; }

    // Mutation points used by the scheduler.
    VariableTraits& variable(std::size_t slot) { return agents_[slot].tensor.variable; }
    /// Puts a new agent (fresh id) into the slot and returns the removed state.
    AgentState replace(std::size_t slot, FeatureTensor tensor);
    void advance_tick() { ++tick_; }
    /// Removes every edge. Only meant for forced test fixtures.
    void clear_edges();

    /// Mean of signed predisposition over the population.
    double mean_signed_predisposition() const;

private:
    std::vector<AgentState> agents_;
    IdeologyGraph graph_;
    std::unordered_map<AgentId, std::size_t> index_;
    AgentId next_id_ = 0;
    Tick tick_ = 0;
};

std::vector<ConstantTraits> sample_constant_traits(const RegionIndicators& region, SamplingMode mode,
                                                   std::size_t n, Rng& rng);

std::vector<VariableTraits> init_variable_traits(std::size_t n, const InitialTraitsConfig& cfg, Rng& rng);

/// Cliques over a sub-10% sample of nodes, then random edges until every node
/// reaches the degree floor. Throws ValidationError for infeasible configs.
IdeologyGraph build_ideology_graph(const GraphConfig& cfg, Rng& rng);

/// Expected value of each constant trait under the region's distributions.
std::array<double, 5> constant_trait_targets(const RegionIndicators& region);

/// Builds the tick-0 society from cfg.seed. Resamples constant traits until
/// every empirical trait mean is within tolerance of its target; throws
/// ValidationError naming the worst trait when retries run out.
Society build_society(const SimulationConfig& cfg, const RegionIndicators& region);

/// One fresh agent's tensor, drawn exactly like a tick-0 agent.
FeatureTensor sample_fresh_tensor(const RegionIndicators& region, const SimulationConfig& cfg, Rng& rng);

/// FNV-1a 64 over the canonical byte layout of the society.
std::uint64_t society_digest(const Society& society);

} // namespace raresim
