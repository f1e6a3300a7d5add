#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "raresim/agent.hpp"
#include "raresim/config.hpp"
#include "raresim/region.hpp"
#include "raresim/rng.hpp"
#include "raresim/society.hpp"

namespace raresim {

enum class TraitField : std::uint8_t { CrimesCommitted, PolicePredisposition, TerrorPredisposition, Power };

struct TraitDelta {
    AgentId agent = 0;
    TraitField field = TraitField::Power;
    double amount = 0.0;

    friend bool operator==(const TraitDelta&, const TraitDelta&) = default;
};

enum class OutcomeKind : std::uint8_t {
    NoAction,
    PredispositionShift,
    PowerShift,
    Recruitment,
    Arrest,
    AttackPlanned,  // reserved; the default rules resolve planning and execution in one step
    AttackExecuted,
    AttackFailed,
};
inline constexpr std::size_t kOutcomeKindCount = 8;

std::string_view to_string(OutcomeKind kind);
std::string_view to_string(TraitField field);

struct AttackEvent {
    Tick tick = 0;
    AgentId leader_id = 0;
    AgentId financier_id = 0;
    std::vector<AgentId> cell_ids;  // >= 3, ascending
    double combined_power = 0.0;
    std::int64_t deaths = 0;

    friend bool operator==(const AttackEvent&, const AttackEvent&) = default;
};

/// Result of one collision. Nothing here has been applied yet; the scheduler
/// applies deltas, removals and the encounter bump at the end of the tick.
struct InteractionOutcome {
    OutcomeKind kind = OutcomeKind::NoAction;
    AgentId initiator = 0;
    AgentId partner = 0;
    std::vector<TraitDelta> affected;
    std::vector<AgentId> removed;                           // each replaced by a fresh agent
    std::optional<std::pair<AgentId, AgentId>> encounter;  // police/terrorist pair to bump
    std::optional<AttackEvent> attack;

    friend bool operator==(const InteractionOutcome&, const InteractionOutcome&) = default;
};

/// Prior police/terrorist encounters per unordered pair.
class EncounterMemory {
public:
    std::uint32_t count(AgentId a, AgentId b) const;
    void increment(AgentId a, AgentId b);
    /// Drops every entry that involves the agent.
    void prune(AgentId id);
    std::size_t size() const { return counts_.size(); }
    const std::map<std::pair<AgentId, AgentId>, std::uint32_t>& entries() const { return counts_; }

private:
    static std::pair<AgentId, AgentId> key(AgentId a, AgentId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }
    std::map<std::pair<AgentId, AgentId>, std::uint32_t> counts_;
};

/// Logistic CDF 1 / (1 + exp(-(x - mu) / s)). Throws ValidationError for s <= 0.
double logistic_cdf(double x, double mu, double s);

/// Probability that an interaction succeeds for an agent whose constant traits
/// are weighted by the region weights: logistic_cdf(w . tau[1..5], mu, s).
double interaction_success_probability(std::span<const double, 5> weights, const FeatureTensor& tensor, double mu,
                                       double s);

/// Read-only view of the society at the start of a tick. All interactions of
/// one tick resolve against the same view.
struct TickContext {
    const Society* society = nullptr;
    const SimulationConfig* cfg = nullptr;
    std::vector<Role> roles;        // by slot
    double environment_mean = 0.0;  // mean signed predisposition
    Tick tick = 0;                  // tick being executed (society tick + 1)

    Role role(std::size_t slot) const { return roles[slot]; }
};

TickContext make_tick_context(const Society& society, const SimulationConfig& cfg);

/// Temporary power value for an agent whose gain in the current interaction
/// must be visible to the attack gate.
struct PowerOverride {
    std::size_t slot = 0;
    double power = 0.0;
};

/// Attack planning for a leader. Returns nothing when the gate fails; otherwise
/// an AttackExecuted or AttackFailed outcome carrying its deltas.
std::optional<InteractionOutcome> attempt_attack(const TickContext& ctx, std::size_t leader_slot, Rng& rng,
                                                 std::span<const PowerOverride> overrides = {});

/// Zero-inflated shifted-Pareto toll.
std::int64_t sample_death_toll(double combined_power, const DeathTollConfig& cfg, Rng& rng);

/// One collision between the agents in slots a (initiator) and b.
InteractionOutcome resolve_interaction(const TickContext& ctx, std::size_t a, std::size_t b,
                                       const EncounterMemory& memory, Rng& rng);

/// Id-based entry point. Throws ContractViolation when a and b are not adjacent.
InteractionOutcome resolve_interaction(AgentId a, AgentId b, const Society& society, const SimulationConfig& cfg,
                                       const EncounterMemory& memory, Rng& rng);

/// Replaces the agent with a fresh one drawn like a tick-0 agent. The newcomer
/// keeps the slot, hence the edges. Throws ContractViolation for unknown ids.
AgentId remove_and_replace(Society& society, AgentId id, const RegionIndicators& region,
                           const SimulationConfig& cfg, EncounterMemory& memory, Rng& rng);

} // namespace raresim
