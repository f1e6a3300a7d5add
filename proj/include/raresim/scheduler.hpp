#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "raresim/config.hpp"
#include "raresim/interaction.hpp"
#include "raresim/region.hpp"
#include "raresim/society.hpp"

namespace raresim {

inline constexpr std::string_view kLogSchema = "raresim-log";
inline constexpr int kLogVersion = 1;

struct MomentPair {
    double mean = 0.0;
    double variance = 0.0;  // population variance over agents

    friend bool operator==(const MomentPair&, const MomentPair&) = default;
};

struct AggregateStats {
    MomentPair police_predisposition;
    MomentPair terror_predisposition;
    MomentPair power;
    std::array<std::int64_t, 5> role_counts{};  // indexed by Role
    std::int64_t population = 0;

    friend bool operator==(const AggregateStats&, const AggregateStats&) = default;
};

AggregateStats aggregate(const Society& society, const RoleThresholds& thresholds);

struct Replacement {
    AgentId removed = 0;
    AgentId added = 0;

    friend bool operator==(const Replacement&, const Replacement&) = default;
};

/// Everything one tick produced.
struct TickReport {
    Tick tick = 0;
    std::vector<InteractionOutcome> outcomes;
    std::vector<AttackEvent> attacks;
    std::int64_t arrests = 0;
    std::int64_t recruitments = 0;
    std::array<std::int64_t, kOutcomeKindCount> kind_counts{};
    std::vector<Replacement> replacements;
};

/// Compact per-tick record kept in the log. Individual outcomes are summarized
/// as counts; attacks and replacements are kept in full.
struct TickRecord {
    Tick tick = 0;
    std::array<std::int64_t, kOutcomeKindCount> kind_counts{};
    std::int64_t arrests = 0;
    std::int64_t recruitments = 0;
    std::vector<AttackEvent> attacks;
    std::vector<Replacement> replacements;
    AggregateStats stats;

    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

struct SnapshotAgent {
    AgentId id = 0;
    FeatureTensor tensor;
    Role role = Role::Civilian;
};

struct Snapshot {
    Tick tick = 0;
    std::vector<SnapshotAgent> agents;
    AggregateStats stats;
};

/// A steering change. It takes effect before tick applied_at + 1 executes.
struct ParamChange {
    Tick applied_at = 0;
    std::string key;
    double old_value = 0.0;
    double value = 0.0;

    friend bool operator==(const ParamChange&, const ParamChange&) = default;
};

struct SimulationLog {
    SimulationConfig config;
    RegionIndicators region;
    std::vector<TickRecord> ticks;
    std::vector<Snapshot> snapshots;
    std::vector<ParamChange> param_changes;
    Tick final_tick = 0;
    std::uint64_t final_digest = 0;
    bool aborted = false;
    std::string abort_reason;

    /// Death tolls of every executed attack, in event order.
    std::vector<double> death_tolls() const;
    const Snapshot* snapshot_at(Tick tick) const;
};

class SinkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Receives the event stream of a run. Implementations throw SinkError on a
/// failed write; the run then aborts and the log is flagged.
class LogSink {
public:
    virtual ~LogSink() = default;
    virtual void begin(const SimulationConfig&, const RegionIndicators&) {}
    virtual void tick(const TickRecord&) {}
    virtual void snapshot(const Snapshot&) {}
    virtual void param_change(const ParamChange&) {}
    virtual void end(Tick /*final_tick*/, std::uint64_t /*digest*/, bool /*aborted*/) {}
};

/// Line-delimited JSON event log.
class FileLogSink final : public LogSink {
public:
    explicit FileLogSink(const std::filesystem::path& path);

    void begin(const SimulationConfig& cfg, const RegionIndicators& region) override;
    void tick(const TickRecord& record) override;
    void snapshot(const Snapshot& snap) override;
    void param_change(const ParamChange& change) override;
    void end(Tick final_tick, std::uint64_t digest, bool aborted) override;

private:
    void write(const nlohmann::json& record);

    std::filesystem::path path_;
    std::ofstream out_;
};

// Log record encoding, shared by the file sink, the reader and the steering server.
nlohmann::json encode_header(const SimulationConfig& cfg, const RegionIndicators& region);
nlohmann::json encode_tick(const TickRecord& record);
nlohmann::json encode_snapshot(const Snapshot& snap);
nlohmann::json encode_param_change(const ParamChange& change);
nlohmann::json encode_attack(const AttackEvent& attack);
nlohmann::json encode_stats(const AggregateStats& stats);
AggregateStats decode_stats(const nlohmann::json& j);

SimulationLog read_log(const std::filesystem::path& path);
SimulationLog parse_log(std::string_view text);

/// One live simulation: society, encounter memory and RNG substreams.
class Simulation {
public:
    Simulation(SimulationConfig cfg, RegionIndicators region);

    const Society& society() const { return society_; }
    const SimulationConfig& config() const { return cfg_; }
    const RegionIndicators& region() const { return region_; }
    const EncounterMemory& memory() const { return memory_; }
    Tick tick() const { return society_.tick(); }

    TickReport step();
    Snapshot snapshot() const;

    /// Validates against the tunable whitelist, applies, and returns the
    /// change stamped with the current tick.
    ParamChange set_param(std::string_view key, double value);
    /// Every change applied so far, in order.
    const std::vector<ParamChange>& param_changes() const { return changes_; }

    /// Digest over the society and encounter memory.
    std::uint64_t digest() const;

    /// Test hook: drops every edge of the society.
    void clear_edges_for_testing() { society_.clear_edges(); }

private:
    SimulationConfig cfg_;
    RegionIndicators region_;
    Society society_;
    EncounterMemory memory_;
    std::vector<ParamChange> changes_;
    Rng pair_rng_;
    Rng outcome_rng_;
    Rng replacement_rng_;
};

/// Applies one tick to the society. Every interaction reads the tick-start
/// state; deltas are summed per agent and field, then removals are applied in
/// outcome order (first one wins).
TickReport step(Society& society, const SimulationConfig& cfg, EncounterMemory& memory, const RegionIndicators& region,
                Rng& pair_rng, Rng& outcome_rng, Rng& replacement_rng);

TickRecord to_record(const TickReport& report, const AggregateStats& stats);

/// Hook into the run loop. at_boundary runs before every tick; returning false
/// stops the run early. Parameter changes made through sim.set_param are
/// forwarded to the sinks by the run loop.
class RunControl {
public:
    virtual ~RunControl() = default;
    virtual bool at_boundary(Simulation& sim) = 0;
    virtual void after_tick(const Simulation& /*sim*/, const TickReport& /*report*/) {}
    virtual void finished(const Simulation& /*sim*/) {}
};

struct RunOptions {
    std::vector<LogSink*> sinks;
    RunControl* control = nullptr;
    /// Param changes to apply at given ticks (replay of a steered run).
    std::vector<ParamChange> scheduled_changes;
    /// Keep per-agent snapshots in the returned log (they always go to sinks).
    bool keep_snapshots = true;
};

/// True when a full snapshot is due at this tick.
bool snapshot_due(Tick tick, Tick final_tick, std::int64_t every);

SimulationLog run(const SimulationConfig& cfg, const RegionIndicators& region, const RunOptions& options = {});

/// Re-executes a logged run, including its parameter changes, and returns the
/// final digest.
std::uint64_t replay(const SimulationLog& log);

} // namespace raresim
