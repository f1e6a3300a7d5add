#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "raresim/config.hpp"
#include "raresim/region.hpp"
#include "raresim/scheduler.hpp"
#include "raresim/statistics.hpp"

namespace raresim {

/// Returns a copy of `cfg` with the numeric field at a dotted key replaced,
/// e.g. "death_toll.severity_scale" or "region_weights_w.3". Throws
/// ValidationError for unknown keys or values the config rejects.
SimulationConfig with_override(const SimulationConfig& cfg, const std::string& key, double value);

struct SweepDimension {
    std::string key;
    double lo = 0.0;
    double hi = 1.0;
};

/// {"samples": 16, "params": {"thresholds.terror_pred_threshold": [0.5, 1.5], ...}}
struct SweepSpec {
    std::size_t samples = 1;
    std::vector<SweepDimension> dims;
};

SweepSpec parse_sweep_spec(const nlohmann::json& j);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

/// samples x dims matrix of parameter values, drawn from the Sweep substream
/// of `seed`. Under LatinHypercube each dimension has one value per stratum.
std::vector<std::vector<double>> sweep_design(const SweepSpec& spec, SamplingMode mode, std::uint64_t seed);

struct SweepPoint {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;
    std::size_t attacks = 0;
    std::optional<double> kl;  // KL(synthetic || recorded); absent without attacks
    std::uint64_t digest = 0;
};

/// Runs every design point on `jobs` worker threads. Point i uses seed
/// `seed + i`. When `log_dir` is set, point i writes log_dir/point-<i>.ndjson.
std::vector<SweepPoint> run_sweep(const SimulationConfig& base, const RegionIndicators& region, const SweepSpec& spec,
                                  const std::vector<std::vector<double>>& design, const SampleProfile& recorded,
                                  std::uint64_t seed, unsigned jobs,
                                  const std::optional<std::filesystem::path>& log_dir = std::nullopt);

/// Sorted ascending by KL; points without attacks go last.
std::vector<SweepPoint> rank_by_kl(std::vector<SweepPoint> points);

/// Aggregate view of a run at one tick, mirroring one panel of a progression plot.
struct CheckpointReport {
    Tick tick = 0;
    Histogram histogram;
    double polarization = 0.0;
    AggregateStats stats;
    std::size_t attacks = 0;  // executed attacks up to this tick
    std::optional<SummaryStats> deaths;
};

nlohmann::json to_json(const CheckpointReport& r);

/// Entry point of the raresim executable. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace raresim
