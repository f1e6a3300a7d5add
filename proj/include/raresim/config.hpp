#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "raresim/agent.hpp"

namespace raresim {

inline constexpr std::string_view kConfigFormatTag = "raresim-config 1";

struct GraphConfig {
    std::int64_t n_agents = 1000;
    double cluster_fraction = 0.096;
    std::int64_t cluster_size = 10;
    std::int64_t base_random_edges_per_node = 2;

    void validate() const;
};

/// Per-contact increments applied by the interaction rules.
struct IncrementTable {
    double pred_gain_neutral = 0.05;
    double pred_gain_contact = 0.1;
    double power_gain_peer = 0.1;
    double power_loss_police = 0.3;
    double recruit_pred_jump = 0.2;

    void validate() const;
};

/// Zero-inflated shifted-Pareto death toll.
struct DeathTollConfig {
    double p0 = 0.85;
    double tail_alpha = 2.2;
    double severity_scale = 2.82;

    void validate() const;
};

/// Distribution of the variable traits at birth.
struct InitialTraitsConfig {
    double predisposition_scale = 0.51;  // half-normal scale of tau7 and tau8
    double power_min = 0.0;
    double power_max = 1.0;

    void validate() const;
};

enum class SamplingMode { Random, LatinHypercube };
enum class PairSelection { IncidentEdge, RandomEdgeSubset };

std::string_view to_string(SamplingMode mode);
std::string_view to_string(PairSelection mode);
SamplingMode parse_sampling_mode(std::string_view text);
PairSelection parse_pair_selection(std::string_view text);

struct SimulationConfig {
    GraphConfig graph;
    RoleThresholds thresholds;
    double logistic_scale_s = 0.282;
    std::array<double, 5> region_weights_w{-0.76, -0.31, -0.5, 1.07, 0.09};
    IncrementTable increments;
    DeathTollConfig death_toll;
    InitialTraitsConfig initial;
    double attack_failure_power_factor = 0.5;
    double attack_success_power_factor = 0.5;  // leader keeps this share after an executed attack
    double power_cap = 4.24;                   // tau9 saturates here
    std::int64_t n_ticks = 4000;
    std::uint64_t seed = 1;
    SamplingMode sampling_mode = SamplingMode::Random;
    PairSelection pair_selection = PairSelection::IncidentEdge;
    double edge_subset_fraction = 0.5;  // only for RandomEdgeSubset
    std::int64_t snapshot_every = 100;
    double balance_tolerance = 0.05;
    std::int64_t balance_max_retries = 10;

    void validate() const;
};

nlohmann::json to_json(const SimulationConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SimulationConfig config_from_json(const nlohmann::json& j);
SimulationConfig load_config(const std::filesystem::path& path);
std::string format_config(const SimulationConfig& cfg);

/// A parameter that may be changed while a run is live.
struct TunableParam {
    std::string_view key;
    double min;
    double max;
    bool min_inclusive;
    bool max_inclusive;
};

const std::vector<TunableParam>& tunable_params();
const TunableParam* find_tunable(std::string_view key);

/// Throws ValidationError when the key is not whitelisted or the value is out
/// of the declared range.
void set_tunable(SimulationConfig& cfg, std::string_view key, double value);
double get_tunable(const SimulationConfig& cfg, std::string_view key);
std::string describe_range(const TunableParam& param);

} // namespace raresim
