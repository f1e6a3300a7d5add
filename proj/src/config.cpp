#include "raresim/config.hpp"

#include <cmath>
#include <set>

#include "raresim/error.hpp"
#include "text_util.hpp"

namespace raresim {

using nlohmann::json;

namespace {

void require(bool ok, const char* field, const char* constraint) {
    if (!ok) throw ValidationError(field, constraint);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace

void GraphConfig::validate() const {
    require(n_agents >= 4, "graph.n_agents", "must be >= 4");
    require(std::isfinite(cluster_fraction) && cluster_fraction >= 0.0 && cluster_fraction < 0.10,
            "graph.cluster_fraction", "must be in [0, 0.10)");
    require(cluster_size >= 3, "graph.cluster_size", "must be >= 3");
    require(base_random_edges_per_node >= 2, "graph.base_random_edges_per_node", "must be >= 2");
    require(base_random_edges_per_node <= n_agents - 1, "graph.base_random_edges_per_node",
            "must be <= n_agents - 1 (degree floor infeasible)");
}

void IncrementTable::validate() const {
    require(finite_positive(pred_gain_neutral), "increments.pred_gain_neutral", "must be finite and > 0");
    require(finite_positive(pred_gain_contact), "increments.pred_gain_contact", "must be finite and > 0");
    require(finite_positive(power_gain_peer), "increments.power_gain_peer", "must be finite and > 0");
    require(finite_positive(power_loss_police), "increments.power_loss_police", "must be finite and > 0");
    require(finite_positive(recruit_pred_jump), "increments.recruit_pred_jump", "must be finite and > 0");
}

void DeathTollConfig::validate() const {
    require(std::isfinite(p0) && p0 >= 0.0 && p0 <= 1.0, "death_toll.p0", "must be in [0, 1]");
    require(std::isfinite(tail_alpha) && tail_alpha > 1.0, "death_toll.tail_alpha", "must be finite and > 1");
    require(finite_positive(severity_scale), "death_toll.severity_scale", "must be finite and > 0");
}

void InitialTraitsConfig::validate() const {
    require(std::isfinite(predisposition_scale) && predisposition_scale >= 0.0, "initial.predisposition_scale",
            "must be finite and >= 0");
    require(std::isfinite(power_min) && power_min >= 0.0, "initial.power_min", "must be finite and >= 0");
    require(std::isfinite(power_max) && power_max >= power_min, "initial.power_max", "must be >= power_min");
}

void SimulationConfig::validate() const {
    graph.validate();
    thresholds.validate();
    require(finite_positive(logistic_scale_s), "logistic_scale_s", "must be finite and > 0");
    for (double w : region_weights_w) require(std::isfinite(w), "region_weights_w", "must be finite");
    increments.validate();
    death_toll.validate();
    initial.validate();
    require(std::isfinite(attack_failure_power_factor) && attack_failure_power_factor >= 0.0 &&
                attack_failure_power_factor <= 1.0,
            "attack_failure_power_factor", "must be in [0, 1]");
    require(std::isfinite(attack_success_power_factor) && attack_success_power_factor >= 0.0 &&
                attack_success_power_factor <= 1.0,
            "attack_success_power_factor", "must be in [0, 1]");
    require(finite_positive(power_cap), "power_cap", "must be finite and > 0");
    require(n_ticks >= 0, "n_ticks", "must be >= 0");
    require(snapshot_every >= 1, "snapshot_every", "must be >= 1");
    require(std::isfinite(edge_subset_fraction) && edge_subset_fraction > 0.0 && edge_subset_fraction <= 1.0,
            "edge_subset_fraction", "must be in (0, 1]");
    require(finite_positive(balance_tolerance), "balance_tolerance", "must be finite and > 0");
    require(balance_max_retries >= 0, "balance_max_retries", "must be >= 0");
}

std::string_view to_string(SamplingMode mode) {
    return mode == SamplingMode::Random ? "random" : "lhs";
}

std::string_view to_string(PairSelection mode) {
    return mode == PairSelection::IncidentEdge ? "incident_edge" : "random_edge_subset";
}

SamplingMode parse_sampling_mode(std::string_view text) {
    if (text == "random") return SamplingMode::Random;
    if (text == "lhs" || text == "latin_hypercube") return SamplingMode::LatinHypercube;
    throw ValidationError("sampling_mode", "expected 'random' or 'lhs'");
}

PairSelection parse_pair_selection(std::string_view text) {
    if (text == "incident_edge") return PairSelection::IncidentEdge;
    if (text == "random_edge_subset") return PairSelection::RandomEdgeSubset;
    throw ValidationError("pair_selection", "expected 'incident_edge' or 'random_edge_subset'");
}

json to_json(const SimulationConfig& c) {
    json j;
    j["format"] = kConfigFormatTag;
    j["graph"] = {{"n_agents", c.graph.n_agents},
                  {"cluster_fraction", c.graph.cluster_fraction},
                  {"cluster_size", c.graph.cluster_size},
                  {"base_random_edges_per_node", c.graph.base_random_edges_per_node}};
    j["thresholds"] = {{"police_pred_threshold", c.thresholds.police_pred_threshold},
                       {"terror_pred_threshold", c.thresholds.terror_pred_threshold},
                       {"leader_education_min", c.thresholds.leader_education_min},
                       {"financier_wealth_min", c.thresholds.financier_wealth_min},
                       {"leader_power_attack_threshold", c.thresholds.leader_power_attack_threshold},
                       {"financier_power_min", c.thresholds.financier_power_min},
                       {"power_removal_floor", c.thresholds.power_removal_floor}};
    j["logistic_scale_s"] = c.logistic_scale_s;
    j["region_weights_w"] = c.region_weights_w;
    j["increments"] = {{"pred_gain_neutral", c.increments.pred_gain_neutral},
                       {"pred_gain_contact", c.increments.pred_gain_contact},
                       {"power_gain_peer", c.increments.power_gain_peer},
                       {"power_loss_police", c.increments.power_loss_police},
                       {"recruit_pred_jump", c.increments.recruit_pred_jump}};
    j["death_toll"] = {{"p0", c.death_toll.p0},
                       {"tail_alpha", c.death_toll.tail_alpha},
                       {"severity_scale", c.death_toll.severity_scale}};
    j["initial"] = {{"predisposition_scale", c.initial.predisposition_scale},
                    {"power_min", c.initial.power_min},
                    {"power_max", c.initial.power_max}};
    j["attack_failure_power_factor"] = c.attack_failure_power_factor;
    j["attack_success_power_factor"] = c.attack_success_power_factor;
    j["power_cap"] = c.power_cap;
    j["n_ticks"] = c.n_ticks;
    j["seed"] = c.seed;
    j["sampling_mode"] = to_string(c.sampling_mode);
    j["pair_selection"] = to_string(c.pair_selection);
    j["edge_subset_fraction"] = c.edge_subset_fraction;
    j["snapshot_every"] = c.snapshot_every;
    j["balance_tolerance"] = c.balance_tolerance;
    j["balance_max_retries"] = c.balance_max_retries;
    return j;
}

namespace {

class Reader {
public:
    Reader(const json& object, std::string prefix) : object_(object), prefix_(std::move(prefix)) {
        if (!object_.is_object()) throw ValidationError(prefix_.empty() ? "config" : prefix_, "must be an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = object_.find(key);
        if (it == object_.end()) return;
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ValidationError(path(key), "must be a number");
                out = it->template get<double>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw ValidationError(path(key), "must be an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (it->is_number_unsigned()) out = it->template get<T>();
                    else if (it->template get<std::int64_t>() < 0)
                        throw ValidationError(path(key), "must be >= 0");
                    else out = static_cast<T>(it->template get<std::int64_t>());
                } else {
                    out = it->template get<T>();
                }
            } else {
                out = it->template get<T>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(path(key), e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = object_.begin(); it != object_.end(); ++it)
            if (!seen_.count(it.key())) throw ValidationError(path(it.key().c_str()), "unknown key");
    }

    std::string path(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    const json& object_;
    std::string prefix_;
    std::set<std::string> seen_;
};

} // namespace

SimulationConfig config_from_json(const json& j) {
    SimulationConfig c;
    Reader top(j, "");

    if (const json* format = top.child("format")) {
        if (!format->is_string() || format->get<std::string>() != kConfigFormatTag)
            throw ValidationError("format", "expected '" + std::string(kConfigFormatTag) + "'");
    }
    if (const json* g = top.child("graph")) {
        Reader r(*g, "graph");
        r.read("n_agents", c.graph.n_agents);
        r.read("cluster_fraction", c.graph.cluster_fraction);
        r.read("cluster_size", c.graph.cluster_size);
        r.read("base_random_edges_per_node", c.graph.base_random_edges_per_node);
        r.finish();
    }
    if (const json* t = top.child("thresholds")) {
        Reader r(*t, "thresholds");
        r.read("police_pred_threshold", c.thresholds.police_pred_threshold);
        r.read("terror_pred_threshold", c.thresholds.terror_pred_threshold);
        r.read("leader_education_min", c.thresholds.leader_education_min);
        r.read("financier_wealth_min", c.thresholds.financier_wealth_min);
        r.read("leader_power_attack_threshold", c.thresholds.leader_power_attack_threshold);
        r.read("financier_power_min", c.thresholds.financier_power_min);
        r.read("power_removal_floor", c.thresholds.power_removal_floor);
        r.finish();
    }
    top.read("logistic_scale_s", c.logistic_scale_s);
    if (const json* w = top.child("region_weights_w")) {
        if (!w->is_array() || w->size() != 5) throw ValidationError("region_weights_w", "must be an array of 5 numbers");
        for (std::size_t k = 0; k < 5; ++k) {
            if (!(*w)[k].is_number()) throw ValidationError("region_weights_w", "must be an array of 5 numbers");
            c.region_weights_w[k] = (*w)[k].get<double>();
        }
    }
    if (const json* inc = top.child("increments")) {
        Reader r(*inc, "increments");
        r.read("pred_gain_neutral", c.increments.pred_gain_neutral);
        r.read("pred_gain_contact", c.increments.pred_gain_contact);
        r.read("power_gain_peer", c.increments.power_gain_peer);
        r.read("power_loss_police", c.increments.power_loss_police);
        r.read("recruit_pred_jump", c.increments.recruit_pred_jump);
        r.finish();
    }
    if (const json* d = top.child("death_toll")) {
        Reader r(*d, "death_toll");
        r.read("p0", c.death_toll.p0);
        r.read("tail_alpha", c.death_toll.tail_alpha);
        r.read("severity_scale", c.death_toll.severity_scale);
        r.finish();
    }
    if (const json* i = top.child("initial")) {
        Reader r(*i, "initial");
        r.read("predisposition_scale", c.initial.predisposition_scale);
        r.read("power_min", c.initial.power_min);
        r.read("power_max", c.initial.power_max);
        r.finish();
    }
    top.read("attack_failure_power_factor", c.attack_failure_power_factor);
    top.read("attack_success_power_factor", c.attack_success_power_factor);
    top.read("power_cap", c.power_cap);
    top.read("n_ticks", c.n_ticks);
    top.read("seed", c.seed);
    std::string sampling(to_string(c.sampling_mode));
    top.read("sampling_mode", sampling);
    c.sampling_mode = parse_sampling_mode(sampling);
    std::string pairs(to_string(c.pair_selection));
    top.read("pair_selection", pairs);
    c.pair_selection = parse_pair_selection(pairs);
    top.read("edge_subset_fraction", c.edge_subset_fraction);
    top.read("snapshot_every", c.snapshot_every);
    top.read("balance_tolerance", c.balance_tolerance);
    top.read("balance_max_retries", c.balance_max_retries);
    top.finish();

    c.validate();
    return c;
}

SimulationConfig load_config(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::string format_config(const SimulationConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

const std::vector<TunableParam>& tunable_params() {
    constexpr double big = 1e6;
    static const std::vector<TunableParam> params = {
        {"thresholds.police_pred_threshold", 0.0, big, false, true},
        {"thresholds.terror_pred_threshold", 0.0, big, false, true},
        {"thresholds.leader_education_min", 0.0, 1.0, false, true},
        {"thresholds.financier_wealth_min", 0.0, big, false, true},
        {"thresholds.leader_power_attack_threshold", 0.0, big, false, true},
        {"thresholds.financier_power_min", 0.0, big, false, true},
        {"thresholds.power_removal_floor", 0.0, big, true, true},
        {"increments.pred_gain_neutral", 0.0, big, false, true},
        {"increments.pred_gain_contact", 0.0, big, false, true},
        {"increments.power_gain_peer", 0.0, big, false, true},
        {"increments.power_loss_police", 0.0, big, false, true},
        {"increments.recruit_pred_jump", 0.0, big, false, true},
        {"logistic_scale_s", 0.0, big, false, true},
        {"death_toll.p0", 0.0, 1.0, true, true},
        {"death_toll.tail_alpha", 1.0, big, false, true},
    };
    return params;
}

const TunableParam* find_tunable(std::string_view key) {
    for (const auto& p : tunable_params())
        if (p.key == key) return &p;
    return nullptr;
}

std::string describe_range(const TunableParam& p) {
    return std::string(p.min_inclusive ? "[" : "(") + detail::format_double(p.min) + ", " +
           detail::format_double(p.max) + (p.max_inclusive ? "]" : ")");
}

namespace {

double* tunable_slot(SimulationConfig& c, std::string_view key) {
    if (key == "thresholds.police_pred_threshold") return &c.thresholds.police_pred_threshold;
    if (key == "thresholds.terror_pred_threshold") return &c.thresholds.terror_pred_threshold;
    if (key == "thresholds.leader_education_min") return &c.thresholds.leader_education_min;
    if (key == "thresholds.financier_wealth_min") return &c.thresholds.financier_wealth_min;
    if (key == "thresholds.leader_power_attack_threshold") return &c.thresholds.leader_power_attack_threshold;
    if (key == "thresholds.financier_power_min") return &c.thresholds.financier_power_min;
    if (key == "thresholds.power_removal_floor") return &c.thresholds.power_removal_floor;
    if (key == "increments.pred_gain_neutral") return &c.increments.pred_gain_neutral;
    if (key == "increments.pred_gain_contact") return &c.increments.pred_gain_contact;
    if (key == "increments.power_gain_peer") return &c.increments.power_gain_peer;
    if (key == "increments.power_loss_police") return &c.increments.power_loss_police;
    if (key == "increments.recruit_pred_jump") return &c.increments.recruit_pred_jump;
    if (key == "logistic_scale_s") return &c.logistic_scale_s;
    if (key == "death_toll.p0") return &c.death_toll.p0;
    if (key == "death_toll.tail_alpha") return &c.death_toll.tail_alpha;
    return nullptr;
}

} // namespace

void set_tunable(SimulationConfig& cfg, std::string_view key, double value) {
    const TunableParam* param = find_tunable(key);
    if (!param) throw ValidationError(std::string(key), "not a tunable parameter");
    const bool above = param->min_inclusive ? value >= param->min : value > param->min;
    const bool below = param->max_inclusive ? value <= param->max : value < param->max;
    if (!std::isfinite(value) || !above || !below)
        throw ValidationError(std::string(key), "value " + detail::format_double(value) + " outside range " +
                                                    describe_range(*param));
    *tunable_slot(cfg, key) = value;
}

double get_tunable(const SimulationConfig& cfg, std::string_view key) {
    if (!find_tunable(key)) throw ValidationError(std::string(key), "not a tunable parameter");
    return *tunable_slot(const_cast<SimulationConfig&>(cfg), key);
}

} // namespace raresim
