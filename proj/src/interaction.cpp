#include "raresim/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "raresim/error.hpp"

namespace raresim {

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::NoAction: return "no_action";
        case OutcomeKind::PredispositionShift: return "predisposition_shift";
        case OutcomeKind::PowerShift: return "power_shift";
        case OutcomeKind::Recruitment: return "recruitment";
        case OutcomeKind::Arrest: return "arrest";
        case OutcomeKind::AttackPlanned: return "attack_planned";
        case OutcomeKind::AttackExecuted: return "attack_executed";
        case OutcomeKind::AttackFailed: return "attack_failed";
    }
    return "unknown";
}

std::string_view to_string(TraitField field) {
    switch (field) {
        case TraitField::CrimesCommitted: return "crimes_committed";
        case TraitField::PolicePredisposition: return "police_predisposition";
        case TraitField::TerrorPredisposition: return "terror_predisposition";
        case TraitField::Power: return "power";
    }
    return "unknown";
}

std::uint32_t EncounterMemory::count(AgentId a, AgentId b) const {
    auto it = counts_.find(key(a, b));
    return it == counts_.end() ? 0 : it->second;
}

void EncounterMemory::increment(AgentId a, AgentId b) { ++counts_[key(a, b)]; }

void EncounterMemory::prune(AgentId id) {
    std::erase_if(counts_, [id](const auto& entry) { return entry.first.first == id || entry.first.second == id; });
}

double logistic_cdf(double x, double mu, double s) {
    if (!(s > 0.0)) throw ValidationError("logistic_scale_s", "must be > 0");
    return 1.0 / (1.0 + std::exp(-(x - mu) / s));
}

double interaction_success_probability(std::span<const double, 5> weights, const FeatureTensor& tensor, double mu,
                                       double s) {
    const auto traits = tensor.constant.as_array();
    double weighted = 0.0;
    for (std::size_t k = 0; k < 5; ++k) weighted += weights[k] * traits[k];
    return logistic_cdf(weighted, mu, s);
}

TickContext make_tick_context(const Society& society, const SimulationConfig& cfg) {
    TickContext ctx;
    ctx.society = &society;
    ctx.cfg = &cfg;
    ctx.roles.resize(society.size());
    for (std::size_t s = 0; s < society.size(); ++s) ctx.roles[s] = classify_role(society.at(s), cfg.thresholds);
    ctx.environment_mean = society.mean_signed_predisposition();
    ctx.tick = society.tick() + 1;
    return ctx;
}

std::int64_t sample_death_toll(double combined_power, const DeathTollConfig& cfg, Rng& rng) {
    if (rng.uniform() < cfg.p0) return 0;
    const double u = rng.uniform_open();
    if (!(combined_power > 0.0)) return 0;
    const double severity = cfg.severity_scale * combined_power * (std::pow(u, -1.0 / cfg.tail_alpha) - 1.0);
    constexpr double cap = static_cast<double>(std::numeric_limits<std::int64_t>::max() / 2);
    if (!(severity < cap)) return static_cast<std::int64_t>(cap);
    return static_cast<std::int64_t>(std::floor(severity));
}

namespace {

double power_of(const TickContext& ctx, std::size_t slot, std::span<const PowerOverride> overrides) {
    for (const auto& o : overrides)
        if (o.slot == slot) return o.power;
    return ctx.society->at(slot).tensor.variable.power;
}

AgentId id_of(const TickContext& ctx, std::size_t slot) { return ctx.society->at(slot).id; }

/// Highest power wins; ties go to the lowest id.
bool stronger(const TickContext& ctx, std::span<const PowerOverride> overrides, std::size_t x, std::size_t y) {
    const double px = power_of(ctx, x, overrides);
    const double py = power_of(ctx, y, overrides);
    if (px != py) return px > py;
    return id_of(ctx, x) < id_of(ctx, y);
}

bool is_neutral(const AgentState& agent, const RoleThresholds& t) {
    return agent.tensor.variable.police_predisposition < t.police_pred_threshold &&
           agent.tensor.variable.terror_predisposition < t.terror_pred_threshold;
}

/// Predisposition pull on `target`, gated by the target's success probability.
InteractionOutcome contact_shift(const TickContext& ctx, std::size_t target, TraitField field, double amount,
                                 Rng& rng) {
    const auto& cfg = *ctx.cfg;
    const auto& agent = ctx.society->at(target);
    InteractionOutcome out;
    const double p =
        interaction_success_probability(cfg.region_weights_w, agent.tensor, ctx.environment_mean, cfg.logistic_scale_s);
    if (!(rng.uniform() < p)) return out;

    out.kind = OutcomeKind::PredispositionShift;
    out.affected.push_back({agent.id, field, amount});
    if (field == TraitField::TerrorPredisposition) {
        const double before = agent.tensor.variable.terror_predisposition;
        const double threshold = cfg.thresholds.terror_pred_threshold;
        if (before < threshold && before + amount >= threshold) {
            out.kind = OutcomeKind::Recruitment;
            out.affected.push_back({agent.id, TraitField::TerrorPredisposition, cfg.increments.recruit_pred_jump});
        }
    }
    return out;
}

/// Terrorist-role agent meets police: power loss, removal below the floor.
InteractionOutcome police_pressure(const TickContext& ctx, std::size_t slot) {
    const auto& cfg = *ctx.cfg;
    const auto& agent = ctx.society->at(slot);
    InteractionOutcome out;
    out.kind = OutcomeKind::PowerShift;
    const double power = agent.tensor.variable.power;
    const double loss = std::min(cfg.increments.power_loss_police, power);
    if (loss > 0.0) out.affected.push_back({agent.id, TraitField::Power, -loss});
    if (power - cfg.increments.power_loss_police < cfg.thresholds.power_removal_floor) out.removed.push_back(agent.id);
    return out;
}

void merge_into(InteractionOutcome& base, InteractionOutcome&& extra) {
    base.kind = extra.kind;
    for (auto& d : extra.affected) base.affected.push_back(d);
    for (AgentId r : extra.removed) base.removed.push_back(r);
    if (extra.attack) base.attack = std::move(extra.attack);
}

} // namespace

std::optional<InteractionOutcome> attempt_attack(const TickContext& ctx, std::size_t leader_slot, Rng& rng,
                                                 std::span<const PowerOverride> overrides) {
    const auto& cfg = *ctx.cfg;
    const Society& society = *ctx.society;
    if (ctx.role(leader_slot) != Role::Leader) return std::nullopt;

    const double leader_power = power_of(ctx, leader_slot, overrides);
    if (leader_power < cfg.thresholds.leader_power_attack_threshold) return std::nullopt;

    std::vector<std::size_t> terror_nbrs;
    for (std::uint32_t n : society.neighbors(leader_slot))
        if (is_terrorist(ctx.role(n))) terror_nbrs.push_back(n);
    if (terror_nbrs.size() < 3) return std::nullopt;

    // Financier anywhere in the leader's terrorist neighbourhood: adjacent to
    // the leader or to one of its terrorist neighbours.
    std::optional<std::size_t> financier;
    auto consider = [&](std::size_t slot) {
        if (slot == leader_slot || ctx.role(slot) != Role::Financier) return;
        if (power_of(ctx, slot, overrides) < cfg.thresholds.financier_power_min) return;
        if (!financier || stronger(ctx, overrides, slot, *financier)) financier = slot;
    };
    for (std::size_t n : terror_nbrs) consider(n);
    for (std::size_t n : terror_nbrs)
        for (std::uint32_t nn : society.neighbors(n)) consider(nn);
    if (!financier) return std::nullopt;

    // The cell is every terrorist neighbour except the financier.
    std::vector<std::size_t> cell;
    for (std::size_t n : terror_nbrs)
        if (n != *financier) cell.push_back(n);
    if (cell.size() < 3) return std::nullopt;

    double combined = leader_power + power_of(ctx, *financier, overrides);
    for (std::size_t member : cell) combined += power_of(ctx, member, overrides);

    const double p = logistic_cdf(combined, ctx.environment_mean, cfg.logistic_scale_s);
    InteractionOutcome out;
    const AgentId leader_id = id_of(ctx, leader_slot);
    if (!(rng.uniform() < p)) {
        out.kind = OutcomeKind::AttackFailed;
        const double penalty = leader_power * (1.0 - cfg.attack_failure_power_factor);
        if (penalty > 0.0) out.affected.push_back({leader_id, TraitField::Power, -penalty});
        return out;
    }

    AttackEvent event;
    event.tick = ctx.tick;
    event.leader_id = leader_id;
    event.financier_id = id_of(ctx, *financier);
    for (std::size_t member : cell) event.cell_ids.push_back(id_of(ctx, member));
    std::sort(event.cell_ids.begin(), event.cell_ids.end());
    event.combined_power = combined;
    event.deaths = sample_death_toll(combined, cfg.death_toll, rng);

    out.kind = OutcomeKind::AttackExecuted;
    out.affected.push_back({leader_id, TraitField::CrimesCommitted, 1.0});
    const double spent = leader_power * (1.0 - cfg.attack_success_power_factor);
    if (spent > 0.0) out.affected.push_back({leader_id, TraitField::Power, -spent});
    for (AgentId member : event.cell_ids) out.affected.push_back({member, TraitField::CrimesCommitted, 1.0});
    // The strongest cell member carries out the attack and leaves the society.
    std::size_t executor = cell.front();
    for (std::size_t member : cell)
        if (stronger(ctx, overrides, member, executor)) executor = member;
    out.removed.push_back(id_of(ctx, executor));
    out.attack = std::move(event);
    return out;
}

InteractionOutcome resolve_interaction(const TickContext& ctx, std::size_t a, std::size_t b,
                                       const EncounterMemory& memory, Rng& rng) {
    const auto& cfg = *ctx.cfg;
    const auto& inc = cfg.increments;
    const Society& society = *ctx.society;
    const Role ra = ctx.role(a);
    const Role rb = ctx.role(b);
    const AgentId ida = id_of(ctx, a);
    const AgentId idb = id_of(ctx, b);

    InteractionOutcome out;
    auto finish = [&](InteractionOutcome o) {
        o.initiator = ida;
        o.partner = idb;
        return o;
    };

    switch (ra) {
        case Role::Civilian: {
            if (!is_neutral(society.at(a), cfg.thresholds)) break;
            if (is_terrorist(rb)) return finish(contact_shift(ctx, a, TraitField::TerrorPredisposition, inc.pred_gain_neutral, rng));
            if (rb == Role::Police) return finish(contact_shift(ctx, a, TraitField::PolicePredisposition, inc.pred_gain_neutral, rng));
            break;
        }
        case Role::Police: {
            if (is_terrorist(rb)) {
                // First recorded encounter is a warning; any later one is an arrest.
                out.encounter = std::pair{ida, idb};
                if (memory.count(ida, idb) > 0) {
                    out.kind = OutcomeKind::Arrest;
                    out.removed.push_back(idb);
                }
                return finish(std::move(out));
            }
            if (rb == Role::Police) {
                out.kind = OutcomeKind::PowerShift;
                out.affected.push_back({ida, TraitField::Power, inc.power_gain_peer});
                out.affected.push_back({idb, TraitField::Power, inc.power_gain_peer});
                return finish(std::move(out));
            }
            return finish(contact_shift(ctx, b, TraitField::PolicePredisposition, inc.pred_gain_contact, rng));
        }
        case Role::Leader: {
            if (is_terrorist(rb)) {
                out.kind = OutcomeKind::PowerShift;
                out.affected.push_back({ida, TraitField::Power, inc.power_gain_peer});
                const PowerOverride gained{a, society.at(a).tensor.variable.power + inc.power_gain_peer};
                if (auto attack = attempt_attack(ctx, a, rng, std::span(&gained, 1))) merge_into(out, std::move(*attack));
                return finish(std::move(out));
            }
            if (rb == Role::Police) return finish(police_pressure(ctx, a));
            return finish(contact_shift(ctx, b, TraitField::TerrorPredisposition, inc.pred_gain_contact, rng));
        }
        case Role::Financier: {
            if (is_terrorist(rb)) {
                out.kind = OutcomeKind::PowerShift;
                out.affected.push_back({ida, TraitField::Power, inc.power_gain_peer});
                out.affected.push_back({idb, TraitField::Power, inc.power_gain_peer});
                return finish(std::move(out));
            }
            if (rb == Role::Police) return finish(police_pressure(ctx, a));
            return finish(contact_shift(ctx, b, TraitField::TerrorPredisposition, inc.pred_gain_contact, rng));
        }
        case Role::Perpetrator: {
            if (is_terrorist(rb)) {
                out.kind = OutcomeKind::PowerShift;
                out.affected.push_back({ida, TraitField::Power, inc.power_gain_peer});
                const double gained_power = society.at(a).tensor.variable.power + inc.power_gain_peer;
                if (gained_power > cfg.thresholds.leader_power_attack_threshold) {
                    // The attack is planned by a leader the perpetrator is tied to.
                    std::optional<std::size_t> leader;
                    if (rb == Role::Leader) {
                        leader = b;
                    } else {
                        for (std::uint32_t n : society.neighbors(a))
                            if (ctx.role(n) == Role::Leader && (!leader || stronger(ctx, {}, n, *leader))) leader = n;
                    }
                    if (leader) {
                        const PowerOverride gained{a, gained_power};
                        if (auto attack = attempt_attack(ctx, *leader, rng, std::span(&gained, 1)))
                            merge_into(out, std::move(*attack));
                    }
                }
                return finish(std::move(out));
            }
            if (rb == Role::Police) return finish(police_pressure(ctx, a));
            return finish(contact_shift(ctx, b, TraitField::TerrorPredisposition, inc.pred_gain_contact, rng));
        }
    }
    return finish(std::move(out));
}

InteractionOutcome resolve_interaction(AgentId a, AgentId b, const Society& society, const SimulationConfig& cfg,
                                       const EncounterMemory& memory, Rng& rng) {
    const auto sa = society.slot_of(a);
    const auto sb = society.slot_of(b);
    if (!sa || !sb) throw ContractViolation("resolve_interaction: unknown agent id");
    if (!society.adjacent(a, b))
        throw ContractViolation("resolve_interaction: agents " + std::to_string(a) + " and " + std::to_string(b) +
                                " are not adjacent");
    const TickContext ctx = make_tick_context(society, cfg);
    return resolve_interaction(ctx, *sa, *sb, memory, rng);
}

AgentId remove_and_replace(Society& society, AgentId id, const RegionIndicators& region,
                           const SimulationConfig& cfg, EncounterMemory& memory, Rng& rng) {
    const auto slot = society.slot_of(id);
    if (!slot) throw ContractViolation("remove_and_replace: unknown agent id " + std::to_string(id));
    society.replace(*slot, sample_fresh_tensor(region, cfg, rng));
    memory.prune(id);
    return society.at(*slot).id;
}

} // namespace raresim
