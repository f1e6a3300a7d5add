#include "raresim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "digest.hpp"
#include "raresim/error.hpp"
#include "text_util.hpp"

namespace raresim {

using nlohmann::json;

AggregateStats aggregate(const Society& society, const RoleThresholds& thresholds) {
    AggregateStats s;
    const auto n = static_cast<double>(society.size());
    s.population = static_cast<std::int64_t>(society.size());
    if (society.size() == 0) return s;
    double sum7 = 0, sum8 = 0, sum9 = 0;
    for (const auto& a : society.agents()) {
        sum7 += a.tensor.variable.police_predisposition;
        sum8 += a.tensor.variable.terror_predisposition;
        sum9 += a.tensor.variable.power;
        ++s.role_counts[static_cast<std::size_t>(classify_role(a, thresholds))];
    }
    s.police_predisposition.mean = sum7 / n;
    s.terror_predisposition.mean = sum8 / n;
    s.power.mean = sum9 / n;
    double ss7 = 0, ss8 = 0, ss9 = 0;
    for (const auto& a : society.agents()) {
        const double d7 = a.tensor.variable.police_predisposition - s.police_predisposition.mean;
        const double d8 = a.tensor.variable.terror_predisposition - s.terror_predisposition.mean;
        const double d9 = a.tensor.variable.power - s.power.mean;
        ss7 += d7 * d7;
        ss8 += d8 * d8;
        ss9 += d9 * d9;
    }
    s.police_predisposition.variance = ss7 / n;
    s.terror_predisposition.variance = ss8 / n;
    s.power.variance = ss9 / n;
    return s;
}

std::vector<double> SimulationLog::death_tolls() const {
    std::vector<double> out;
    for (const auto& t : ticks)
        for (const auto& a : t.attacks) out.push_back(static_cast<double>(a.deaths));
    return out;
}

const Snapshot* SimulationLog::snapshot_at(Tick tick) const {
    for (const auto& s : snapshots)
        if (s.tick == tick) return &s;
    return nullptr;
}

TickReport step(Society& society, const SimulationConfig& cfg, EncounterMemory& memory, const RegionIndicators& region,
                Rng& pair_rng, Rng& outcome_rng, Rng& replacement_rng) {
    TickReport report;
    {
        const TickContext ctx = make_tick_context(society, cfg);
        report.tick = ctx.tick;

        if (cfg.pair_selection == PairSelection::IncidentEdge) {
            for (std::size_t slot : society.slots_by_id()) {
                const auto& nbrs = society.neighbors(slot);
                if (nbrs.empty()) continue;
                const std::size_t partner = nbrs[pair_rng.below(nbrs.size())];
                report.outcomes.push_back(resolve_interaction(ctx, slot, partner, memory, outcome_rng));
            }
        } else {
            // Every edge joins the tick with probability edge_subset_fraction,
            // with a random initiator.
            for (std::size_t slot : society.slots_by_id()) {
                for (std::uint32_t other : society.neighbors(slot)) {
                    if (society.at(other).id < society.at(slot).id) continue;
                    if (!(pair_rng.uniform() < cfg.edge_subset_fraction)) continue;
                    const bool flip = pair_rng.bernoulli(0.5);
                    const std::size_t a = flip ? other : slot;
                    const std::size_t b = flip ? slot : other;
                    report.outcomes.push_back(resolve_interaction(ctx, a, b, memory, outcome_rng));
                }
            }
        }
    }

    // Sum numeric deltas per (slot, field) so the application order is irrelevant.
    struct Accum {
        std::int64_t crimes = 0;
        double police = 0.0, terror = 0.0, power = 0.0;
        bool touched = false;
    };
    std::vector<Accum> acc(society.size());
    for (const auto& o : report.outcomes) {
        ++report.kind_counts[static_cast<std::size_t>(o.kind)];
        if (o.kind == OutcomeKind::Arrest) ++report.arrests;
        if (o.kind == OutcomeKind::Recruitment) ++report.recruitments;
        if (o.attack) report.attacks.push_back(*o.attack);
        for (const auto& d : o.affected) {
            const auto slot = society.slot_of(d.agent);
            if (!slot) continue;
            auto& a = acc[*slot];
            a.touched = true;
            switch (d.field) {
                case TraitField::CrimesCommitted: a.crimes += static_cast<std::int64_t>(d.amount); break;
                case TraitField::PolicePredisposition: a.police += d.amount; break;
                case TraitField::TerrorPredisposition: a.terror += d.amount; break;
                case TraitField::Power: a.power += d.amount; break;
            }
        }
    }
    for (std::size_t slot = 0; slot < acc.size(); ++slot) {
        const auto& a = acc[slot];
        if (!a.touched) continue;
        auto& v = society.variable(slot);
        v.crimes_committed += std::max<std::int64_t>(0, a.crimes);
        v.police_predisposition = std::max(0.0, v.police_predisposition + a.police);
        v.terror_predisposition = std::max(0.0, v.terror_predisposition + a.terror);
        v.power = std::clamp(v.power + a.power, 0.0, std::max(cfg.power_cap, v.power));
    }
    for (const auto& o : report.outcomes)
        if (o.encounter) memory.increment(o.encounter->first, o.encounter->second);

    society.advance_tick();

    std::unordered_set<AgentId> removed;
    for (const auto& o : report.outcomes) {
        for (AgentId id : o.removed) {
            if (!removed.insert(id).second) continue;
            const AgentId fresh = remove_and_replace(society, id, region, cfg, memory, replacement_rng);
            report.replacements.push_back({id, fresh});
        }
    }
    return report;
}

TickRecord to_record(const TickReport& report, const AggregateStats& stats) {
    TickRecord r;
    r.tick = report.tick;
    r.kind_counts = report.kind_counts;
    r.arrests = report.arrests;
    r.recruitments = report.recruitments;
    r.attacks = report.attacks;
    r.replacements = report.replacements;
    r.stats = stats;
    return r;
}

Simulation::Simulation(SimulationConfig cfg, RegionIndicators region)
    : cfg_(std::move(cfg)),
      region_(std::move(region)),
      society_(build_society(cfg_, region_)),
      pair_rng_(Rng::substream(cfg_.seed, Stream::PairSelection)),
      outcome_rng_(Rng::substream(cfg_.seed, Stream::Outcomes)),
      replacement_rng_(Rng::substream(cfg_.seed, Stream::Replacement)) {}

TickReport Simulation::step() {
    return raresim::step(society_, cfg_, memory_, region_, pair_rng_, outcome_rng_, replacement_rng_);
}

Snapshot Simulation::snapshot() const {
    Snapshot snap;
    snap.tick = society_.tick();
    snap.agents.reserve(society_.size());
    for (std::size_t slot : society_.slots_by_id()) {
        const auto& a = society_.at(slot);
        snap.agents.push_back({a.id, a.tensor, classify_role(a, cfg_.thresholds)});
    }
    snap.stats = aggregate(society_, cfg_.thresholds);
    return snap;
}

ParamChange Simulation::set_param(std::string_view key, double value) {
    ParamChange change;
    change.applied_at = society_.tick();
    change.key = std::string(key);
    change.old_value = get_tunable(cfg_, key);
    SimulationConfig updated = cfg_;
    set_tunable(updated, key, value);
    updated.validate();
    cfg_ = std::move(updated);
    change.value = value;
    changes_.push_back(change);
    return change;
}

std::uint64_t Simulation::digest() const {
    detail::Fnv1a h;
    h.add(society_digest(society_));
    h.add(static_cast<std::uint64_t>(memory_.size()));
    for (const auto& [pair, count] : memory_.entries()) {
        h.add(pair.first);
        h.add(pair.second);
        h.add(count);
    }
    return h.value();
}

bool snapshot_due(Tick tick, Tick final_tick, std::int64_t every) {
    return tick == 0 || tick == final_tick || (every > 0 && tick % static_cast<Tick>(every) == 0);
}

namespace {

template <class F>
void for_each_sink(const RunOptions& options, F&& f) {
    for (LogSink* sink : options.sinks)
        if (sink) f(*sink);
}

} // namespace

SimulationLog run(const SimulationConfig& cfg, const RegionIndicators& region, const RunOptions& options) {
    cfg.validate();
    SimulationLog log;
    log.config = cfg;
    log.region = region;

    Simulation sim(cfg, region);
    const Tick final_tick = static_cast<Tick>(cfg.n_ticks);
    std::vector<ParamChange> scheduled = options.scheduled_changes;
    std::stable_sort(scheduled.begin(), scheduled.end(),
                     [](const ParamChange& a, const ParamChange& b) { return a.applied_at < b.applied_at; });
    std::size_t next_scheduled = 0;
    Tick last_snapshot = 0;
    bool have_snapshot = false;

    auto emit_snapshot = [&]() {
        Snapshot snap = sim.snapshot();
        for_each_sink(options, [&](LogSink& s) { s.snapshot(snap); });
        last_snapshot = snap.tick;
        have_snapshot = true;
        if (options.keep_snapshots) log.snapshots.push_back(std::move(snap));
    };
    auto flush_changes = [&]() {
        const auto& applied = sim.param_changes();
        for (std::size_t i = log.param_changes.size(); i < applied.size(); ++i) {
            for_each_sink(options, [&](LogSink& s) { s.param_change(applied[i]); });
            log.param_changes.push_back(applied[i]);
        }
    };

    try {
        for_each_sink(options, [&](LogSink& s) { s.begin(cfg, region); });
        emit_snapshot();

        while (sim.tick() < final_tick) {
            while (next_scheduled < scheduled.size() && scheduled[next_scheduled].applied_at <= sim.tick()) {
                sim.set_param(scheduled[next_scheduled].key, scheduled[next_scheduled].value);
                ++next_scheduled;
            }
            flush_changes();
            if (options.control) {
                const bool go_on = options.control->at_boundary(sim);
                flush_changes();
                if (!go_on) break;
            }
            TickReport report = sim.step();
            TickRecord record = to_record(report, aggregate(sim.society(), sim.config().thresholds));
            for_each_sink(options, [&](LogSink& s) { s.tick(record); });
            if (options.control) options.control->after_tick(sim, report);
            log.ticks.push_back(std::move(record));
            if (snapshot_due(sim.tick(), final_tick, cfg.snapshot_every)) emit_snapshot();
        }
        if (!have_snapshot || last_snapshot != sim.tick()) emit_snapshot();
    } catch (const SinkError& e) {
        log.aborted = true;
        log.abort_reason = e.what();
    }

    log.final_tick = sim.tick();
    log.final_digest = sim.digest();
    for (LogSink* sink : options.sinks) {
        if (!sink) continue;
        try {
            sink->end(log.final_tick, log.final_digest, log.aborted);
        } catch (const SinkError& e) {
            if (!log.aborted) {
                log.aborted = true;
                log.abort_reason = e.what();
            }
        }
    }
    if (options.control) options.control->finished(sim);
    return log;
}

std::uint64_t replay(const SimulationLog& log) {
    SimulationConfig cfg = log.config;
    // Tunables in the header are the values at tick 0; the logged changes
    // bring them forward.
    cfg.n_ticks = static_cast<std::int64_t>(log.final_tick);
    RunOptions options;
    options.scheduled_changes = log.param_changes;
    options.keep_snapshots = false;
    return run(cfg, log.region, options).final_digest;
}

// ---------------------------------------------------------------------------
// Log encoding

json encode_stats(const AggregateStats& s) {
    json roles = json::object();
    for (std::size_t r = 0; r < 5; ++r) roles[std::string(to_string(static_cast<Role>(r)))] = s.role_counts[r];
    return {{"population", s.population},
            {"police_predisposition", {s.police_predisposition.mean, s.police_predisposition.variance}},
            {"terror_predisposition", {s.terror_predisposition.mean, s.terror_predisposition.variance}},
            {"power", {s.power.mean, s.power.variance}},
            {"roles", roles}};
}

json encode_attack(const AttackEvent& a) {
    return {{"tick", a.tick},           {"leader", a.leader_id},
            {"financier", a.financier_id}, {"cell", a.cell_ids},
            {"combined_power", a.combined_power}, {"deaths", a.deaths}};
}

json encode_header(const SimulationConfig& cfg, const RegionIndicators& region) {
    return {{"type", "header"},
            {"schema", kLogSchema},
            {"version", kLogVersion},
            {"config", to_json(cfg)},
            {"region", format_region(region)}};
}

json encode_tick(const TickRecord& r) {
    json counts = json::object();
    for (std::size_t k = 0; k < kOutcomeKindCount; ++k)
        counts[std::string(to_string(static_cast<OutcomeKind>(k)))] = r.kind_counts[k];
    json attacks = json::array();
    for (const auto& a : r.attacks) attacks.push_back(encode_attack(a));
    json replacements = json::array();
    for (const auto& rep : r.replacements) replacements.push_back({rep.removed, rep.added});
    return {{"type", "tick"},         {"tick", r.tick},       {"counts", counts},
            {"arrests", r.arrests},   {"recruitments", r.recruitments},
            {"attacks", attacks},     {"replacements", replacements},
            {"stats", encode_stats(r.stats)}};
}

json encode_snapshot(const Snapshot& snap) {
    json agents = json::array();
    for (const auto& a : snap.agents) {
        const auto& c = a.tensor.constant;
        const auto& v = a.tensor.variable;
        agents.push_back({a.id, c.education, c.married, c.wealth, c.religious_training, c.crime_exposure,
                          v.crimes_committed, v.police_predisposition, v.terror_predisposition, v.power,
                          to_string(a.role)});
    }
    return {{"type", "snapshot"}, {"tick", snap.tick}, {"stats", encode_stats(snap.stats)}, {"agents", agents}};
}

json encode_param_change(const ParamChange& c) {
    return {{"type", "param"}, {"tick", c.applied_at}, {"key", c.key}, {"old", c.old_value}, {"value", c.value}};
}

FileLogSink::FileLogSink(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw SinkError("cannot open log file " + path.string());
}

void FileLogSink::write(const json& record) {
    out_ << record.dump() << '\n';
    if (!out_) throw SinkError("write failed: " + path_.string());
}

void FileLogSink::begin(const SimulationConfig& cfg, const RegionIndicators& region) {
    write(encode_header(cfg, region));
}
void FileLogSink::tick(const TickRecord& record) { write(encode_tick(record)); }
void FileLogSink::snapshot(const Snapshot& snap) { write(encode_snapshot(snap)); }
void FileLogSink::param_change(const ParamChange& change) { write(encode_param_change(change)); }
void FileLogSink::end(Tick final_tick, std::uint64_t digest, bool aborted) {
    write({{"type", "footer"}, {"final_tick", final_tick}, {"digest", detail::hex64(digest)}, {"aborted", aborted}});
    out_.flush();
    if (!out_) throw SinkError("flush failed: " + path_.string());
}

namespace {

Role parse_role(const std::string& s) {
    for (std::size_t r = 0; r < 5; ++r)
        if (to_string(static_cast<Role>(r)) == s) return static_cast<Role>(r);
    throw ValidationError("role", "unknown role '" + s + "'");
}

AttackEvent decode_attack(const json& j) {
    AttackEvent a;
    a.tick = j.at("tick").get<Tick>();
    a.leader_id = j.at("leader").get<AgentId>();
    a.financier_id = j.at("financier").get<AgentId>();
    a.cell_ids = j.at("cell").get<std::vector<AgentId>>();
    a.combined_power = j.at("combined_power").get<double>();
    a.deaths = j.at("deaths").get<std::int64_t>();
    return a;
}

} // namespace

AggregateStats decode_stats(const json& j) {
    AggregateStats s;
    s.population = j.at("population").get<std::int64_t>();
    auto pair = [&](const char* key, MomentPair& out) {
        out.mean = j.at(key).at(0).get<double>();
        out.variance = j.at(key).at(1).get<double>();
    };
    pair("police_predisposition", s.police_predisposition);
    pair("terror_predisposition", s.terror_predisposition);
    pair("power", s.power);
    for (std::size_t r = 0; r < 5; ++r)
        s.role_counts[r] = j.at("roles").at(std::string(to_string(static_cast<Role>(r)))).get<std::int64_t>();
    return s;
}

SimulationLog parse_log(std::string_view text) {
    SimulationLog log;
    bool have_header = false, have_footer = false;
    const auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty()) continue;
        const std::size_t line_no = i + 1;
        try {
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "header") {
                if (j.at("schema").get<std::string>() != kLogSchema || j.at("version").get<int>() != kLogVersion)
                    throw ValidationError("header", "unsupported log schema or version", line_no);
                log.config = config_from_json(j.at("config"));
                log.region = parse_region(j.at("region").get<std::string>());
                have_header = true;
            } else if (type == "tick") {
                TickRecord r;
                r.tick = j.at("tick").get<Tick>();
                for (std::size_t k = 0; k < kOutcomeKindCount; ++k)
                    r.kind_counts[k] = j.at("counts").at(std::string(to_string(static_cast<OutcomeKind>(k)))).get<std::int64_t>();
                r.arrests = j.at("arrests").get<std::int64_t>();
                r.recruitments = j.at("recruitments").get<std::int64_t>();
                for (const auto& a : j.at("attacks")) r.attacks.push_back(decode_attack(a));
                for (const auto& rep : j.at("replacements"))
                    r.replacements.push_back({rep.at(0).get<AgentId>(), rep.at(1).get<AgentId>()});
                r.stats = decode_stats(j.at("stats"));
                log.ticks.push_back(std::move(r));
            } else if (type == "snapshot") {
                Snapshot s;
                s.tick = j.at("tick").get<Tick>();
                s.stats = decode_stats(j.at("stats"));
                for (const auto& a : j.at("agents")) {
                    SnapshotAgent sa;
                    sa.id = a.at(0).get<AgentId>();
                    auto& c = sa.tensor.constant;
                    auto& v = sa.tensor.variable;
                    c.education = a.at(1).get<double>();
                    c.married = a.at(2).get<double>();
                    c.wealth = a.at(3).get<double>();
                    c.religious_training = a.at(4).get<double>();
                    c.crime_exposure = a.at(5).get<double>();
                    v.crimes_committed = a.at(6).get<std::int64_t>();
                    v.police_predisposition = a.at(7).get<double>();
                    v.terror_predisposition = a.at(8).get<double>();
                    v.power = a.at(9).get<double>();
                    sa.role = parse_role(a.at(10).get<std::string>());
                    s.agents.push_back(std::move(sa));
                }
                log.snapshots.push_back(std::move(s));
            } else if (type == "param") {
                ParamChange c;
                c.applied_at = j.at("tick").get<Tick>();
                c.key = j.at("key").get<std::string>();
                c.old_value = j.at("old").get<double>();
                c.value = j.at("value").get<double>();
                log.param_changes.push_back(std::move(c));
            } else if (type == "footer") {
                log.final_tick = j.at("final_tick").get<Tick>();
                log.final_digest = std::stoull(j.at("digest").get<std::string>(), nullptr, 16);
                log.aborted = j.at("aborted").get<bool>();
                have_footer = true;
            } else {
                throw ValidationError("type", "unknown record type '" + type + "'", line_no);
            }
        } catch (const json::exception& e) {
            throw ValidationError("log", e.what(), line_no);
        }
    }
    if (!have_header) throw ValidationError("log", "missing header record");
    if (!have_footer) {
        log.aborted = true;
        log.abort_reason = "missing footer record (truncated log)";
        log.final_tick = log.ticks.empty() ? 0 : log.ticks.back().tick;
    }
    return log;
}

SimulationLog read_log(const std::filesystem::path& path) { return parse_log(detail::read_file(path)); }

} // namespace raresim
