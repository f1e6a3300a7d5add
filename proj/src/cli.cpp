#include "raresim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "digest.hpp"
#include "raresim/error.hpp"
#include "raresim/fixtures.hpp"
#include "raresim/sampling.hpp"
#include "raresim/steering.hpp"

namespace raresim {

using nlohmann::json;

SimulationConfig with_override(const SimulationConfig& cfg, const std::string& key, double value) {
    json j = to_json(cfg);
    json* node = &j;
    std::string_view rest = key;
    while (true) {
        const auto dot = rest.find('.');
        const std::string part(rest.substr(0, dot));
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                throw ValidationError(key, "array index expected");
            }
            if (idx >= node->size()) throw ValidationError(key, "array index out of range");
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(part)) {
            node = &(*node)[part];
        } else {
            throw ValidationError(key, "unknown config key");
        }
        if (dot == std::string_view::npos) break;
        rest = rest.substr(dot + 1);
    }
    if (node->is_number_integer() || node->is_number_unsigned()) {
        if (value != std::floor(value)) throw ValidationError(key, "integer value expected");
        *node = static_cast<std::int64_t>(value);
    } else if (node->is_number_float()) {
        *node = value;
    } else {
        throw ValidationError(key, "not a numeric field");
    }
    SimulationConfig out = config_from_json(j);
    out.validate();
    return out;
}

SweepSpec parse_sweep_spec(const json& j) {
    if (!j.is_object()) throw ValidationError("sweep", "must be a JSON object");
    SweepSpec spec;
    if (!j.contains("samples") || !j.at("samples").is_number_integer() || j.at("samples").get<std::int64_t>() < 1)
        throw ValidationError("samples", "integer >= 1 required");
    spec.samples = j.at("samples").get<std::size_t>();
    if (!j.contains("params") || !j.at("params").is_object() || j.at("params").empty())
        throw ValidationError("params", "non-empty object of key: [lo, hi] required");
    for (const auto& [key, range] : j.at("params").items()) {
        if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
            throw ValidationError("params." + key, "must be [lo, hi]");
        SweepDimension d{key, range[0].get<double>(), range[1].get<double>()};
        if (!(std::isfinite(d.lo) && std::isfinite(d.hi) && d.lo <= d.hi))
            throw ValidationError("params." + key, "lo <= hi, both finite");
        with_override(SimulationConfig{}, key, d.lo);  // rejects unknown keys early
        spec.dims.push_back(std::move(d));
    }
    return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path.string(), "cannot open sweep spec");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path.string(), "sweep spec is not valid JSON");
    return parse_sweep_spec(j);
}

std::vector<std::vector<double>> sweep_design(const SweepSpec& spec, SamplingMode mode, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, Stream::Sweep);
    auto unit = mode == SamplingMode::LatinHypercube ? latin_hypercube(spec.samples, spec.dims.size(), rng)
                                                      : random_design(spec.samples, spec.dims.size(), rng);
    for (auto& row : unit)
        for (std::size_t d = 0; d < row.size(); ++d) row[d] = spec.dims[d].lo + row[d] * (spec.dims[d].hi - spec.dims[d].lo);
    return unit;
}

std::vector<SweepPoint> run_sweep(const SimulationConfig& base, const RegionIndicators& region, const SweepSpec& spec,
                                  const std::vector<std::vector<double>>& design, const SampleProfile& recorded,
                                  std::uint64_t seed, unsigned jobs,
                                  const std::optional<std::filesystem::path>& log_dir) {
    // Configs are built up front so validation errors surface before any work starts.
    std::vector<SimulationConfig> configs;
    configs.reserve(design.size());
    for (std::size_t i = 0; i < design.size(); ++i) {
        SimulationConfig cfg = base;
        for (std::size_t d = 0; d < spec.dims.size(); ++d) cfg = with_override(cfg, spec.dims[d].key, design[i][d]);
        cfg.seed = seed + i;
        configs.push_back(cfg);
    }
    std::vector<SweepPoint> points(design.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            try {
                std::unique_ptr<FileLogSink> sink;
                RunOptions options;
                options.keep_snapshots = false;
                if (log_dir) {
                    sink = std::make_unique<FileLogSink>(*log_dir / ("point-" + std::to_string(i) + ".ndjson"));
                    options.sinks.push_back(sink.get());
                }
                const SimulationLog log = run(configs[i], region, options);
                if (log.aborted) throw SinkError("point " + std::to_string(i) + ": " + log.abort_reason);
                SweepPoint& p = points[i];
                p.index = i;
                p.seed = configs[i].seed;
                p.values = design[i];
                p.digest = log.final_digest;
                const auto deaths = log.death_tolls();
                p.attacks = deaths.size();
                if (!deaths.empty())
                    p.kl = kl_divergence(make_histogram(deaths, recorded.histogram.edges), recorded.histogram);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(configs.size());
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, configs.size()))));
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
    return points;
}

std::vector<SweepPoint> rank_by_kl(std::vector<SweepPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        const double ka = a.kl.value_or(std::numeric_limits<double>::infinity());
        const double kb = b.kl.value_or(std::numeric_limits<double>::infinity());
        return ka < kb;
    });
    return points;
}

json to_json(const CheckpointReport& r) {
    json j = {{"tick", r.tick},
              {"histogram", to_json(r.histogram)},
              {"polarization", r.polarization},
              {"stats", encode_stats(r.stats)},
              {"attacks", r.attacks}};
    j["deaths"] = r.deaths ? to_json(*r.deaths) : json(nullptr);
    return j;
}

namespace {

constexpr std::size_t kReportBins = 20;

// Captures full snapshots at the requested ticks.
class CheckpointControl final : public RunControl {
public:
    explicit CheckpointControl(std::vector<Tick> ticks) : ticks_(std::move(ticks)) {}
    bool at_boundary(Simulation&) override { return true; }
    void after_tick(const Simulation& sim, const TickReport& report) override {
        if (std::binary_search(ticks_.begin(), ticks_.end(), report.tick)) snapshots.push_back(sim.snapshot());
    }
    std::vector<Snapshot> snapshots;

private:
    std::vector<Tick> ticks_;
};

std::vector<Tick> parse_ticks(const std::string& text) {
    std::vector<Tick> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw ValidationError("--ticks", "comma-separated positive integers expected");
        }
        if (used != item.size() || v < 1) throw ValidationError("--ticks", "comma-separated positive integers expected");
        out.push_back(static_cast<Tick>(v));
    }
    if (out.empty()) throw ValidationError("--ticks", "at least one tick required");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void prepare_out_dir(const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ValidationError(dir.string(), "output path exists and is not a directory");
        if (!fs::is_empty(dir) && !force)
            throw ValidationError(dir.string(), "output directory is not empty; pass --force to reuse it");
    }
    fs::create_directories(dir);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError(path.string(), "cannot open for writing");
    out << j.dump(2) << '\n';
}

SampleProfile recorded_profile(const std::filesystem::path& path) {
    const auto deaths = load_incidents(path).deaths();
    if (deaths.empty()) throw ValidationError(path.string(), "incident file has no rows");
    return profile_samples(deaths);
}

struct Common {
    std::string config;
    std::string region;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool json = false;
    bool force = false;
};

SimulationConfig base_config(const Common& c) {
    SimulationConfig cfg = c.config.empty() ? SimulationConfig{} : load_config(c.config);
    if (c.seed_set) cfg.seed = c.seed;
    return cfg;
}

RegionIndicators base_region(const Common& c) { return c.region.empty() ? default_region() : load_region(c.region); }

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

int cmd_run(const Common& c, const std::string& ticks_arg, std::optional<std::int64_t> snapshot_every, std::ostream& out) {
    SimulationConfig cfg = base_config(c);
    const RegionIndicators region = base_region(c);
    std::vector<Tick> checkpoints;
    if (!ticks_arg.empty()) {
        checkpoints = parse_ticks(ticks_arg);
        cfg.n_ticks = static_cast<std::int64_t>(checkpoints.back());
    } else {
        checkpoints = {static_cast<Tick>(cfg.n_ticks)};
    }
    if (snapshot_every) cfg.snapshot_every = *snapshot_every;
    cfg.validate();
    if (c.out.empty()) throw ValidationError("--out", "output directory required");
    const std::filesystem::path dir = c.out;
    prepare_out_dir(dir, c.force);

    FileLogSink sink(dir / "log.ndjson");
    CheckpointControl control(checkpoints);
    RunOptions options;
    options.sinks.push_back(&sink);
    options.control = &control;
    options.keep_snapshots = false;
    const SimulationLog log = run(cfg, region, options);
    if (log.aborted) throw SinkError("log write failed: " + log.abort_reason);

    std::vector<CheckpointReport> reports;
    for (const Snapshot& snap : control.snapshots) {
        CheckpointReport r;
        r.tick = snap.tick;
        r.histogram = predisposition_histogram(snap, kReportBins);
        r.polarization = polarization_index(snap);
        r.stats = snap.stats;
        std::vector<double> deaths;
        for (const auto& rec : log.ticks)
            if (rec.tick <= snap.tick)
                for (const auto& a : rec.attacks) deaths.push_back(static_cast<double>(a.deaths));
        r.attacks = deaths.size();
        if (!deaths.empty()) r.deaths = summarize(deaths);
        reports.push_back(std::move(r));
    }
    json report = {{"version", 1},
                   {"seed", cfg.seed},
                   {"final_tick", log.final_tick},
                   {"digest", detail::hex64(log.final_digest)},
                   {"config", to_json(cfg)},
                   {"region", region.name},
                   {"checkpoints", json::array()}};
    for (const auto& r : reports) report["checkpoints"].push_back(to_json(r));
    write_json_file(dir / "report.json", report);

    if (c.json) {
        out << report.dump() << '\n';
        return 0;
    }
    out << "run: " << log.final_tick << " ticks, seed " << cfg.seed << ", region " << region.name << '\n';
    for (const auto& r : reports) {
        out << "tick " << r.tick << ": polarization " << fmt(r.polarization) << ", police "
            << r.stats.role_counts[static_cast<int>(Role::Police)] << ", attacks " << r.attacks;
        if (r.deaths)
            out << ", deaths mean " << fmt(r.deaths->mean, 2) << " variance " << fmt(r.deaths->variance, 1) << " median "
                << r.deaths->median;
        out << '\n';
    }
    out << "log: " << (dir / "log.ndjson").string() << '\n';
    out << "digest: " << detail::hex64(log.final_digest) << '\n';
    return 0;
}

int cmd_sweep(const Common& c, const std::string& spec_path, const std::string& sampling, const std::string& incidents,
              unsigned jobs, bool keep_logs, std::ostream& out) {
    const SimulationConfig cfg = base_config(c);
    const RegionIndicators region = base_region(c);
    const SweepSpec spec = load_sweep_spec(spec_path);
    const SamplingMode mode = sampling == "lhs" ? SamplingMode::LatinHypercube : SamplingMode::Random;
    const SampleProfile recorded = recorded_profile(incidents);
    if (c.out.empty()) throw ValidationError("--out", "output directory required");
    const std::filesystem::path dir = c.out;
    prepare_out_dir(dir, c.force);

    const auto design = sweep_design(spec, mode, cfg.seed);
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto points = run_sweep(cfg, region, spec, design, recorded, cfg.seed, jobs,
                                  keep_logs ? std::optional(dir) : std::nullopt);
    const auto ranked = rank_by_kl(points);

    json table = json::array();
    for (const auto& p : ranked) {
        json row = {{"rank", table.size() + 1}, {"point", p.index}, {"seed", p.seed}, {"attacks", p.attacks},
                    {"kl", p.kl ? json(*p.kl) : json(nullptr)}, {"digest", detail::hex64(p.digest)}};
        json params = json::object();
        for (std::size_t d = 0; d < spec.dims.size(); ++d) params[spec.dims[d].key] = p.values[d];
        row["params"] = params;
        table.push_back(row);
    }
    json result = {{"version", 1}, {"sampling", sampling}, {"seed", cfg.seed}, {"samples", spec.samples},
                   {"ranking", table}};
    write_json_file(dir / "sweep.json", result);

    if (c.json) {
        out << result.dump() << '\n';
        return 0;
    }
    out << "rank  point  attacks  kl        ";
    for (const auto& d : spec.dims) out << d.key << "  ";
    out << '\n';
    for (const auto& row : table) {
        out << row["rank"].get<std::size_t>() << "  " << row["point"].get<std::size_t>() << "  "
            << row["attacks"].get<std::size_t>() << "  " << (row["kl"].is_null() ? "n/a" : fmt(row["kl"].get<double>(), 4))
            << "  ";
        for (const auto& d : spec.dims) out << fmt(row["params"][d.key].get<double>(), 4) << "  ";
        out << '\n';
    }
    return 0;
}

int cmd_compare(const Common& c, const std::string& log_path, const std::string& incidents, bool deadly_only,
                std::ostream& out) {
    const SimulationLog log = read_log(log_path);
    auto synthetic = log.death_tolls();
    auto recorded = load_incidents(incidents).deaths();
    if (deadly_only) {
        synthetic = positive_only(synthetic);
        recorded = positive_only(recorded);
    }
    if (synthetic.empty()) throw ValidationError(log_path, "log contains no executed attacks");
    if (recorded.empty()) throw ValidationError(incidents, "incident file has no usable rows");
    const ComparisonReport report = compare(profile_samples(synthetic), profile_samples(recorded));
    if (c.json)
        out << to_json(report).dump() << '\n';
    else
        out << format_report(report);
    return 0;
}

int cmd_serve(const Common& c, const std::string& host, int port, const std::string& ticks_arg, bool start_running,
              std::ostream& out) {
    SimulationConfig cfg = base_config(c);
    const RegionIndicators region = base_region(c);
    if (!ticks_arg.empty()) cfg.n_ticks = static_cast<std::int64_t>(parse_ticks(ticks_arg).back());
    cfg.validate();
    std::unique_ptr<FileLogSink> sink;
    RunOptions options;
    if (!c.out.empty()) {
        prepare_out_dir(c.out, c.force);
        sink = std::make_unique<FileLogSink>(std::filesystem::path(c.out) / "log.ndjson");
        options.sinks.push_back(sink.get());
    }
    SteeringController::Options copts;
    copts.start_paused = !start_running;
    SteeringController controller(copts);
    SteeringServer server(controller, host, port);
    if (c.json)
        out << json{{"host", host}, {"port", server.port()}, {"paused", copts.start_paused}}.dump() << std::endl;
    else
        out << "serving on http://" << host << ':' << server.port() << (copts.start_paused ? " (paused)" : "")
            << std::endl;
    options.control = &controller;
    options.keep_snapshots = false;
    const SimulationLog log = run(cfg, region, options);
    server.stop();
    if (c.json)
        out << json{{"final_tick", log.final_tick}, {"digest", detail::hex64(log.final_digest)}}.dump() << '\n';
    else
        out << "finished at tick " << log.final_tick << ", digest " << detail::hex64(log.final_digest) << '\n';
    return log.aborted ? 1 : 0;
}

int cmd_gen_fixtures(const Common& c, std::ostream& out) {
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("data") : std::filesystem::path(c.out);
    const auto written = write_fixtures(dir, c.force);
    if (c.json) {
        json j = json::array();
        for (const auto& p : written) j.push_back(p.string());
        out << json{{"written", j}}.dump() << '\n';
    } else {
        for (const auto& p : written) out << "wrote " << p.string() << '\n';
    }
    return 0;
}

void add_common(CLI::App* cmd, Common& c, bool with_inputs) {
    if (with_inputs) {
        cmd->add_option("--config", c.config, "Simulation config (JSON)")->check(CLI::ExistingFile);
        cmd->add_option("--region", c.region, "Region indicator file")->check(CLI::ExistingFile);
    }
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--seed", c.seed, "Master seed (overrides the config)")->each([&c](const std::string&) {
        c.seed_set = true;
    });
    cmd->add_flag("--json", c.json, "Machine-readable output");
    cmd->add_flag("--force", c.force, "Reuse a non-empty output directory");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"raresim: agent-based synthetic generator of rare attack events"};
    app.require_subcommand(1);
    Common c;

    std::string ticks;
    std::int64_t snapshot_every = 0;
    auto* run_cmd = app.add_subcommand("run", "Run one simulation and write its log and checkpoint report");
    add_common(run_cmd, c, true);
    run_cmd->add_option("--ticks", ticks, "Final tick, or comma-separated checkpoint ticks");
    auto* every_opt = run_cmd->add_option("--snapshot-every", snapshot_every, "Snapshot cadence in ticks");

    std::string spec_path, sampling = "lhs", incidents = "data/incidents.csv";
    unsigned jobs = 0;
    bool keep_logs = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep and rank points by KL divergence");
    add_common(sweep_cmd, c, true);
    sweep_cmd->add_option("--spec", spec_path, "Sweep spec (JSON)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--sampling", sampling, "Design: random or lhs")
        ->check(CLI::IsMember({"random", "lhs"}))
        ->capture_default_str();
    sweep_cmd->add_option("--incidents", incidents, "Recorded incident file")->capture_default_str();
    sweep_cmd->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
    sweep_cmd->add_flag("--logs", keep_logs, "Write one event log per point");

    std::string log_path, compare_incidents;
    bool deadly_only = false;
    auto* compare_cmd = app.add_subcommand("compare", "Compare a run's death tolls with recorded incidents");
    add_common(compare_cmd, c, false);
    compare_cmd->add_option("log", log_path, "Event log (NDJSON)")->required();
    compare_cmd->add_option("incidents", compare_incidents, "Recorded incident file")->required();
    compare_cmd->add_flag("--deadly-only", deadly_only, "Drop zero-death events on both sides");

    std::string host = "127.0.0.1";
    int port = 0;
    bool start_running = false;
    auto* serve_cmd = app.add_subcommand("serve", "Run a steerable simulation behind the HTTP steering server");
    add_common(serve_cmd, c, true);
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve_cmd->add_option("--ticks", ticks, "Final tick");
    serve_cmd->add_flag("--start-running", start_running, "Do not wait for a resume command");

    auto* fixtures_cmd = app.add_subcommand("gen-fixtures", "Write region, config and incident fixtures");
    add_common(fixtures_cmd, c, false);

    std::vector<std::string> argv_store{"raresim"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run_cmd)
            return cmd_run(c, ticks, every_opt->count() ? std::optional(snapshot_every) : std::nullopt, out);
        if (*sweep_cmd) return cmd_sweep(c, spec_path, sampling, incidents, jobs, keep_logs, out);
        if (*compare_cmd) return cmd_compare(c, log_path, compare_incidents, deadly_only, out);
        if (*serve_cmd) return cmd_serve(c, host, port, ticks, start_running, out);
        if (*fixtures_cmd) return cmd_gen_fixtures(c, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        if (c.json)
            err << json{{"error", {{"field", e.field()}, {"constraint", e.constraint()}, {"line", e.line()}}}}.dump()
                << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace raresim
