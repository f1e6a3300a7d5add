#include "raresim/steering.hpp"

#include <cstdio>
#include <random>

#include "raresim/error.hpp"

namespace raresim {

using nlohmann::json;

std::string_view to_string(CommandType type) {
    switch (type) {
        case CommandType::Pause: return "pause";
        case CommandType::Resume: return "resume";
        case CommandType::StepN: return "step";
        case CommandType::SetParam: return "set_param";
        case CommandType::SnapshotNow: return "snapshot_now";
        case CommandType::Stop: return "stop";
    }
    return "unknown";
}

std::string_view to_string(AckStatus status) {
    switch (status) {
        case AckStatus::Pending: return "pending";
        case AckStatus::Applied: return "applied";
        case AckStatus::Rejected: return "rejected";
    }
    return "unknown";
}

ControlCommand parse_command(const json& j) {
    if (!j.is_object()) throw ValidationError("command", "must be a JSON object");
    if (j.contains("version") && j.at("version") != kSteerVersion)
        throw ValidationError("version", "unsupported command version");
    if (!j.contains("type") || !j.at("type").is_string()) throw ValidationError("type", "missing command type");
    const std::string type = j.at("type").get<std::string>();
    ControlCommand cmd;
    if (type == "pause") {
        cmd.type = CommandType::Pause;
    } else if (type == "resume") {
        cmd.type = CommandType::Resume;
    } else if (type == "step") {
        cmd.type = CommandType::StepN;
        if (!j.contains("n") || !j.at("n").is_number_integer()) throw ValidationError("n", "step needs an integer n");
        cmd.steps = j.at("n").get<std::int64_t>();
    } else if (type == "set_param") {
        cmd.type = CommandType::SetParam;
        if (!j.contains("key") || !j.at("key").is_string()) throw ValidationError("key", "set_param needs a key");
        if (!j.contains("value") || !j.at("value").is_number()) throw ValidationError("value", "set_param needs a number");
        cmd.key = j.at("key").get<std::string>();
        cmd.value = j.at("value").get<double>();
    } else if (type == "snapshot_now") {
        cmd.type = CommandType::SnapshotNow;
    } else if (type == "stop") {
        cmd.type = CommandType::Stop;
    } else {
        throw ValidationError("type", "unknown command type '" + type + "'");
    }
    return cmd;
}

json to_json(const ControlCommand& cmd) {
    json j{{"version", kSteerVersion}, {"type", to_string(cmd.type)}};
    if (cmd.type == CommandType::StepN) j["n"] = cmd.steps;
    if (cmd.type == CommandType::SetParam) {
        j["key"] = cmd.key;
        j["value"] = cmd.value;
    }
    return j;
}

void check_command(const ControlCommand& cmd) {
    if (cmd.type == CommandType::StepN && cmd.steps < 1) throw ValidationError("n", "must be >= 1");
    if (cmd.type == CommandType::SetParam) {
        // Runs the whitelist and range checks against a scratch config.
        SimulationConfig scratch;
        set_tunable(scratch, cmd.key, cmd.value);
    }
}

json to_json(const CommandAck& ack) {
    json j{{"version", kSteerVersion}, {"seq", ack.seq}, {"status", to_string(ack.status)}};
    if (!ack.error.empty()) j["error"] = ack.error;
    j["applied_at"] = ack.applied_at ? json(*ack.applied_at) : json(nullptr);
    if (!ack.result.is_null()) j["result"] = ack.result;
    return j;
}

json to_json(const LiveFrame& f) {
    json params = json::object();
    for (const auto& [k, v] : f.params) params[k] = v;
    return {{"version", kSteerVersion},
            {"type", "frame"},
            {"tick", f.tick},
            {"histogram", to_json(f.histogram)},
            {"attack_count", f.attack_count},
            {"deaths", f.deaths},
            {"polarization", f.polarization},
            {"params", params},
            {"stats", encode_stats(f.stats)}};
}

LiveFrame frame_from_json(const json& j) {
    try {
        if (j.at("version") != kSteerVersion || j.at("type") != "frame")
            throw ValidationError("frame", "not a version 1 frame");
        LiveFrame f;
        f.tick = j.at("tick").get<Tick>();
        f.histogram.edges = j.at("histogram").at("edges").get<std::vector<double>>();
        f.histogram.counts = j.at("histogram").at("counts").get<std::vector<std::uint64_t>>();
        f.histogram.total = j.at("histogram").at("total").get<std::uint64_t>();
        f.attack_count = j.at("attack_count").get<std::int64_t>();
        f.deaths = j.at("deaths").get<std::vector<std::int64_t>>();
        f.polarization = j.at("polarization").get<double>();
        for (const auto& [k, v] : j.at("params").items()) f.params.emplace_back(k, v.get<double>());
        f.stats = decode_stats(j.at("stats"));
        return f;
    } catch (const json::exception& e) {
        throw ValidationError("frame", e.what());
    }
}

namespace {

std::string make_token() {
    std::random_device rd;
    std::uint64_t a = (std::uint64_t{rd()} << 32) ^ rd();
    std::uint64_t b = (std::uint64_t{rd()} << 32) ^ rd();
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return buf;
}

std::vector<std::pair<std::string, double>> current_params(const SimulationConfig& cfg) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& p : tunable_params()) out.emplace_back(std::string(p.key), get_tunable(cfg, p.key));
    return out;
}

} // namespace

SteeringController::SteeringController() : SteeringController(Options{}) {}

SteeringController::SteeringController(Options options) : options_(options), paused_(options.start_paused) {
    if (options_.histogram_bins < 2) throw ValidationError("histogram_bins", "must be >= 2");
    const SimulationConfig defaults;
    config_json_ = to_json(defaults);
    params_ = current_params(defaults);
}

SteeringController::~SteeringController() {
    std::lock_guard lock(mutex_);
    for (auto& [token, session] : sessions_)
        if (session->frames) session->frames->close();
}

std::string SteeringController::attach(bool controller, std::int64_t every, std::size_t capacity, bool subscribe) {
    if (every < 1) throw ValidationError("every", "must be >= 1");
    if (capacity < 1) throw ValidationError("capacity", "must be >= 1");
    std::lock_guard lock(mutex_);
    if (controller)
        for (const auto& [token, s] : sessions_)
            if (s->controller) throw SessionError(SessionError::Code::ControllerTaken, "a controller is already attached");
    auto session = std::make_shared<Session>();
    session->token = make_token();
    session->controller = controller;
    session->every = every;
    session->capacity = capacity;
    if (subscribe) session->frames = std::make_shared<BoundedQueue<LiveFrame>>(capacity);
    if (subscribe && finished_) session->frames->close();
    sessions_[session->token] = session;
    return session->token;
}

std::shared_ptr<SteeringController::Session> SteeringController::find(const std::string& token) const {
    auto it = sessions_.find(token);
    if (it == sessions_.end()) throw SessionError(SessionError::Code::UnknownSession, "unknown session token");
    return it->second;
}

void SteeringController::detach(const std::string& token) {
    std::lock_guard lock(mutex_);
    auto session = find(token);
    if (session->frames) session->frames->close();
    sessions_.erase(token);
}

void SteeringController::subscribe(const std::string& token) {
    std::lock_guard lock(mutex_);
    auto session = find(token);
    if (session->frames) throw SessionError(SessionError::Code::AlreadySubscribed, "frame stream already open");
    session->frames = std::make_shared<BoundedQueue<LiveFrame>>(session->capacity);
    session->window_deaths.clear();
    session->window_attacks = 0;
    if (finished_) session->frames->close();
}

void SteeringController::unsubscribe(const std::string& token) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(token);
    if (it == sessions_.end() || !it->second->frames) return;
    it->second->frames->close();
    it->second->frames.reset();
}

bool SteeringController::is_controller(const std::string& token) const {
    std::lock_guard lock(mutex_);
    return find(token)->controller;
}

SteeringController::FrameWait SteeringController::next_frame(const std::string& token,
                                                             std::chrono::milliseconds timeout, LiveFrame& out) {
    std::shared_ptr<BoundedQueue<LiveFrame>> queue;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(token);
        if (it == sessions_.end() || !it->second->frames) return FrameWait::Closed;
        queue = it->second->frames;
    }
    if (auto frame = queue->pop_for(timeout)) {
        out = std::move(*frame);
        return FrameWait::Frame;
    }
    return queue->closed() && queue->size() == 0 ? FrameWait::Closed : FrameWait::Timeout;
}

CommandAck SteeringController::submit(const std::string& token, const ControlCommand& cmd) {
    std::unique_lock lock(mutex_);
    auto session = find(token);
    if (!session->controller)
        throw SessionError(SessionError::Code::NotController, "only the controller session may send commands");
    CommandAck ack;
    ack.seq = next_seq_++;
    if (finished_) {
        ack.status = AckStatus::Rejected;
        ack.error = "run finished";
    } else {
        try {
            check_command(cmd);
        } catch (const ValidationError& e) {
            ack.status = AckStatus::Rejected;
            ack.error = e.what();
        }
    }
    acks_[ack.seq] = ack;
    if (ack.status == AckStatus::Pending) {
        commands_.push_back({ack.seq, cmd});
        commands_cv_.notify_all();
    }
    acks_cv_.notify_all();
    return ack;
}

std::optional<CommandAck> SteeringController::ack(std::uint64_t seq) const {
    std::lock_guard lock(mutex_);
    auto it = acks_.find(seq);
    if (it == acks_.end()) return std::nullopt;
    return it->second;
}

CommandAck SteeringController::wait_ack(std::uint64_t seq, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    auto it = acks_.find(seq);
    if (it == acks_.end()) throw ValidationError("seq", "unknown command sequence number");
    acks_cv_.wait_for(lock, timeout, [&] { return acks_.at(seq).status != AckStatus::Pending; });
    return acks_.at(seq);
}

json SteeringController::meta() const {
    std::lock_guard lock(mutex_);
    json tunables = json::array();
    for (const auto& p : tunable_params()) {
        double value = 0.0;
        for (const auto& [k, v] : params_)
            if (k == p.key) value = v;
        tunables.push_back({{"key", p.key},
                            {"min", p.min},
                            {"max", p.max},
                            {"min_inclusive", p.min_inclusive},
                            {"max_inclusive", p.max_inclusive},
                            {"value", value}});
    }
    bool controller_attached = false;
    for (const auto& [t, s] : sessions_) controller_attached = controller_attached || s->controller;
    return {{"protocol", kSteerProtocol},
            {"version", kSteerVersion},
            {"tick", tick_},
            {"paused", paused_},
            {"finished", finished_},
            {"controller_attached", controller_attached},
            {"sessions", sessions_.size()},
            {"histogram_bins", options_.histogram_bins},
            {"tunables", tunables},
            {"config", config_json_}};
}

bool SteeringController::run_finished() const {
    std::lock_guard lock(mutex_);
    return finished_;
}

bool SteeringController::paused() const {
    std::lock_guard lock(mutex_);
    return paused_;
}

Tick SteeringController::tick() const {
    std::lock_guard lock(mutex_);
    return tick_;
}

void SteeringController::shutdown() {
    std::lock_guard lock(mutex_);
    stop_ = true;
    commands_cv_.notify_all();
}

// Called with mutex_ held.
void SteeringController::record(CommandAck ack) {
    acks_[ack.seq] = std::move(ack);
    acks_cv_.notify_all();
}

// Called with mutex_ held.
void SteeringController::publish_state(const Simulation& sim) {
    tick_ = sim.tick();
    config_json_ = to_json(sim.config());
    params_ = current_params(sim.config());
}

// Called with mutex_ held, on the simulation thread at a tick boundary.
void SteeringController::apply(Simulation& sim, const Pending& p) {
    CommandAck ack;
    ack.seq = p.seq;
    ack.status = AckStatus::Applied;
    ack.applied_at = sim.tick();
    switch (p.cmd.type) {
        case CommandType::Pause:
            paused_ = true;
            step_budget_ = -1;
            break;
        case CommandType::Resume:
            paused_ = false;
            step_budget_ = -1;
            break;
        case CommandType::StepN:
            paused_ = false;
            step_budget_ = p.cmd.steps;
            break;
        case CommandType::SetParam:
            try {
                sim.set_param(p.cmd.key, p.cmd.value);
            } catch (const ValidationError& e) {
                ack.status = AckStatus::Rejected;
                ack.error = e.what();
                ack.applied_at.reset();
            }
            break;
        case CommandType::SnapshotNow:
            ack.result = encode_snapshot(sim.snapshot());
            break;
        case CommandType::Stop:
            stop_ = true;
            break;
    }
    record(std::move(ack));
}

bool SteeringController::at_boundary(Simulation& sim) {
    std::unique_lock lock(mutex_);
    for (;;) {
        while (!commands_.empty()) {
            const Pending p = std::move(commands_.front());
            commands_.pop_front();
            apply(sim, p);
        }
        publish_state(sim);
        if (stop_) return false;
        if (step_budget_ == 0) {
            paused_ = true;
            step_budget_ = -1;
        }
        if (!paused_) {
            if (step_budget_ > 0) --step_budget_;
            return true;
        }
        commands_cv_.wait(lock, [&] { return stop_ || !commands_.empty(); });
    }
}

void SteeringController::after_tick(const Simulation& sim, const TickReport& report) {
    std::vector<std::pair<std::shared_ptr<BoundedQueue<LiveFrame>>, LiveFrame>> out;
    {
        std::lock_guard lock(mutex_);
        publish_state(sim);
        const Tick t = sim.tick();
        bool any_due = false;
        for (auto& [token, s] : sessions_) {
            if (!s->frames) continue;
            s->window_attacks += static_cast<std::int64_t>(report.attacks.size());
            for (const auto& a : report.attacks) s->window_deaths.push_back(a.deaths);
            any_due = any_due || t % static_cast<Tick>(s->every) == 0;
        }
        if (!any_due) return;

        LiveFrame base;
        base.tick = t;
        std::vector<double> values;
        values.reserve(sim.society().size());
        for (const auto& a : sim.society().agents()) values.push_back(signed_predisposition(a.tensor));
        base.histogram = predisposition_histogram(values, options_.histogram_bins);
        base.polarization = polarization_index(values);
        base.params = params_;
        base.stats = aggregate(sim.society(), sim.config().thresholds);

        for (auto& [token, s] : sessions_) {
            if (!s->frames || t % static_cast<Tick>(s->every) != 0) continue;
            LiveFrame f = base;
            f.attack_count = s->window_attacks;
            f.deaths = std::move(s->window_deaths);
            s->window_deaths.clear();
            s->window_attacks = 0;
            out.emplace_back(s->frames, std::move(f));
        }
    }
    // Blocking pushes happen outside the lock: a full buffer holds the
    // simulation here until the reader catches up or detaches.
    for (auto& [queue, frame] : out) queue->push(std::move(frame));
}

void SteeringController::finished(const Simulation& sim) {
    std::lock_guard lock(mutex_);
    publish_state(sim);
    finished_ = true;
    paused_ = false;
    for (const auto& p : commands_) {
        CommandAck ack;
        ack.seq = p.seq;
        ack.status = AckStatus::Rejected;
        ack.error = "run finished";
        record(std::move(ack));
    }
    commands_.clear();
    for (auto& [token, s] : sessions_)
        if (s->frames) s->frames->close();
}

} // namespace raresim
