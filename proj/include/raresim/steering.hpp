#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "raresim/bounded_queue.hpp"
#include "raresim/scheduler.hpp"
#include "raresim/statistics.hpp"

namespace raresim {

inline constexpr std::string_view kSteerProtocol = "raresim-steer";
inline constexpr int kSteerVersion = 1;

enum class CommandType { Pause, Resume, StepN, SetParam, SnapshotNow, Stop };

std::string_view to_string(CommandType type);

struct ControlCommand {
    CommandType type = CommandType::Pause;
    std::int64_t steps = 0;  // StepN
    std::string key;         // SetParam
    double value = 0.0;      // SetParam

    static ControlCommand of(CommandType type) {
        ControlCommand c;
        c.type = type;
        return c;
    }
    static ControlCommand pause() { return of(CommandType::Pause); }
    static ControlCommand resume() { return of(CommandType::Resume); }
    static ControlCommand step(std::int64_t n) {
        ControlCommand c = of(CommandType::StepN);
        c.steps = n;
        return c;
    }
    static ControlCommand set_param(std::string key, double value) {
        ControlCommand c = of(CommandType::SetParam);
        c.key = std::move(key);
        c.value = value;
        return c;
    }
    static ControlCommand snapshot_now() { return of(CommandType::SnapshotNow); }
    static ControlCommand stop() { return of(CommandType::Stop); }
};

/// Parses {"type": "set_param", "key": ..., "value": ...} and friends.
/// Throws ValidationError for malformed commands.
ControlCommand parse_command(const nlohmann::json& j);
nlohmann::json to_json(const ControlCommand& cmd);

/// Static validation (shape, whitelist, range). Throws ValidationError.
void check_command(const ControlCommand& cmd);

enum class AckStatus { Pending, Applied, Rejected };
std::string_view to_string(AckStatus status);

struct CommandAck {
    std::uint64_t seq = 0;
    AckStatus status = AckStatus::Pending;
    std::string error;
    std::optional<Tick> applied_at;  // tick boundary at which the command took effect
    nlohmann::json result;           // SnapshotNow carries the snapshot here
};

nlohmann::json to_json(const CommandAck& ack);

/// Aggregate view pushed to observers.
struct LiveFrame {
    Tick tick = 0;
    Histogram histogram;
    std::int64_t attack_count = 0;      // attacks since this session's previous frame
    std::vector<std::int64_t> deaths;   // their death tolls
    double polarization = 0.0;
    std::vector<std::pair<std::string, double>> params;  // current tunables
    AggregateStats stats;
};

nlohmann::json to_json(const LiveFrame& frame);
LiveFrame frame_from_json(const nlohmann::json& j);

class SessionError : public std::runtime_error {
public:
    enum class Code { UnknownSession, ControllerTaken, NotController, RunFinished, AlreadySubscribed };
    SessionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Run control for a live simulation. The simulation thread calls the
/// RunControl hooks; any other thread may attach sessions, submit commands and
/// read frames. Commands take effect at the next tick boundary.
class SteeringController final : public RunControl {
public:
    struct Options {
        bool start_paused = false;
        std::size_t histogram_bins = 20;
    };

    SteeringController();
    explicit SteeringController(Options options);
    ~SteeringController() override;

    /// Returns a session token. At most one controller at a time; observers are
    /// read-only. `every` is the frame cadence in ticks, `capacity` the frame
    /// buffer size; a full buffer blocks the simulation. Frames are produced
    /// only while the session is subscribed.
    std::string attach(bool controller, std::int64_t every = 1, std::size_t capacity = 64, bool subscribe = true);
    void detach(const std::string& token);
    /// Starts frame delivery. Throws SessionError when already subscribed.
    void subscribe(const std::string& token);
    /// Stops frame delivery and drops buffered frames.
    void unsubscribe(const std::string& token);
    bool is_controller(const std::string& token) const;

    enum class FrameWait { Frame, Timeout, Closed };
    /// Waits for the session's next frame.
    FrameWait next_frame(const std::string& token, std::chrono::milliseconds timeout, LiveFrame& out);

    /// Queues a command. Invalid commands are rejected immediately; valid ones
    /// stay Pending until the simulation reaches a tick boundary.
    CommandAck submit(const std::string& token, const ControlCommand& cmd);
    std::optional<CommandAck> ack(std::uint64_t seq) const;
    /// Waits until the command is no longer pending or the timeout expires.
    CommandAck wait_ack(std::uint64_t seq, std::chrono::milliseconds timeout) const;

    /// Run metadata: protocol, tick, state, tunables with ranges and values.
    nlohmann::json meta() const;
    bool run_finished() const;
    bool paused() const;
    Tick tick() const;

    /// Releases a paused loop and makes the run stop at the next boundary.
    void shutdown();

    bool at_boundary(Simulation& sim) override;
    void after_tick(const Simulation& sim, const TickReport& report) override;
    void finished(const Simulation& sim) override;

private:
    struct Session {
        std::string token;
        bool controller = false;
        std::int64_t every = 1;
        std::size_t capacity = 64;
        std::shared_ptr<BoundedQueue<LiveFrame>> frames;  // null while unsubscribed
        std::vector<std::int64_t> window_deaths;
        std::int64_t window_attacks = 0;
    };
    struct Pending {
        std::uint64_t seq;
        ControlCommand cmd;
    };

    void apply(Simulation& sim, const Pending& p);
    void record(CommandAck ack);
    void publish_state(const Simulation& sim);
    std::shared_ptr<Session> find(const std::string& token) const;

    Options options_;
    mutable std::mutex mutex_;
    mutable std::condition_variable commands_cv_;
    mutable std::condition_variable acks_cv_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::deque<Pending> commands_;
    std::map<std::uint64_t, CommandAck> acks_;
    std::uint64_t next_seq_ = 1;
    bool paused_ = false;
    std::int64_t step_budget_ = -1;  // ticks left in a StepN, -1 when not stepping
    bool stop_ = false;
    bool finished_ = false;
    Tick tick_ = 0;
    nlohmann::json config_json_;
    std::vector<std::pair<std::string, double>> params_;
};

/// HTTP front end for a SteeringController. Endpoints are documented in
/// docs/steering-protocol.md.
class SteeringServer {
public:
    SteeringServer(SteeringController& controller, std::string host = "127.0.0.1", int port = 0);
    ~SteeringServer();
    SteeringServer(const SteeringServer&) = delete;
    SteeringServer& operator=(const SteeringServer&) = delete;

    /// Bound port (useful when constructed with port 0).
    int port() const { return port_; }
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

} // namespace raresim
