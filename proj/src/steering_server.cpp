#include <httplib.h>

#include "raresim/error.hpp"
#include "raresim/steering.hpp"

namespace raresim {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"version", kSteerVersion}, {"error", {{"code", code}, {"message", message}}}});
}

int status_for(SessionError::Code code) {
    switch (code) {
        case SessionError::Code::UnknownSession: return 404;
        case SessionError::Code::ControllerTaken: return 409;
        case SessionError::Code::NotController: return 403;
        case SessionError::Code::RunFinished: return 410;
        case SessionError::Code::AlreadySubscribed: return 409;
    }
    return 400;
}

std::string_view name_for(SessionError::Code code) {
    switch (code) {
        case SessionError::Code::UnknownSession: return "unknown_session";
        case SessionError::Code::ControllerTaken: return "controller_taken";
        case SessionError::Code::NotController: return "not_controller";
        case SessionError::Code::RunFinished: return "run_finished";
        case SessionError::Code::AlreadySubscribed: return "already_subscribed";
    }
    return "error";
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("body", "request body must be a JSON object");
    return j;
}

std::string token_of(const httplib::Request& req, const json& body) {
    if (body.contains("token") && body.at("token").is_string()) return body.at("token").get<std::string>();
    if (req.has_param("token")) return req.get_param_value("token");
    if (req.has_header("X-Session-Token")) return req.get_header_value("X-Session-Token");
    throw ValidationError("token", "missing session token");
}

/// Wraps a handler so protocol errors turn into JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const SessionError& e) {
            send_error(res, status_for(e.code()), name_for(e.code()), e.what());
        } catch (const ValidationError& e) {
            send_error(res, 400, "invalid_request", e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "invalid_request", e.what());
        }
    };
}

} // namespace

struct SteeringServer::Impl {
    SteeringController& controller;
    httplib::Server server;
    std::thread thread;

    explicit Impl(SteeringController& c) : controller(c) {}
};

SteeringServer::SteeringServer(SteeringController& controller, std::string host, int port)
    : impl_(std::make_unique<Impl>(controller)) {
    auto& svr = impl_->server;
    SteeringController* ctrl = &controller;

    svr.Get("/v1/meta", guarded([ctrl](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, ctrl->meta());
            }));

    svr.Post("/v1/attach", guarded([ctrl](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 const std::string role = body.value("role", std::string("observer"));
                 if (role != "controller" && role != "observer")
                     throw ValidationError("role", "must be 'controller' or 'observer'");
                 const auto every = body.value("every", std::int64_t{1});
                 const auto capacity = body.value("capacity", std::int64_t{64});
                 if (capacity < 1) throw ValidationError("capacity", "must be >= 1");
                 const std::string token =
                     ctrl->attach(role == "controller", every, static_cast<std::size_t>(capacity), false);
                 send_json(res, 200,
                           {{"version", kSteerVersion}, {"token", token}, {"role", role}, {"every", every},
                            {"capacity", capacity}});
             }));

    svr.Post("/v1/detach", guarded([ctrl](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 ctrl->detach(token_of(req, body));
                 send_json(res, 200, {{"version", kSteerVersion}, {"detached", true}});
             }));

    svr.Post("/v1/command", guarded([ctrl](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 const std::string token = token_of(req, body);
                 if (!body.contains("command")) throw ValidationError("command", "missing command object");
                 const ControlCommand cmd = parse_command(body.at("command"));
                 const auto wait_ms = body.value("wait_ms", std::int64_t{2000});
                 CommandAck ack = ctrl->submit(token, cmd);
                 if (ack.status == AckStatus::Pending && wait_ms > 0)
                     ack = ctrl->wait_ack(ack.seq, std::chrono::milliseconds(wait_ms));
                 const int status = ack.status == AckStatus::Applied ? 200 : ack.status == AckStatus::Pending ? 202 : 422;
                 send_json(res, status, to_json(ack));
             }));

    svr.Get(R"(/v1/commands/(\d+))", guarded([ctrl](const httplib::Request& req, httplib::Response& res) {
                const auto seq = std::stoull(req.matches[1].str());
                const auto ack = ctrl->ack(seq);
                if (!ack) {
                    send_error(res, 404, "unknown_command", "no command with this sequence number");
                    return;
                }
                send_json(res, 200, to_json(*ack));
            }));

    svr.Get("/v1/frames", guarded([ctrl](const httplib::Request& req, httplib::Response& res) {
                const std::string token = token_of(req, json::object());
                ctrl->subscribe(token);
                res.set_chunked_content_provider(
                    "application/x-ndjson",
                    [ctrl, token](std::size_t, httplib::DataSink& sink) {
                        LiveFrame frame;
                        switch (ctrl->next_frame(token, std::chrono::milliseconds(200), frame)) {
                            case SteeringController::FrameWait::Frame: {
                                const std::string line = to_json(frame).dump() + "\n";
                                return sink.write(line.data(), line.size());
                            }
                            case SteeringController::FrameWait::Timeout:
                                return true;
                            case SteeringController::FrameWait::Closed:
                                sink.done();
                                return true;
                        }
                        return false;
                    },
                    [ctrl, token](bool) { ctrl->unsubscribe(token); });
            }));

    port_ = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw ValidationError("port", "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    svr.wait_until_ready();
}

void SteeringServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

SteeringServer::~SteeringServer() { stop(); }

} // namespace raresim
