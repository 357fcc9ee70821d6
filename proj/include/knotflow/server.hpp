#pragma once

#include "knotflow/flow.hpp"
#include "knotflow/io.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace knotflow {

class UnknownSession : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Fan-out reader of one session's frame stream.
class Subscription {
public:
    // Waits up to `timeout` for the next frame; nullopt on timeout or when closed.
    std::optional<json> next(std::chrono::milliseconds timeout);
    bool closed() const;

private:
    friend class Session;
    void push(const json &frame);
    void close();

    mutable std::mutex m_mutex;
    std::condition_variable m_cv;
    std::deque<json> m_frames;
    bool m_closed = false;
};

struct SessionOptions {
    // Minimal spacing of frames while running; 0 emits every step.
    std::chrono::milliseconds frame_interval{0};
    std::size_t subscriber_backlog = 1024;
};

// One live flow. A private thread owns the state; control actions are queued
// and drained at step boundaries, so every frame comes from a completed step.
class Session {
public:
    Session(std::string id, HermiteCurve curve, const RunConfig &config, SessionOptions options);
    ~Session();
    Session(const Session &) = delete;
    Session &operator=(const Session &) = delete;

    const std::string &id() const { return m_id; }

    // Validates and enqueues; throws ConfigError without side effects.
    json control(const json &action);
    std::shared_ptr<Subscription> subscribe();
    json snapshot() const;
    json status() const;
    // Blocks until the queue is drained and no requested steps remain, or the
    // timeout passes. Returns true when idle.
    bool wait_idle(std::chrono::milliseconds timeout);

private:
    struct Action {
        std::string kind;
        long n = 0;
        double amplitude = 0.0;
        FlowParams params;
    };

    void loop();
    void apply(const Action &action);
    void publish(const DiagnosticsRecord &record, bool force);
    json make_frame(const DiagnosticsRecord &record) const;
    DiagnosticsRecord current_record() const;

    std::string m_id;
    SessionOptions m_options;
    RunConfig m_config;
    HermiteCurve m_initial_curve;

    // Guarded by m_mutex.
    mutable std::mutex m_mutex;
    std::condition_variable m_cv;
    std::condition_variable m_idle_cv;
    std::deque<Action> m_queue;
    FlowParams m_accepted_params; // params after all queued actions
    bool m_running = false;
    bool m_busy = false;
    long m_pending_steps = 0;
    bool m_stop = false;
    std::string m_error;
    json m_last_frame;
    json m_last_snapshot;
    std::vector<std::weak_ptr<Subscription>> m_subscribers;
    long m_seq = 0;

    // Owned by the loop thread.
    std::unique_ptr<Stepper> m_stepper;
    FlowState m_state;
    long m_epoch = 0;
    std::chrono::steady_clock::time_point m_last_publish{};

    std::thread m_thread;
};

class SessionManager {
public:
    explicit SessionManager(SessionOptions options = {}) : m_options(options) {}

    // Request: a run-config object ("source", "kappa", "rho", "tau" or
    // "tau_rule", "q", "metric", "perturb", "seed", ...). Throws ConfigError.
    std::string create(const json &request);
    std::shared_ptr<Session> get(const std::string &id) const;
    json control(const std::string &id, const json &action) { return get(id)->control(action); }
    std::shared_ptr<Subscription> subscribe(const std::string &id) { return get(id)->subscribe(); }
    json snapshot(const std::string &id) const { return get(id)->snapshot(); }
    void close_all();

private:
    SessionOptions m_options;
    mutable std::mutex m_mutex;
    std::map<std::string, std::shared_ptr<Session>> m_sessions;
    long m_next_id = 1;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    SessionOptions session;
};

// HTTP front end: POST /sessions, POST /sessions/{id}/control,
// GET /sessions/{id}/stream (server-sent events), GET /sessions/{id}/snapshot.
class HttpServer {
public:
    explicit HttpServer(ServerConfig config);
    ~HttpServer();

    // Binds and serves on a background thread; returns the bound port.
    int start();
    // Serves on the calling thread until stop().
    void serve();
    void stop();
    SessionManager &sessions() { return m_sessions; }

private:
    void bind();

    ServerConfig m_config;
    SessionManager m_sessions;
    std::unique_ptr<httplib::Server> m_server;
    std::thread m_thread;
    int m_port = 0;
};

} // namespace knotflow
