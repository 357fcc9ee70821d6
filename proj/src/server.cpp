#include "knotflow/server.hpp"

#include "knotflow/errors.hpp"

#include <httplib.h>

#include <fmt/core.h>

#include <algorithm>
#include <cmath>

namespace knotflow {

using namespace std::chrono_literals;

std::optional<json> Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(m_mutex);
    m_cv.wait_for(lock, timeout, [&] { return !m_frames.empty() || m_closed; });
    if (m_frames.empty()) return std::nullopt;
    json frame = std::move(m_frames.front());
    m_frames.pop_front();
    return frame;
}

bool Subscription::closed() const {
    std::lock_guard lock(m_mutex);
    return m_closed && m_frames.empty();
}

void Subscription::push(const json &frame) {
    {
        std::lock_guard lock(m_mutex);
        m_frames.push_back(frame);
    }
    m_cv.notify_all();
}

void Subscription::close() {
    {
        std::lock_guard lock(m_mutex);
        m_closed = true;
    }
    m_cv.notify_all();
}

namespace {

FlowParams merge_params(FlowParams params, const json &patch) {
    try {
        if (!patch.is_object()) throw ConfigError("set_params: expected an object");
        for (const auto &item : patch.items()) {
            const std::string &key = item.key();
            const json &v = item.value();
            if (key == "kappa") params.kappa = v.get<double>();
            else if (key == "rho") params.rho = v.get<double>();
            else if (key == "tau") params.tau = v.get<double>();
            else if (key == "q") params.tp.q = v.get<double>();
            else if (key == "epsilon") params.tp.epsilon = v.get<double>();
            else if (key == "gauss_order") params.tp.gauss_order = v.get<int>();
            else if (key == "metric") params.metric = Metric::parse(v.get<std::string>(), params.metric.r);
            else if (key == "metric_r") params.metric.r = v.get<double>();
            else if (key == "perturb") {
                if (v.is_null()) {
                    params.perturb.reset();
                } else {
                    PerturbSchedule s = params.perturb.value_or(PerturbSchedule{});
                    if (v.contains("period")) s.period = v["period"].get<long>();
                    if (v.contains("amplitude")) s.amplitude = v["amplitude"].get<double>();
                    params.perturb = s;
                }
            } else {
                throw ConfigError("set_params: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("set_params: ") + e.what());
    }
    params.validate();
    return params;
}

json record_json(const DiagnosticsRecord &r) {
    json j{{"step", r.step},
           {"e_total", r.e_total},
           {"e_bend", r.e_bend},
           {"e_tp_weighted", r.e_tp_weighted},
           {"length", r.length},
           {"arclength_dev", r.arclength_dev},
           {"min_pair_dist", r.min_pair_dist},
           {"stable", r.stable},
           {"isotopy_ok", r.isotopy_ok}};
    if (std::isfinite(r.bilipschitz)) j["bilipschitz"] = r.bilipschitz;
    return j;
}

} // namespace

Session::Session(std::string id, HermiteCurve curve, const RunConfig &config, SessionOptions options)
    : m_id(std::move(id)), m_options(options), m_config(config), m_initial_curve(std::move(curve)) {
    const FlowParams params = resolve_params(m_config, m_initial_curve.partition);
    m_stepper = std::make_unique<Stepper>(m_initial_curve.partition, params);
    m_state = m_stepper->initial_state(m_initial_curve, m_config.seed);
    m_accepted_params = params;
    m_last_frame = make_frame(current_record());
    m_last_snapshot = snapshot_to_json(m_state.curve, 0);
    m_last_snapshot["epoch"] = 0;
    m_thread = std::thread([this] { loop(); });
}

Session::~Session() {
    {
        std::lock_guard lock(m_mutex);
        m_stop = true;
        for (auto &w : m_subscribers)
            if (auto s = w.lock()) s->close();
    }
    m_cv.notify_all();
    if (m_thread.joinable()) m_thread.join();
}

json Session::control(const json &action) {
    Action a;
    try {
        if (!action.is_object() || !action.contains("action")) throw ConfigError("control: 'action' is required");
        a.kind = action["action"].get<std::string>();
        if (a.kind == "step" || a.kind == "step_n") {
            a.kind = "step";
            a.n = action.value("n", 1L);
            if (a.n < 1) throw ConfigError("control: step count must be >= 1");
        } else if (a.kind == "perturb") {
            a.amplitude = action.value("amplitude", 1e-3);
            if (!(a.amplitude >= 0.0) || !std::isfinite(a.amplitude))
                throw ConfigError("control: amplitude must be >= 0");
        } else if (a.kind != "start" && a.kind != "pause" && a.kind != "reset" && a.kind != "set_params") {
            throw ConfigError("control: unknown action '" + a.kind + "'");
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("control: ") + e.what());
    }
    long seq;
    {
        std::lock_guard lock(m_mutex);
        if (a.kind == "set_params") {
            a.params = merge_params(m_accepted_params, action.contains("params") ? action["params"] : json::object());
            m_accepted_params = a.params;
        }
        m_queue.push_back(a);
        seq = ++m_seq;
    }
    m_cv.notify_all();
    return {{"v", 1}, {"ok", true}, {"action", a.kind}, {"seq", seq}};
}

std::shared_ptr<Subscription> Session::subscribe() {
    auto sub = std::make_shared<Subscription>();
    std::lock_guard lock(m_mutex);
    sub->push(m_last_frame);
    if (m_stop) sub->close();
    m_subscribers.push_back(sub);
    return sub;
}

json Session::snapshot() const {
    std::lock_guard lock(m_mutex);
    return m_last_snapshot;
}

json Session::status() const {
    std::lock_guard lock(m_mutex);
    return {{"v", 1},
            {"id", m_id},
            {"running", m_running},
            {"pending_steps", m_pending_steps},
            {"step", m_last_frame.value("step", 0L)},
            {"epoch", m_last_frame.value("epoch", 0L)},
            {"error", m_error}};
}

bool Session::wait_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lock(m_mutex);
    return m_idle_cv.wait_for(lock, timeout, [&] {
        return m_queue.empty() && !m_busy && m_pending_steps == 0 && (!m_running || !m_error.empty());
    });
}

DiagnosticsRecord Session::current_record() const {
    return make_record(m_state, m_stepper->energy(m_state.curve), true, true);
}

json Session::make_frame(const DiagnosticsRecord &record) const {
    const auto &curve = m_state.curve;
    std::vector<double> flat;
    flat.reserve(3 * curve.size());
    for (const Vec3 &p : curve.positions) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
    const FlowParams &p = m_stepper->params();
    json frame{{"v", 1},
               {"type", "frame"},
               {"session", m_id},
               {"epoch", m_epoch},
               {"step", m_state.step_index},
               {"positions", std::move(flat)},
               {"curvature", nodal_curvature(curve)},
               {"diagnostics", record_json(record)},
               {"params", {{"kappa", p.kappa}, {"rho", p.rho}, {"tau", p.tau}, {"q", p.tp.q}}}};
    return frame;
}

void Session::publish(const DiagnosticsRecord &record, bool force) {
    json snap = snapshot_to_json(m_state.curve, m_state.step_index);
    snap["epoch"] = m_epoch;
    {
        std::lock_guard lock(m_mutex);
        m_last_snapshot = std::move(snap);
    }
    const auto now = std::chrono::steady_clock::now();
    if (!force && m_options.frame_interval.count() > 0 && now - m_last_publish < m_options.frame_interval) return;
    m_last_publish = now;
    json frame = make_frame(record);
    std::lock_guard lock(m_mutex);
    m_last_frame = frame;
    std::vector<std::weak_ptr<Subscription>> alive;
    for (auto &w : m_subscribers) {
        if (auto s = w.lock()) {
            {
                std::lock_guard sl(s->m_mutex);
                while (s->m_frames.size() >= m_options.subscriber_backlog) s->m_frames.pop_front();
            }
            s->push(frame);
            alive.push_back(w);
        }
    }
    m_subscribers = std::move(alive);
}

void Session::apply(const Action &a) {
    if (a.kind == "start") {
        std::lock_guard lock(m_mutex);
        m_running = true;
    } else if (a.kind == "pause") {
        std::lock_guard lock(m_mutex);
        m_running = false;
        m_pending_steps = 0;
    } else if (a.kind == "step") {
        std::lock_guard lock(m_mutex);
        if (m_error.empty()) m_pending_steps += a.n;
    } else if (a.kind == "perturb") {
        HermiteCurve moved = perturb(m_state.curve, a.amplitude, m_state.rng);
        const bool isotopy = isotopy_monitor(m_state.curve, moved);
        m_state.curve = std::move(moved);
        const EnergyParts e = m_stepper->energy(m_state.curve);
        m_state.prev_energy = e.total();
        publish(make_record(m_state, e, true, isotopy), true);
    } else if (a.kind == "set_params") {
        m_stepper->set_params(a.params);
        m_state.prev_energy = m_stepper->energy(m_state.curve).total();
    } else if (a.kind == "reset") {
        m_state = m_stepper->initial_state(m_initial_curve, m_config.seed);
        ++m_epoch;
        {
            std::lock_guard lock(m_mutex);
            m_running = false;
            m_pending_steps = 0;
            m_error.clear();
        }
        publish(current_record(), true);
    }
}

void Session::loop() {
    for (;;) {
        std::optional<Action> action;
        bool last_of_batch = false;
        {
            std::unique_lock lock(m_mutex);
            m_cv.wait(lock, [&] {
                return m_stop || !m_queue.empty() || (m_error.empty() && (m_running || m_pending_steps > 0));
            });
            if (m_stop) return;
            m_busy = true;
            // Requested steps finish before later actions, unless those cancel them.
            const bool cancel = std::any_of(m_queue.begin(), m_queue.end(),
                                            [](const Action &q) { return q.kind == "pause" || q.kind == "reset"; });
            if (!m_queue.empty() && (m_pending_steps == 0 || cancel)) {
                action = m_queue.front();
                m_queue.pop_front();
            } else if (m_pending_steps > 0) {
                --m_pending_steps;
                last_of_batch = m_pending_steps == 0 && !m_running;
            }
        }
        if (action) {
            try {
                apply(*action);
            } catch (const std::exception &e) {
                std::lock_guard lock(m_mutex);
                m_error = e.what();
                m_running = false;
                m_pending_steps = 0;
            }
        } else {
            try {
                const DiagnosticsRecord rec = advance_recorded(*m_stepper, m_state);
                bool paused_now;
                {
                    std::lock_guard lock(m_mutex);
                    paused_now = !m_running && m_pending_steps == 0;
                }
                publish(rec, last_of_batch || paused_now);
            } catch (const std::exception &e) {
                const std::string msg = fmt::format("step {}: {}", m_state.step_index + 1, e.what());
                json frame{{"v", 1}, {"type", "error"}, {"session", m_id}, {"epoch", m_epoch},
                           {"step", m_state.step_index + 1}, {"message", msg}};
                std::lock_guard lock(m_mutex);
                m_error = msg;
                m_running = false;
                m_pending_steps = 0;
                for (auto &w : m_subscribers)
                    if (auto s = w.lock()) s->push(frame);
            }
        }
        {
            std::lock_guard lock(m_mutex);
            m_busy = false;
        }
        m_idle_cv.notify_all();
    }
}

std::string SessionManager::create(const json &request) {
    const RunConfig config = parse_run_config(request);
    HermiteCurve curve;
    std::string id;
    try {
        curve = load_source(config.source, config.seed);
    } catch (const NonEmbedded &e) {
        throw ConfigError(e.what());
    } catch (const DegenerateCurve &e) {
        throw ConfigError(e.what());
    }
    {
        std::lock_guard lock(m_mutex);
        id = fmt::format("s{}", m_next_id++);
    }
    std::shared_ptr<Session> session;
    try {
        session = std::make_shared<Session>(id, std::move(curve), config, m_options);
    } catch (const NonEmbedded &e) {
        throw ConfigError(e.what());
    }
    std::lock_guard lock(m_mutex);
    m_sessions[id] = session;
    return id;
}

std::shared_ptr<Session> SessionManager::get(const std::string &id) const {
    std::lock_guard lock(m_mutex);
    auto it = m_sessions.find(id);
    if (it == m_sessions.end()) throw UnknownSession("unknown session '" + id + "'");
    return it->second;
}

void SessionManager::close_all() {
    std::map<std::string, std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(m_mutex);
        sessions.swap(m_sessions);
    }
    sessions.clear();
}

namespace {

void send_json(httplib::Response &res, int status, const json &body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &message) {
    send_json(res, status, {{"v", 1}, {"ok", false}, {"error", message}});
}

template <class F> void guarded(httplib::Response &res, F &&f) {
    try {
        f();
    } catch (const UnknownSession &e) {
        send_error(res, 404, e.what());
    } catch (const ConfigError &e) {
        send_error(res, 400, e.what());
    } catch (const UnknownPreset &e) {
        send_error(res, 400, e.what());
    } catch (const json::exception &e) {
        send_error(res, 400, e.what());
    } catch (const std::exception &e) {
        send_error(res, 500, e.what());
    }
}

} // namespace

HttpServer::HttpServer(ServerConfig config)
    : m_config(std::move(config)), m_sessions(m_config.session), m_server(std::make_unique<httplib::Server>()) {
    auto &srv = *m_server;
    srv.Post("/sessions", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            const std::string id = m_sessions.create(json::parse(req.body));
            send_json(res, 201, {{"v", 1}, {"ok", true}, {"id", id}});
        });
    });
    srv.Post(R"(/sessions/([A-Za-z0-9_]+)/control)", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] { send_json(res, 200, m_sessions.control(req.matches[1], json::parse(req.body))); });
    });
    srv.Get(R"(/sessions/([A-Za-z0-9_]+)/snapshot)", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] { send_json(res, 200, m_sessions.snapshot(req.matches[1])); });
    });
    srv.Get(R"(/sessions/([A-Za-z0-9_]+))", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] { send_json(res, 200, m_sessions.get(req.matches[1])->status()); });
    });
    srv.Get(R"(/sessions/([A-Za-z0-9_]+)/stream)", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            auto sub = m_sessions.subscribe(req.matches[1]);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [sub](std::size_t, httplib::DataSink &sink) {
                if (auto frame = sub->next(500ms)) {
                    const std::string msg = "data: " + frame->dump() + "\n\n";
                    return sink.write(msg.data(), msg.size());
                }
                if (sub->closed()) {
                    sink.done();
                    return true;
                }
                static const std::string keepalive = ": keepalive\n\n";
                return sink.write(keepalive.data(), keepalive.size());
            });
        });
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind() {
    if (m_config.port == 0) {
        m_port = m_server->bind_to_any_port(m_config.host);
    } else {
        if (!m_server->bind_to_port(m_config.host, m_config.port))
            throw std::runtime_error(fmt::format("cannot bind {}:{}", m_config.host, m_config.port));
        m_port = m_config.port;
    }
    if (m_port <= 0) throw std::runtime_error("cannot bind " + m_config.host);
}

int HttpServer::start() {
    bind();
    m_thread = std::thread([this] { m_server->listen_after_bind(); });
    m_server->wait_until_ready();
    return m_port;
}

void HttpServer::serve() {
    bind();
    m_server->listen_after_bind();
}

void HttpServer::stop() {
    m_sessions.close_all();
    if (m_server) m_server->stop();
    if (m_thread.joinable()) m_thread.join();
}

} // namespace knotflow
