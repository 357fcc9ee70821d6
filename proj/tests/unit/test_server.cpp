#include "knotflow/errors.hpp"
#include "knotflow/server.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cmath>

using namespace knotflow;
using namespace std::chrono_literals;

namespace {

json request(std::uint64_t seed = 3) {
    return {{"source", {{"preset", "five_two"}, {"nodes", 50}}},
            {"kappa", 1.0},
            {"rho", 0.1},
            {"tau_rule", "h"},
            {"seed", seed}};
}

std::vector<json> drain(Subscription &sub, std::size_t expected) {
    std::vector<json> out;
    while (out.size() < expected) {
        auto f = sub.next(20s);
        if (!f) break;
        out.push_back(*f);
    }
    return out;
}

} // namespace

TEST_SUITE("server") {

TEST_CASE("a paused session emits exactly its current frame") {
    SessionManager mgr;
    const auto id = mgr.create(request());
    auto sub = mgr.subscribe(id);
    auto first = sub->next(1s);
    REQUIRE(first);
    CHECK((*first)["v"] == 1);
    CHECK((*first)["type"] == "frame");
    CHECK((*first)["step"] == 0);
    CHECK((*first)["positions"].size() == 150);
    CHECK((*first)["curvature"].size() == 50);
    CHECK((*first)["diagnostics"].contains("e_total"));
    CHECK_FALSE(sub->next(300ms));
}

TEST_CASE("steps, perturbations and parameter changes take effect in order") {
    SessionManager mgr;
    const auto id = mgr.create(request());
    auto sub = mgr.subscribe(id);
    drain(*sub, 1);

    mgr.control(id, {{"action", "step_n"}, {"n", 3}});
    REQUIRE(mgr.get(id)->wait_idle(30s));
    auto frames = drain(*sub, 3);
    REQUIRE(frames.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(frames[k]["step"] == k + 1);

    mgr.control(id, {{"action", "perturb"}, {"amplitude", 0.0}});
    REQUIRE(mgr.get(id)->wait_idle(30s));
    auto same = drain(*sub, 1);
    REQUIRE(same.size() == 1);
    CHECK(same[0]["positions"] == frames[2]["positions"]);
    CHECK(same[0]["step"] == 3);

    const double tp_before = frames[2]["diagnostics"]["e_tp_weighted"].get<double>();
    mgr.control(id, {{"action", "set_params"}, {"params", {{"rho", 1e-3}}}});
    mgr.control(id, {{"action", "step"}});
    REQUIRE(mgr.get(id)->wait_idle(30s));
    auto after = drain(*sub, 1);
    REQUIRE(after.size() == 1);
    CHECK(after[0]["params"]["rho"] == 1e-3);
    CHECK(after[0]["diagnostics"]["e_tp_weighted"].get<double>() / tp_before == doctest::Approx(1e-2).epsilon(0.05));

    const json snap = mgr.snapshot(id);
    CHECK(snap["step"] == 4);
    CHECK(snapshot_from_json(snap).size() == 50);
}

TEST_CASE("invalid controls are rejected without side effects") {
    SessionManager mgr;
    const auto id = mgr.create(request());
    CHECK_THROWS_AS(mgr.control(id, {{"action", "set_params"}, {"params", {{"tau", -1.0}}}}), ConfigError);
    CHECK_THROWS_AS(mgr.control(id, {{"action", "set_params"}, {"params", {{"colour", 1}}}}), ConfigError);
    CHECK_THROWS_AS(mgr.control(id, {{"action", "fly"}}), ConfigError);
    CHECK_THROWS_AS(mgr.control(id, {{"action", "step"}, {"n", 0}}), ConfigError);
    CHECK_THROWS_AS(mgr.control(id, {{"action", "perturb"}, {"amplitude", -1.0}}), ConfigError);
    CHECK_THROWS_AS(mgr.control("nope", {{"action", "start"}}), UnknownSession);
    CHECK_THROWS_AS(mgr.create({{"source", {{"preset", "granny"}}}}), UnknownPreset);

    auto sub = mgr.subscribe(id);
    const json before = *sub->next(1s);
    mgr.control(id, {{"action", "step"}});
    REQUIRE(mgr.get(id)->wait_idle(30s));
    const json after = *sub->next(1s);
    CHECK(after["params"] == before["params"]);
}

TEST_CASE("start, pause and reset") {
    SessionManager mgr;
    const auto id = mgr.create(request());
    auto session = mgr.get(id);
    mgr.control(id, {{"action", "start"}});
    std::this_thread::sleep_for(200ms);
    mgr.control(id, {{"action", "pause"}});
    REQUIRE(session->wait_idle(30s));
    const long reached = session->status()["step"].get<long>();
    CHECK(reached > 0);
    std::this_thread::sleep_for(100ms);
    CHECK(session->status()["step"].get<long>() == reached);

    auto sub = mgr.subscribe(id);
    drain(*sub, 1);
    mgr.control(id, {{"action", "reset"}});
    REQUIRE(session->wait_idle(30s));
    auto frames = drain(*sub, 1);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0]["step"] == 0);
    CHECK(frames[0]["epoch"] == 1);
}

TEST_CASE("the frame stream is deterministic for a fixed script") {
    auto script = [](SessionManager &mgr) {
        const auto id = mgr.create(request(11));
        auto sub = mgr.subscribe(id);
        mgr.control(id, {{"action", "step"}, {"n", 2}});
        mgr.control(id, {{"action", "perturb"}, {"amplitude", 1e-3}});
        mgr.control(id, {{"action", "step"}, {"n", 2}});
        mgr.get(id)->wait_idle(30s);
        return drain(*sub, 6);
    };
    // Initial frame, two steps, the perturbation, two more steps.
    SessionManager a, b;
    const auto fa = script(a), fb = script(b);
    REQUIRE(fa.size() == 6);
    REQUIRE(fb.size() == 6);
    for (std::size_t k = 0; k < fa.size(); ++k) {
        CHECK(fa[k]["step"] == fb[k]["step"]);
        CHECK(fa[k]["positions"] == fb[k]["positions"]);
        CHECK(fa[k]["diagnostics"] == fb[k]["diagnostics"]);
    }
}

TEST_CASE("HTTP endpoints") {
    ServerConfig config;
    config.port = 0;
    HttpServer server(config);
    const int port = server.start();
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);

    auto created = client.Post("/sessions", request().dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = json::parse(created->body)["id"];

    auto bad = client.Post("/sessions", R"({"source":{"preset":"granny"}})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto missing = client.Post("/sessions/zz/control", R"({"action":"start"})", "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto bad_control = client.Post("/sessions/" + id + "/control", R"({"action":"fly"})", "application/json");
    REQUIRE(bad_control);
    CHECK(bad_control->status == 400);

    auto ack = client.Post("/sessions/" + id + "/control", R"({"action":"step","n":2})", "application/json");
    REQUIRE(ack);
    CHECK(ack->status == 200);
    CHECK(json::parse(ack->body)["ok"] == true);
    REQUIRE(server.sessions().get(id)->wait_idle(30s));

    auto snap = client.Get("/sessions/" + id + "/snapshot");
    REQUIRE(snap);
    CHECK(snap->status == 200);
    CHECK(json::parse(snap->body)["step"] == 2);
    auto status = client.Get("/sessions/" + id);
    REQUIRE(status);
    CHECK(json::parse(status->body)["step"] == 2);

    std::string received;
    httplib::Client streamer("127.0.0.1", port);
    streamer.Get("/sessions/" + id + "/stream", [&](const char *data, std::size_t len) {
        received.append(data, len);
        return received.find("\n\n") == std::string::npos;
    });
    REQUIRE(received.rfind("data: ", 0) == 0);
    const json frame = json::parse(received.substr(6, received.find("\n\n") - 6));
    CHECK(frame["step"] == 2);
    CHECK(frame["session"] == id);
    server.stop();
}

}
