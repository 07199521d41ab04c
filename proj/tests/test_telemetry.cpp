#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include "uchain/telemetry.hpp"

using namespace uchain;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

ScenarioConfig piloted(bool manual_launch = false) {
    ScenarioConfig c;
    c.name = "live";
    c.env = std::make_shared<const Environment>(builtin_environment("straight"));
    c.relays = 2;
    c.layout = StartLayout::Exploration;
    c.head_start = 1.0;
    c.head = {true, 0.2, 0.0};
    c.manual_launch = manual_launch;
    c.horizon = 600.0;
    c.seed = 9;
    return c;
}

class Client {
public:
    explicit Client(unsigned short port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/ws");
    }

    Message read() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return decode(beast::buffers_to_string(buffer.data()));
    }

    Snapshot next_snapshot() {
        for (;;) {
            auto m = read();
            if (auto* s = std::get_if<Snapshot>(&m)) return std::move(*s);
        }
    }

    ErrorFrame next_error() {
        for (;;) {
            auto m = read();
            if (auto* e = std::get_if<ErrorFrame>(&m)) return std::move(*e);
        }
    }

    void send(const std::string& text) {
        ws_.text(true);
        ws_.write(net::buffer(text));
    }

    void send(const Command& c) { send(encode(c)); }

    /// Drops the TCP connection without a close handshake.
    void sever() {
        beast::error_code ec;
        ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
        ws_.next_layer().close(ec);
    }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

double head_velocity(const Snapshot& s) { return s.agents.front().velocity; }

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = std::chrono::milliseconds(5000)) {
    const auto until = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < until) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return pred();
}

}  // namespace

TEST_CASE("bridge keeps the latest command per tick") {
    Simulation sim(piloted());
    PilotBridge bridge(false);
    CHECK_FALSE(bridge.submit({PilotAction::Forward, "a", 0}).has_value());
    CHECK_FALSE(bridge.submit({PilotAction::Backward, "a", 0}).has_value());
    bridge.apply(sim);
    CHECK(sim.pilot_velocity() == doctest::Approx(-0.2));
    bridge.apply(sim);  // nothing pending
    CHECK(sim.pilot_velocity() == doctest::Approx(-0.2));
    bridge.client_lost();
    bridge.apply(sim);
    CHECK(sim.pilot_velocity() == 0.0);

    const auto err = bridge.submit({PilotAction::LaunchOverride, "a", 0});
    REQUIRE(err.has_value());
    CHECK(err->code == "rejected");

    PilotBridge manual(true);
    CHECK_FALSE(manual.submit({PilotAction::LaunchOverride, "a", 0}).has_value());
}

TEST_CASE("served session: hello, snapshots, piloting and the dead-man stop") {
    Simulation sim(piloted());
    TelemetryServer server(sim, {0, 10.0, 8.0});
    server.start();
    REQUIRE(server.port() != 0);

    Client client(server.port());
    const auto first = client.read();
    REQUIRE(std::holds_alternative<Hello>(first));
    const auto& hello = std::get<Hello>(first);
    CHECK(hello.agents == 4);
    CHECK(hello.pilot_speed == doctest::Approx(0.2));
    CHECK(hello.environment.name == "straight");

    // idle pilot: the head does not move on its own
    auto s = client.next_snapshot();
    for (int i = 0; i < 6; ++i) {
        const auto next = client.next_snapshot();
        CHECK(std::pair(next.tick, next.substep) > std::pair(s.tick, s.substep));
        CHECK(head_velocity(next) == 0.0);
        s = next;
    }

    client.send(Command{PilotAction::Forward, "test", 0.0});
    const auto sent_at = s.tick;
    bool moving = false;
    for (int i = 0; i < 12 && !moving; ++i) {
        const auto next = client.next_snapshot();
        CHECK(std::pair(next.tick, next.substep) > std::pair(s.tick, s.substep));
        s = next;
        if (head_velocity(s) == doctest::Approx(0.2)) moving = true;
    }
    CHECK(moving);
    // latency in decision ticks, counted from the last snapshot seen before sending
    CHECK(s.tick - sent_at <= 2);

    client.send("{this is not json");
    CHECK(client.next_error().code == "decode");
    client.send(R"({"type": "command", "v": 7, "action": "stop"})");
    CHECK(client.next_error().code == "version");
    client.send(Command{PilotAction::LaunchOverride, "test", 0.0});
    CHECK(client.next_error().code == "rejected");
    // still connected after errors
    const auto after = client.next_snapshot();
    CHECK(after.tick >= s.tick);
    CHECK(head_velocity(after) == doctest::Approx(0.2));

    client.sever();
    CHECK(eventually([&] { return server.clients() == 0; }));
    CHECK(eventually([&] {
        Client probe(server.port());
        (void)probe.read();
        Snapshot last = probe.next_snapshot();
        for (int i = 0; i < 4; ++i) last = probe.next_snapshot();
        return head_velocity(last) == 0.0 && last.pilot_velocity == 0.0;
    }));
    server.stop();
    CHECK(server.clients() == 0);
}

TEST_CASE("served session: manual launch over the wire") {
    Simulation sim(piloted(true));
    TelemetryServer server(sim, {0, 10.0, 8.0});
    server.start();
    Client client(server.port());
    (void)client.read();
    auto s = client.next_snapshot();
    const auto airborne = [](const Snapshot& snap) {
        int n = 0;
        for (const auto& a : snap.agents) n += (a.mode == AgentMode::TakingOff || a.mode == AgentMode::Relaying) ? 1 : 0;
        return n;
    };
    CHECK(airborne(s) == 0);
    client.send(Command{PilotAction::LaunchOverride, "test", 0.0});
    bool launched = false;
    for (int i = 0; i < 20 && !launched; ++i) {
        s = client.next_snapshot();
        launched = airborne(s) == 1;
    }
    CHECK(launched);
    server.stop();
}

TEST_CASE("plain HTTP and other paths get a 404") {
    Simulation sim(piloted());
    TelemetryServer server(sim, {0, 10.0, 8.0});
    server.start();

    net::io_context ioc;
    tcp::socket socket(ioc);
    tcp::resolver resolver(ioc);
    net::connect(socket, resolver.resolve("127.0.0.1", std::to_string(server.port())));
    http::request<http::empty_body> req{http::verb::get, "/status", 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    CHECK(res.result() == http::status::not_found);

    websocket::stream<tcp::socket> ws(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    CHECK_THROWS(ws.handshake("127.0.0.1", "/other"));
    server.stop();
}

TEST_CASE("the server finishes at the horizon") {
    auto c = piloted();
    c.horizon = 2.0;
    Simulation sim(c);
    TelemetryServer server(sim, {0, 10.0, 50.0});
    server.start();
    server.wait();
    CHECK(server.finished());
    CHECK(sim.done());
    server.stop();
}
