#include "uchain/telemetry.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <set>

namespace uchain {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace detail {

constexpr std::size_t kMaxQueuedFrames = 256;

class Session;

struct Hub {
    net::io_context ioc;
    net::executor_work_guard<net::io_context::executor_type> work = net::make_work_guard(ioc);
    tcp::acceptor acceptor{ioc};
    std::set<std::shared_ptr<Session>> sessions;  // io thread only
    std::atomic<int> clients{0};
    std::string hello;
    PilotBridge* bridge = nullptr;

    void accept();
    void broadcast(std::shared_ptr<const std::string> frame);
    void close_all();
};

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void run() {
        http::async_read(ws_.next_layer(), buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    void send(std::shared_ptr<const std::string> frame) {
        if (!open_ || queue_.size() >= kMaxQueuedFrames) return;
        queue_.push_back(std::move(frame));
        if (queue_.size() == 1) write_next();
    }

    void close() {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void on_request(beast::error_code ec) {
        if (ec) return;
        if (!websocket::is_upgrade(request_) || request_.target() != "/ws") {
            auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
            res->set(http::field::content_type, "text/plain");
            res->body() = "websocket endpoint is /ws\n";
            res->prepare_payload();
            res->keep_alive(false);
            http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
                self->close();
            });
            return;
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request_, [self = shared_from_this()](beast::error_code accept_ec) {
            self->on_accept(accept_ec);
        });
    }

    void on_accept(beast::error_code ec) {
        if (ec) return;
        open_ = true;
        hub_.sessions.insert(shared_from_this());
        ++hub_.clients;
        send(std::make_shared<const std::string>(hub_.hello));
        read();
    }

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            drop();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        try {
            const Message m = decode(text);
            if (const auto* cmd = std::get_if<Command>(&m)) {
                if (auto err = hub_.bridge->submit(*cmd)) reply(*err);
            } else {
                reply({"schema", "clients may only send command frames"});
            }
        } catch (const ProtocolError& e) {
            reply(e.frame());
        }
        read();
    }

    void reply(const ErrorFrame& err) { send(std::make_shared<const std::string>(encode(err))); }

    void write_next() {
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->drop();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write_next();
        });
    }

    void drop() {
        if (!open_) return;
        open_ = false;
        queue_.clear();
        hub_.sessions.erase(shared_from_this());
        --hub_.clients;
        hub_.bridge->client_lost();
        close();
    }

    websocket::stream<beast::tcp_stream> ws_;
    Hub& hub_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool open_ = false;
};

void Hub::accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<Session>(std::move(socket), *this)->run();
        accept();
    });
}

void Hub::broadcast(std::shared_ptr<const std::string> frame) {
    net::post(ioc, [this, frame = std::move(frame)] {
        for (const auto& s : sessions) s->send(frame);
    });
}

void Hub::close_all() {
    beast::error_code ec;
    acceptor.close(ec);
    for (const auto& s : sessions) s->close();
}

}  // namespace detail

std::optional<ErrorFrame> PilotBridge::submit(const Command& command) {
    if (command.action == PilotAction::LaunchOverride && !manual_launch_) {
        return ErrorFrame{"rejected", "launch_override needs a scenario with manual_launch: true"};
    }
    const std::lock_guard lock(mutex_);
    pending_ = command;
    return std::nullopt;
}

void PilotBridge::client_lost() {
    const std::lock_guard lock(mutex_);
    pending_ = Command{PilotAction::Stop, "dead-man", 0.0};
}

void PilotBridge::apply(Simulation& sim) {
    std::optional<Command> cmd;
    {
        const std::lock_guard lock(mutex_);
        cmd = std::exchange(pending_, std::nullopt);
    }
    if (!cmd) return;
    const double speed = sim.config().head.speed;
    switch (cmd->action) {
        case PilotAction::Forward: sim.set_pilot_velocity(speed); break;
        case PilotAction::Backward: sim.set_pilot_velocity(-speed); break;
        case PilotAction::Stop: sim.set_pilot_velocity(0.0); break;
        case PilotAction::LaunchOverride: sim.request_launch(); break;
    }
}

struct TelemetryServer::Impl : detail::Hub {};

TelemetryServer::TelemetryServer(Simulation& sim, ServeOptions options)
    : sim_(sim), options_(options), bridge_(sim.config().manual_launch), impl_(std::make_unique<Impl>()) {
    impl_->bridge = &bridge_;
    impl_->hello = encode(make_hello(sim_));
}

TelemetryServer::~TelemetryServer() { stop(); }

void TelemetryServer::start() {
    tcp::endpoint endpoint(net::ip::make_address("0.0.0.0"), options_.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
    impl_->accept();
    io_thread_ = std::thread([this] { impl_->ioc.run(); });
    sim_thread_ = std::thread([this] { simulation_loop(); });
}

unsigned short TelemetryServer::port() const {
    beast::error_code ec;
    return impl_->acceptor.local_endpoint(ec).port();
}

int TelemetryServer::clients() const { return impl_->clients; }

void TelemetryServer::simulation_loop() {
    const int substeps_per_frame = std::max(
        1, static_cast<int>(std::lround(kKinematicSubsteps / (options_.snapshot_rate * kDecisionPeriod))));
    const std::chrono::duration<double> period(substeps_per_frame * (kDecisionPeriod / kKinematicSubsteps) /
                                               options_.time_scale);
    auto next = std::chrono::steady_clock::now();
    impl_->broadcast(std::make_shared<const std::string>(encode(make_snapshot(sim_))));
    while (!stopping_ && !sim_.done()) {
        next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
        std::this_thread::sleep_until(next);
        int left = substeps_per_frame;
        while (left > 0 && !sim_.done()) {
            if (sim_.substep() == 0) bridge_.apply(sim_);
            const int chunk = std::min(left, kKinematicSubsteps - sim_.substep());
            sim_.advance(chunk);
            left -= chunk;
        }
        impl_->broadcast(std::make_shared<const std::string>(encode(make_snapshot(sim_))));
    }
    finished_ = true;
}

void TelemetryServer::wait() {
    if (sim_thread_.joinable()) sim_thread_.join();
}

void TelemetryServer::stop() {
    stopping_ = true;
    if (sim_thread_.joinable()) sim_thread_.join();
    if (io_thread_.joinable()) {
        net::post(impl_->ioc, [this] {
            impl_->close_all();
            impl_->ioc.stop();
        });
        io_thread_.join();
    }
}

}  // namespace uchain
