#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "uchain/protocol.hpp"
#include "uchain/simengine.hpp"

namespace uchain {

/// Funnels pilot commands into the world: at most one command per decision tick, the latest one.
/// A dropped client counts as a stop command issued at the moment of the drop.
class PilotBridge {
public:
    explicit PilotBridge(bool manual_launch) : manual_launch_(manual_launch) {}

    /// Thread-safe. Returns an error frame when the command is not allowed here.
    std::optional<ErrorFrame> submit(const Command& command);
    /// Thread-safe dead-man hook.
    void client_lost();
    /// Applies the pending command, if any. Call on the simulation thread right before a tick starts.
    void apply(Simulation& sim);

private:
    bool manual_launch_;
    std::mutex mutex_;
    std::optional<Command> pending_;
};

struct ServeOptions {
    unsigned short port = 8008;  // 0 picks a free port
    double snapshot_rate = 10.0;  // Hz of simulated time
    double time_scale = 1.0;      // simulated seconds per wall-clock second
};

/// WebSocket service at /ws driving one Simulation in real time. The simulation is owned by the
/// service thread from start() until stop() or the end of the horizon.
class TelemetryServer {
public:
    TelemetryServer(Simulation& sim, ServeOptions options);
    ~TelemetryServer();
    TelemetryServer(const TelemetryServer&) = delete;
    TelemetryServer& operator=(const TelemetryServer&) = delete;

    /// Binds and starts the network and simulation threads. Throws on bind failure.
    void start();
    /// Port actually bound (useful with port 0).
    [[nodiscard]] unsigned short port() const;
    /// Blocks until the simulation reaches its horizon.
    void wait();
    /// Stops the simulation and closes every connection. Idempotent.
    void stop();
    [[nodiscard]] bool finished() const { return finished_; }
    [[nodiscard]] int clients() const;

private:
    struct Impl;
    void simulation_loop();

    Simulation& sim_;
    ServeOptions options_;
    PilotBridge bridge_;
    std::unique_ptr<Impl> impl_;
    std::thread io_thread_;
    std::thread sim_thread_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> finished_{false};
};

}  // namespace uchain
