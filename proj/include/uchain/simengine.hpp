#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uchain/agent.hpp"
#include "uchain/estimator.hpp"
#include "uchain/geometry.hpp"
#include "uchain/radio.hpp"
#include "uchain/random.hpp"

namespace uchain {

inline constexpr double kDecisionPeriod = 0.2;  // s, 5 Hz
inline constexpr int kKinematicSubsteps = 10;   // 50 Hz integration

/// Which signal the relays equalize and with what tolerance.
enum class PolicyVariant { T0, T5, Kalman };

[[nodiscard]] std::string_view to_string(PolicyVariant v);
/// Accepts "T0", "T5", "K" (also "Kalman").
[[nodiscard]] std::optional<PolicyVariant> parse_variant(std::string_view text);

/// How agents are placed at t = 0.
enum class StartLayout {
    Exploration,  // relays idle at the base, head flies the scripted or piloted profile
    Random,       // relays already airborne at random ordered abscissae, head parked
    Explicit,     // relays airborne at the listed abscissae
};

[[nodiscard]] std::string_view to_string(StartLayout layout);
[[nodiscard]] std::optional<StartLayout> parse_layout(std::string_view text);

struct HeadProfile {
    bool interactive = false;
    double speed = 0.2;      // m/s while scripted
    double duration = 50.0;  // s of scripted forward flight, then stop
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::shared_ptr<const Environment> env;
    int relays = 4;
    PolicyVariant variant = PolicyVariant::Kalman;
    double T = 1.0;  // Kalman-variant tolerance; also sets the convergence band for every variant
    KalmanParams kalman;
    RadioParams radio;
    PolicyParams policy;  // T and s_min are overwritten per variant and from radio
    HeadProfile head;
    StartLayout layout = StartLayout::Exploration;
    bool manual_launch = false;       // launches only on request_launch(), the monitor stays silent
    double head_start = 1.0;          // abscissa; negative means the far end of the centerline
    std::vector<double> relay_start;  // Explicit layout, relay 1 first (closest to the head)
    double horizon = 120.0;           // s
    std::uint64_t seed = 1;
    int replicates = 1;
    double convergence_window = 5.0;  // s
    double variance_window = 20.0;    // s

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
    /// Policy parameters actually handed to the agents for this variant.
    [[nodiscard]] PolicyParams effective_policy() const;
    [[nodiscard]] SignalSource signal_source() const;
    /// Seed of one replicate, derived from `seed`.
    [[nodiscard]] std::uint64_t replicate_seed(int replicate) const;
};

struct AgentState {
    explicit AgentState(AgentController c) : controller(std::move(c)) {}

    AgentController controller;
    Pose pose;
    double abscissa = 0.0;
    double offset = 0.0;
    double velocity = 0.0;  // commanded along-tunnel speed this tick
    LateralCommand lateral;
};

/// One chain link as observed during a tick. The head-side endpoint owns the row.
struct LinkRecord {
    std::int64_t tick = 0;
    AgentId head_side = 0;
    AgentId base_side = 0;
    double true_q = 0.0;
    std::optional<double> raw_q;       // sample the head-side endpoint received, if any
    std::optional<double> filtered_q;  // head-side endpoint's estimate
};

struct EventRow {
    std::int64_t tick = 0;
    double time = 0.0;
    AgentId agent = 0;
    AgentMode mode = AgentMode::Idle;
    double abscissa = 0.0;
    double offset = 0.0;
    std::optional<LinkRecord> link;
    double velocity = 0.0;
    std::string event;  // empty on plain state rows
};

/// Index 0 is the head, the last index the base; relays sit in between.
struct WorldState {
    std::int64_t tick = 0;
    std::vector<AgentState> agents;
    std::vector<LinkRecord> links;  // active chain links, head side first

    [[nodiscard]] double time() const { return static_cast<double>(tick) * kDecisionPeriod; }
    [[nodiscard]] AgentId head() const { return 0; }
    [[nodiscard]] AgentId base() const { return static_cast<AgentId>(agents.size()) - 1; }
    /// Agents currently forming the chain, head first.
    [[nodiscard]] std::vector<AgentId> chain() const;
};

struct LaunchEvent {
    std::int64_t tick = 0;
    double time = 0.0;
    AgentId agent = 0;
};

/// r_diff of every active relay at one decision tick, computed from true qualities.
struct RdiffFrame {
    double time = 0.0;
    std::vector<double> r_diff;
};

struct Metrics {
    std::optional<double> convergence_time;
    double convergence_search_start = 0.0;
    double position_variance = 0.0;  // NaN when no relay qualifies
    std::vector<double> min_true_quality;
    std::vector<LaunchEvent> launches;
    std::vector<LinkRecord> link_traces;
    std::vector<RdiffFrame> rdiff_trace;
    int wall_faults = 0;
    int order_faults = 0;
    int near_collisions = 0;
    int airborne_relays = 0;
    std::vector<double> final_abscissae;     // by agent id
    std::vector<double> final_link_quality;  // true quality, head side first
};

/// First time t >= `from` such that every frame in [t, t + window] has all |r_diff| <= max(T, 2).
/// Absent when the trace never holds the band for a full window.
[[nodiscard]] std::optional<double> convergence_detector(std::span<const RdiffFrame> frames, double T,
                                                         double window, double from = 0.0);

/// Deterministic world. Single writer; copy the state out to observe it from another thread.
class Simulation {
public:
    explicit Simulation(ScenarioConfig config, int replicate = 0);

    /// Finishes the current decision tick.
    void step();
    /// Advances by `substeps` kinematic substeps; a decision happens whenever a tick starts.
    void advance(int substeps);
    /// Kinematic substeps already taken within the current tick.
    [[nodiscard]] int substep() const { return substep_; }
    [[nodiscard]] bool done() const;
    void run();

    /// Interactive mode: head velocity applied from the next tick on.
    void set_pilot_velocity(double v) { pilot_velocity_ = v; }
    [[nodiscard]] double pilot_velocity() const { return pilot_velocity_; }
    /// Launches the next idle relay at the next tick.
    void request_launch() { launch_override_ = true; }

    [[nodiscard]] const WorldState& world() const { return world_; }
    [[nodiscard]] const ScenarioConfig& config() const { return config_; }
    [[nodiscard]] const Environment& environment() const { return *config_.env; }
    [[nodiscard]] std::span<const EventRow> events() const { return events_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    [[nodiscard]] Metrics metrics() const;
    void write_event_log(std::ostream& out) const;

private:
    void place_agents();
    void decide();
    void integrate_substep();
    void finish_tick();
    [[nodiscard]] double head_command() const;
    [[nodiscard]] bool launch_due() const;
    void update_geometry(AgentState& agent);
    void check_order();
    void log_event(AgentId id, std::string text);
    void record_tick();
    RandomStream& stream(const std::string& name);

    ScenarioConfig config_;
    PolicyParams policy_;
    std::uint64_t seed_;
    WorldState world_;
    std::map<std::string, RandomStream> streams_;
    std::vector<EventRow> events_;
    std::vector<LinkRecord> link_traces_;
    std::vector<RdiffFrame> rdiff_trace_;
    std::vector<double> min_true_quality_;
    std::vector<std::vector<double>> abscissa_trace_;  // [tick][agent]
    std::vector<std::vector<AgentMode>> mode_trace_;
    std::vector<LaunchEvent> launches_;
    std::vector<std::vector<double>> link_window_;     // per agent, recent uplink values
    std::vector<bool> misordered_;
    std::vector<bool> too_close_;
    std::vector<AgentCommand> commands_;  // this tick's decisions, held across substeps
    std::vector<bool> blocked_;
    int substep_ = 0;
    double pilot_velocity_ = 0.0;
    bool launch_override_ = false;
    int wall_faults_ = 0;
    int order_faults_ = 0;
    int near_collisions_ = 0;
};

/// Runs one replicate to its horizon. Writes the event log to `log` when given.
[[nodiscard]] Metrics run_scenario(const ScenarioConfig& config, int replicate = 0, std::ostream* log = nullptr);

}  // namespace uchain
