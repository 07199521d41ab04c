#include "uchain/simengine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uchain {

namespace {

constexpr int kLaunchWindowTicks = 10;  // 2 s of decisions
constexpr double kMinBand = 2.0;

bool airborne(AgentMode m) {
    return m == AgentMode::Head || m == AgentMode::Relaying || m == AgentMode::Retreating;
}

bool active_relay(AgentMode m) { return m == AgentMode::Relaying || m == AgentMode::Retreating; }

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void push_window(std::vector<double>& w, double value) {
    w.push_back(value);
    if (w.size() > static_cast<std::size_t>(kLaunchWindowTicks)) w.erase(w.begin());
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string{}; }

}  // namespace

std::string_view to_string(PolicyVariant v) {
    switch (v) {
        case PolicyVariant::T0: return "T0";
        case PolicyVariant::T5: return "T5";
        case PolicyVariant::Kalman: return "K";
    }
    return "?";
}

std::optional<PolicyVariant> parse_variant(std::string_view text) {
    if (text == "T0") return PolicyVariant::T0;
    if (text == "T5") return PolicyVariant::T5;
    if (text == "K" || text == "Kalman") return PolicyVariant::Kalman;
    return std::nullopt;
}

std::string_view to_string(StartLayout layout) {
    switch (layout) {
        case StartLayout::Exploration: return "exploration";
        case StartLayout::Random: return "random";
        case StartLayout::Explicit: return "explicit";
    }
    return "?";
}

std::optional<StartLayout> parse_layout(std::string_view text) {
    if (text == "exploration") return StartLayout::Exploration;
    if (text == "random") return StartLayout::Random;
    if (text == "explicit") return StartLayout::Explicit;
    return std::nullopt;
}

void ScenarioConfig::validate() const {
    if (!env) throw std::invalid_argument("scenario '" + name + "': no environment");
    if (relays < 0) throw std::invalid_argument("scenario '" + name + "': relays must be >= 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("scenario '" + name + "': horizon must be > 0");
    if (replicates < 1) throw std::invalid_argument("scenario '" + name + "': replicates must be >= 1");
    if (!(T >= 0.0)) throw std::invalid_argument("scenario '" + name + "': T must be >= 0");
    if (!(convergence_window > 0.0) || !(variance_window > 0.0)) {
        throw std::invalid_argument("scenario '" + name + "': windows must be > 0");
    }
    radio.validate();
    kalman.validate();
    policy.validate();
    if (!head.interactive && (std::abs(head.speed) > policy.v_max || head.duration < 0.0)) {
        throw std::invalid_argument("scenario '" + name + "': scripted head speed must be within v_max");
    }
    const double head_x = head_start < 0.0 ? env->length() : head_start;
    if (head_x > env->length()) {
        throw std::invalid_argument("scenario '" + name + "': head_start beyond the end of the tunnel");
    }
    if (layout == StartLayout::Explicit) {
        if (relay_start.size() != static_cast<std::size_t>(relays)) {
            throw std::invalid_argument("scenario '" + name + "': relay_start must list one abscissa per relay");
        }
        double prev = head_x;
        for (double x : relay_start) {
            if (!(x > 0.0 && x < prev)) {
                throw std::invalid_argument("scenario '" + name +
                                            "': relay_start must decrease strictly between the head and the base");
            }
            prev = x;
        }
    }
    if (layout == StartLayout::Random && relays > 0 && head_x < 1.0) {
        throw std::invalid_argument("scenario '" + name + "': head too close to the base for a random layout");
    }
}

PolicyParams ScenarioConfig::effective_policy() const {
    PolicyParams p = policy;
    p.s_min = radio.s_min;
    switch (variant) {
        case PolicyVariant::T0: p.T = 0.0; break;
        case PolicyVariant::T5: p.T = 5.0; break;
        case PolicyVariant::Kalman: p.T = T; break;
    }
    return p;
}

SignalSource ScenarioConfig::signal_source() const {
    return variant == PolicyVariant::Kalman ? SignalSource::Filtered : SignalSource::Raw;
}

std::uint64_t ScenarioConfig::replicate_seed(int replicate) const {
    return seed + static_cast<std::uint64_t>(replicate);
}

std::vector<AgentId> WorldState::chain() const {
    std::vector<AgentId> ids;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (in_chain(agents[i].controller.mode())) ids.push_back(static_cast<AgentId>(i));
    }
    return ids;
}

std::optional<double> convergence_detector(std::span<const RdiffFrame> frames, double T, double window, double from) {
    const double band = std::max(T, kMinBand);
    auto in_band = [band](const RdiffFrame& f) {
        return std::all_of(f.r_diff.begin(), f.r_diff.end(), [band](double r) { return std::abs(r) <= band; });
    };
    constexpr double eps = 1e-9;
    std::optional<std::size_t> start;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].time < from - eps || !in_band(frames[i])) {
            start.reset();
            continue;
        }
        if (!start) start = i;
        if (frames[i].time - frames[*start].time >= window - eps) return frames[*start].time;
    }
    return std::nullopt;
}

Simulation::Simulation(ScenarioConfig config, int replicate)
    : config_(std::move(config)), seed_(0) {
    config_.validate();
    policy_ = config_.effective_policy();
    seed_ = config_.replicate_seed(replicate);
    const int n = config_.relays + 2;
    world_.agents.reserve(static_cast<std::size_t>(n));
    for (AgentId id = 0; id < n; ++id) {
        AgentMode mode = AgentMode::Idle;
        if (id == 0) mode = AgentMode::Head;
        if (id == n - 1) mode = AgentMode::Base;
        world_.agents.emplace_back(AgentController(id, mode, config_.signal_source(), config_.kalman, policy_));
    }
    link_window_.resize(static_cast<std::size_t>(n));
    misordered_.assign(static_cast<std::size_t>(n), false);
    too_close_.assign(static_cast<std::size_t>(n), false);
    place_agents();
}

RandomStream& Simulation::stream(const std::string& name) {
    auto it = streams_.find(name);
    if (it == streams_.end()) it = streams_.emplace(name, RandomStream(seed_, name)).first;
    return it->second;
}

void Simulation::place_agents() {
    const Environment& env = *config_.env;
    auto pose_at = [&env](double s) { return Pose{env.point_at(s), env.heading_at(s)}; };
    const double head_x = config_.head_start < 0.0 ? env.length() : config_.head_start;

    world_.agents.front().pose = pose_at(head_x);
    world_.agents.back().pose = pose_at(0.0);

    std::vector<double> xs;
    if (config_.layout == StartLayout::Random) {
        RandomStream& rng = stream("init/positions");
        constexpr double margin = 0.5;
        for (int i = 0; i < config_.relays; ++i) xs.push_back(rng.uniform(margin, head_x - margin));
        std::sort(xs.begin(), xs.end(), std::greater<>());
    } else if (config_.layout == StartLayout::Explicit) {
        xs = config_.relay_start;
    }
    for (int i = 0; i < config_.relays; ++i) {
        AgentState& a = world_.agents[static_cast<std::size_t>(i + 1)];
        if (xs.empty()) {
            a.pose = pose_at(0.0);
        } else {
            a.pose = pose_at(xs[static_cast<std::size_t>(i)]);
            a.controller.force_mode(AgentMode::Relaying);
        }
    }
    for (auto& a : world_.agents) update_geometry(a);
}

void Simulation::update_geometry(AgentState& agent) {
    const Projection p = config_.env->project(agent.pose.position);
    agent.abscissa = p.abscissa;
    agent.offset = p.offset;
}

double Simulation::head_command() const {
    if (config_.head.interactive) return pilot_velocity_;
    return world_.time() < config_.head.duration - 1e-9 ? config_.head.speed : 0.0;
}

bool Simulation::launch_due() const {
    bool any_idle = false;
    for (const auto& a : world_.agents) {
        const AgentMode m = a.controller.mode();
        if (m == AgentMode::Idle) any_idle = true;
        if (m == AgentMode::TakingOff || m == AgentMode::Retreating) return false;
    }
    if (!any_idle) return false;

    // Converged means the whole chain agrees, not just each relay with its neighbors:
    // small local differences add up along the chain.
    const double band = std::max(policy_.T, kMinBand);
    double weakest = std::numeric_limits<double>::infinity();
    double strongest = -std::numeric_limits<double>::infinity();
    for (AgentId id : world_.chain()) {
        if (id == world_.base()) continue;
        const auto i = static_cast<std::size_t>(id);
        const AgentState& a = world_.agents[i];
        if (a.controller.mode() == AgentMode::Relaying && a.controller.ticks_in_mode() < kLaunchWindowTicks) {
            return false;
        }
        const auto& w = link_window_[i];
        if (w.size() < static_cast<std::size_t>(kLaunchWindowTicks)) return false;
        weakest = std::min(weakest, mean(w));
        strongest = std::max(strongest, mean(w));
    }
    return strongest - weakest <= band && weakest < policy_.s_min + policy_.launch_margin;
}

void Simulation::log_event(AgentId id, std::string text) {
    const AgentState& a = world_.agents[static_cast<std::size_t>(id)];
    EventRow row;
    row.tick = world_.tick;
    row.time = world_.time();
    row.agent = id;
    row.mode = a.controller.mode();
    row.abscissa = a.abscissa;
    row.offset = a.offset;
    row.velocity = a.velocity;
    row.event = std::move(text);
    events_.push_back(std::move(row));
}

void Simulation::step() { advance(kKinematicSubsteps - substep_); }

void Simulation::advance(int substeps) {
    for (int s = 0; s < substeps; ++s) {
        if (substep_ == 0) decide();
        integrate_substep();
        if (++substep_ == kKinematicSubsteps) finish_tick();
    }
}

void Simulation::decide() {
    const Environment& env = *config_.env;
    const std::int64_t tick = world_.tick;
    const std::vector<AgentId> chain = world_.chain();
    const auto n = world_.agents.size();

    // (1) one packet each way over every chain link
    std::vector<AgentInputs> inputs(n);
    world_.links.clear();
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        const AgentId h = chain[k];
        const AgentId b = chain[k + 1];
        const AgentState& ah = world_.agents[static_cast<std::size_t>(h)];
        const AgentState& ab = world_.agents[static_cast<std::size_t>(b)];
        inputs[static_cast<std::size_t>(h)].base_neighbor = b;
        inputs[static_cast<std::size_t>(b)].head_neighbor = h;

        const Vec2 ph = ah.pose.position;
        const Vec2 pb = ab.pose.position;
        // relays take off from the base pad, so the base link starts at zero length
        const bool close = b != world_.base() && distance(ph, pb) < kMinLinkDistance;
        if (close && !too_close_[static_cast<std::size_t>(h)]) {
            ++near_collisions_;
            log_event(h, fmt::format("warn:near_collision:{}-{}", h, b));
        }
        too_close_[static_cast<std::size_t>(h)] = close;

        auto send = [&](AgentId src, AgentId dst, Vec2 from, Vec2 to) -> std::optional<RadioSample> {
            RandomStream& rng = stream(fmt::format("link/{}>{}", src, dst));
            const double z = sample_quality(env, from, to, config_.radio, rng);
            if (!try_transmit(z, config_.radio, rng)) return std::nullopt;
            return RadioSample{src, dst, z, tick, world_.agents[static_cast<std::size_t>(src)].velocity};
        };
        inputs[static_cast<std::size_t>(b)].from_head = send(h, b, ph, pb);
        inputs[static_cast<std::size_t>(h)].from_base = send(b, h, pb, ph);

        LinkRecord rec;
        rec.tick = tick;
        rec.head_side = h;
        rec.base_side = b;
        rec.true_q = true_quality(env, ph, pb, config_.radio);
        if (inputs[static_cast<std::size_t>(h)].from_base) rec.raw_q = inputs[static_cast<std::size_t>(h)].from_base->quality;
        world_.links.push_back(rec);
    }

    // (2) launch monitor at the base
    if ((!config_.manual_launch && launch_due()) || launch_override_) {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (world_.agents[i].controller.mode() == AgentMode::Idle) {
                inputs[i].launch_commanded = true;
                launches_.push_back({tick, world_.time(), static_cast<AgentId>(i)});
                log_event(static_cast<AgentId>(i), "launch");
                break;
            }
        }
        launch_override_ = false;
    }

    // (3) agent decisions, head to base
    commands_.assign(n, AgentCommand{});
    for (std::size_t i = 0; i < n; ++i) {
        AgentState& a = world_.agents[i];
        AgentInputs& in = inputs[i];
        in.tick = tick;
        in.ranges = raycast_ranges(env, a.pose);
        in.pilot_velocity = head_command();
        const AgentMode before = a.controller.mode();
        commands_[i] = a.controller.update(in);
        a.velocity = commands_[i].forward_velocity;
        a.lateral = commands_[i].lateral;
        if (a.controller.mode() != before) {
            log_event(static_cast<AgentId>(i), fmt::format("mode:{}", to_string(a.controller.mode())));
        }
        if (const auto v = a.controller.base_link().value(a.controller.source()); v && in.base_neighbor >= 0) {
            push_window(link_window_[i], *v);
        } else {
            link_window_[i].clear();
        }
    }
    for (auto& rec : world_.links) {
        const auto& est = world_.agents[static_cast<std::size_t>(rec.head_side)].controller.base_link().estimate;
        if (est) rec.filtered_q = est->r_hat;
    }

    record_tick();
    blocked_.assign(n, false);
}

void Simulation::integrate_substep() {
    const double dt = kDecisionPeriod / kKinematicSubsteps;
    for (std::size_t i = 0; i < world_.agents.size(); ++i) {
        AgentState& a = world_.agents[i];
        if (!airborne(a.controller.mode())) continue;
        const AgentCommand& cmd = commands_[i];
        const Vec2 f = unit(a.pose.heading);
        const Vec2 l = unit(a.pose.heading + std::numbers::pi / 2.0);
        const Vec2 next = a.pose.position + f * (cmd.forward_velocity * dt) + l * (cmd.lateral.lateral_velocity * dt);
        const Segment path{a.pose.position, next};
        const bool hit = std::any_of(config_.env->walls().begin(), config_.env->walls().end(),
                                     [&](const Segment& w) { return segments_intersect(path, w); });
        if (hit) {
            blocked_[i] = true;
        } else {
            a.pose.position = next;
        }
        a.pose.heading = wrap_angle(a.pose.heading + cmd.lateral.yaw_rate * dt);
        update_geometry(a);
    }
}

void Simulation::finish_tick() {
    for (std::size_t i = 0; i < world_.agents.size(); ++i) {
        if (blocked_[i]) {
            ++wall_faults_;
            log_event(static_cast<AgentId>(i), "fault:wall");
        }
    }
    check_order();
    ++world_.tick;
    substep_ = 0;
}

void Simulation::check_order() {
    const std::vector<AgentId> chain = world_.chain();
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        const auto h = static_cast<std::size_t>(chain[k]);
        const auto b = static_cast<std::size_t>(chain[k + 1]);
        const bool bad = world_.agents[h].abscissa < world_.agents[b].abscissa;
        if (bad && !misordered_[h]) {
            ++order_faults_;
            log_event(chain[k], fmt::format("fault:order:{}-{}", chain[k], chain[k + 1]));
        }
        misordered_[h] = bad;
    }
}

void Simulation::record_tick() {
    const Environment& env = *config_.env;
    const auto n = world_.agents.size();

    for (std::size_t i = 0; i < n; ++i) {
        const AgentState& a = world_.agents[i];
        EventRow row;
        row.tick = world_.tick;
        row.time = world_.time();
        row.agent = static_cast<AgentId>(i);
        row.mode = a.controller.mode();
        row.abscissa = a.abscissa;
        row.offset = a.offset;
        row.velocity = a.velocity;
        for (const auto& rec : world_.links) {
            if (rec.head_side == row.agent) row.link = rec;
        }
        events_.push_back(std::move(row));
    }
    link_traces_.insert(link_traces_.end(), world_.links.begin(), world_.links.end());

    double min_q = std::numeric_limits<double>::infinity();
    for (const auto& rec : world_.links) min_q = std::min(min_q, rec.true_q);
    min_true_quality_.push_back(world_.links.empty() ? std::numeric_limits<double>::quiet_NaN() : min_q);

    // r_diff from true qualities; a relay's links are the ones on either side of it in the chain
    RdiffFrame frame;
    frame.time = world_.time();
    const std::vector<AgentId> chain = world_.chain();
    for (std::size_t k = 1; k + 1 < chain.size(); ++k) {
        const AgentState& a = world_.agents[static_cast<std::size_t>(chain[k])];
        if (!active_relay(a.controller.mode())) continue;
        const Vec2 p = a.pose.position;
        const double r_b = true_quality(env, p, world_.agents[static_cast<std::size_t>(chain[k + 1])].pose.position,
                                        config_.radio);
        const double r_f = true_quality(env, p, world_.agents[static_cast<std::size_t>(chain[k - 1])].pose.position,
                                        config_.radio);
        frame.r_diff.push_back(r_b - r_f);
    }
    rdiff_trace_.push_back(std::move(frame));

    std::vector<double> xs(n);
    std::vector<AgentMode> modes(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = world_.agents[i].abscissa;
        modes[i] = world_.agents[i].controller.mode();
    }
    abscissa_trace_.push_back(std::move(xs));
    mode_trace_.push_back(std::move(modes));
}

bool Simulation::done() const { return substep_ == 0 && world_.time() >= config_.horizon - 1e-9; }

void Simulation::run() {
    while (!done()) step();
}

Metrics Simulation::metrics() const {
    Metrics m;
    m.launches = launches_;
    m.link_traces = link_traces_;
    m.rdiff_trace = rdiff_trace_;
    m.min_true_quality = min_true_quality_;
    m.wall_faults = wall_faults_;
    m.order_faults = order_faults_;
    m.near_collisions = near_collisions_;

    if (config_.layout == StartLayout::Exploration) {
        double start = config_.head.interactive ? 0.0 : config_.head.duration;
        if (!launches_.empty()) start = std::max(start, launches_.back().time);
        m.convergence_search_start = start;
    }
    m.convergence_time = convergence_detector(rdiff_trace_, config_.T, config_.convergence_window,
                                              m.convergence_search_start);

    // variance over the last window, relays next to the first three links only
    m.position_variance = std::numeric_limits<double>::quiet_NaN();
    const auto ticks = abscissa_trace_.size();
    const auto span = static_cast<std::size_t>(std::llround(config_.variance_window / kDecisionPeriod));
    if (ticks >= span && span > 1) {
        std::vector<double> per_agent;
        const std::size_t last_relay = std::min<std::size_t>(3, world_.agents.size() - 2);
        for (std::size_t id = 1; id <= last_relay; ++id) {
            bool flying = true;
            std::vector<double> xs;
            for (std::size_t t = ticks - span; t < ticks; ++t) {
                flying = flying && active_relay(mode_trace_[t][id]);
                xs.push_back(abscissa_trace_[t][id]);
            }
            if (!flying) continue;
            const double mu = mean(xs);
            double var = 0.0;
            for (double x : xs) var += (x - mu) * (x - mu);
            per_agent.push_back(var / static_cast<double>(xs.size()));
        }
        if (!per_agent.empty()) m.position_variance = mean(per_agent);
    }

    for (const auto& a : world_.agents) {
        m.final_abscissae.push_back(a.abscissa);
        if (active_relay(a.controller.mode())) ++m.airborne_relays;
    }
    const std::vector<AgentId> chain = world_.chain();
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        m.final_link_quality.push_back(true_quality(*config_.env,
                                                    world_.agents[static_cast<std::size_t>(chain[k])].pose.position,
                                                    world_.agents[static_cast<std::size_t>(chain[k + 1])].pose.position,
                                                    config_.radio));
    }
    return m;
}

void Simulation::write_event_log(std::ostream& out) const {
    out << "tick,time_s,agent_id,mode,x_abscissa,y_offset,link_id,true_q,raw_q,filtered_q,velocity,event\n";
    for (const auto& r : events_) {
        std::string link_id;
        std::string true_q;
        std::string raw_q;
        std::string filtered_q;
        if (r.link) {
            link_id = fmt::format("{}-{}", r.link->head_side, r.link->base_side);
            true_q = fmt::format("{:.6f}", r.link->true_q);
            raw_q = opt(r.link->raw_q);
            filtered_q = opt(r.link->filtered_q);
        }
        out << fmt::format("{},{:.1f},{},{},{:.6f},{:.6f},{},{},{},{},{:.6f},{}\n", r.tick, r.time, r.agent,
                           to_string(r.mode), r.abscissa, r.offset, link_id, true_q, raw_q, filtered_q, r.velocity,
                           r.event);
    }
}

Metrics run_scenario(const ScenarioConfig& config, int replicate, std::ostream* log) {
    Simulation sim(config, replicate);
    sim.run();
    if (log) sim.write_event_log(*log);
    return sim.metrics();
}

}  // namespace uchain
