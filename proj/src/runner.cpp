#include "uchain/runner.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "uchain/stats.hpp"

namespace uchain {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json to_json(const RunOutcome& o) {
    ordered_json j;
    j["run"] = o.run;
    j["variant"] = std::string(to_string(o.variant));
    j["replicate"] = o.replicate;
    j["seed"] = o.seed;
    j["horizon_s"] = o.horizon;
    j["converged"] = o.convergence_time.has_value();
    j["convergence_time_s"] = o.convergence_time ? ordered_json(*o.convergence_time) : ordered_json(nullptr);
    j["position_variance_m2"] = number_or_null(o.position_variance);
    j["launches"] = o.launches;
    j["airborne_relays"] = o.airborne_relays;
    j["final_min_quality"] = number_or_null(o.final_min_quality);
    j["final_abscissae"] = o.final_abscissae;
    j["final_link_quality"] = o.final_link_quality;
    j["wall_faults"] = o.wall_faults;
    j["order_faults"] = o.order_faults;
    j["near_collisions"] = o.near_collisions;
    j["faults"] = o.faults;
    j["log"] = o.log_file;
    return j;
}

std::string fmt_median_iqr(const std::vector<double>& v, const char* spec) {
    const double med = median(v);
    if (std::isnan(med)) return "n/a";
    const auto f = fmt::runtime(spec);
    return fmt::format("{} [{} .. {}]", fmt::format(f, med), fmt::format(f, quantile(v, 0.25)),
                       fmt::format(f, quantile(v, 0.75)));
}

struct Cell {
    ScenarioConfig scenario;
    PolicyVariant variant;
    int replicate;
};

}  // namespace

std::string run_stem(const std::string& run, PolicyVariant variant, int replicate) {
    return fmt::format("{}-{}-r{:03}", run, to_string(variant), replicate);
}

RunOutcome simulate(const ScenarioConfig& scenario, PolicyVariant variant, int replicate, std::ostream* log) {
    ScenarioConfig cfg = scenario;
    cfg.variant = variant;
    Simulation sim(cfg, replicate);
    sim.run();
    if (log) sim.write_event_log(*log);
    const Metrics m = sim.metrics();

    RunOutcome o;
    o.run = cfg.name;
    o.variant = variant;
    o.replicate = replicate;
    o.seed = sim.seed();
    o.horizon = cfg.horizon;
    o.convergence_time = m.convergence_time;
    o.position_variance = m.position_variance;
    o.launches = static_cast<int>(m.launches.size());
    o.airborne_relays = m.airborne_relays;
    o.final_abscissae = m.final_abscissae;
    o.final_link_quality = m.final_link_quality;
    o.final_min_quality = m.final_link_quality.empty()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : *std::min_element(m.final_link_quality.begin(), m.final_link_quality.end());
    o.wall_faults = m.wall_faults;
    o.order_faults = m.order_faults;
    o.near_collisions = m.near_collisions;
    for (const auto& e : sim.events()) {
        if (e.event.starts_with("fault:") || e.event.starts_with("warn:")) {
            o.faults.push_back(fmt::format("t={:.1f} agent {} {}", e.time, e.agent, e.event));
        }
    }
    return o;
}

BatchResult run_batch(const BatchConfig& config, const BatchOptions& options) {
    std::vector<Cell> cells;
    for (const auto& spec : config.runs) {
        ScenarioConfig scenario = spec.scenario;
        if (options.seed) scenario.seed = *options.seed;
        if (options.replicates) scenario.replicates = *options.replicates;
        scenario.validate();
        const std::vector<PolicyVariant> variants =
            options.variant ? std::vector<PolicyVariant>{*options.variant} : spec.variants;
        for (const auto v : variants) {
            for (int r = 0; r < scenario.replicates; ++r) cells.push_back({scenario, v, r});
        }
    }

    BatchResult result;
    result.name = config.name;
    result.directory = options.out_dir / config.name;
    std::filesystem::create_directories(result.directory / "metrics");
    if (options.write_logs) std::filesystem::create_directories(result.directory / "logs");
    result.outcomes.resize(cells.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                const Cell& c = cells[i];
                const std::string stem = run_stem(c.scenario.name, c.variant, c.replicate);
                RunOutcome o;
                if (options.write_logs) {
                    std::ofstream log(result.directory / "logs" / (stem + ".csv"), std::ios::binary);
                    o = simulate(c.scenario, c.variant, c.replicate, &log);
                    o.log_file = "logs/" + stem + ".csv";
                } else {
                    o = simulate(c.scenario, c.variant, c.replicate);
                }
                std::ofstream(result.directory / "metrics" / (stem + ".json"), std::ios::binary)
                    << to_json(o).dump(2) << '\n';
                result.outcomes[i] = std::move(o);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(cells.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return result;
}

void write_summary(const BatchResult& result, std::ostream& out) {
    // group by run then variant, keeping first-seen order
    std::vector<std::pair<std::string, PolicyVariant>> groups;
    for (const auto& o : result.outcomes) {
        const std::pair key{o.run, o.variant};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    auto select = [&](const std::string& run, PolicyVariant v) {
        std::vector<const RunOutcome*> sel;
        for (const auto& o : result.outcomes) {
            if (o.run == run && o.variant == v) sel.push_back(&o);
        }
        return sel;
    };
    auto times = [](const std::vector<const RunOutcome*>& sel) {
        std::vector<double> t;
        for (const auto* o : sel) t.push_back(o->convergence_time.value_or(o->horizon));
        return t;
    };
    auto variances = [](const std::vector<const RunOutcome*>& sel) {
        std::vector<double> v;
        for (const auto* o : sel) {
            if (!std::isnan(o->position_variance)) v.push_back(o->position_variance);
        }
        return v;
    };

    out << fmt::format("# {}\n\n", result.name);
    out << "Convergence times count runs that never converge at the horizon.\n\n";
    out << "| run | variant | runs | converged | convergence time s, median [IQR] | position variance m^2, median "
           "[IQR] | launches, median | faults |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    std::size_t total = 0;
    std::size_t converged_total = 0;
    for (const auto& [run, v] : groups) {
        const auto sel = select(run, v);
        std::size_t converged = 0;
        std::size_t faults = 0;
        std::vector<double> launches;
        for (const auto* o : sel) {
            converged += o->convergence_time ? 1 : 0;
            faults += o->faults.size();
            launches.push_back(o->launches);
        }
        total += sel.size();
        converged_total += converged;
        out << fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n", run, to_string(v), sel.size(), converged,
                           fmt_median_iqr(times(sel), "{:.1f}"), fmt_median_iqr(variances(sel), "{:.5f}"),
                           median(launches), faults);
    }
    out << fmt::format("\nConverged: {}/{} ({:.1f}%)\n", converged_total, total,
                       total ? 100.0 * static_cast<double>(converged_total) / static_cast<double>(total) : 0.0);

    std::vector<std::string> comparisons;
    std::vector<std::string> runs;
    for (const auto& g : groups) {
        if (std::find(runs.begin(), runs.end(), g.first) == runs.end()) runs.push_back(g.first);
    }
    for (const auto& run : runs) {
        const auto k = select(run, PolicyVariant::Kalman);
        const auto t5 = select(run, PolicyVariant::T5);
        const auto t0 = select(run, PolicyVariant::T0);
        if (!k.empty() && !t5.empty()) {
            const auto r = rank_sum_less(times(k), times(t5));
            comparisons.push_back(fmt::format("- {}: convergence time K < T5: medians {:.1f} s vs {:.1f} s, U = {:.1f}, "
                                              "one-sided p = {:.3g}",
                                              run, median(times(k)), median(times(t5)), r.u, r.p_value));
        }
        if (!k.empty() && !t0.empty() && !variances(k).empty() && !variances(t0).empty()) {
            const auto r = rank_sum_less(variances(k), variances(t0));
            comparisons.push_back(fmt::format("- {}: position variance K < T0: medians {:.5f} vs {:.5f} m^2, "
                                              "U = {:.1f}, one-sided p = {:.3g}",
                                              run, median(variances(k)), median(variances(t0)), r.u, r.p_value));
        }
    }
    if (!comparisons.empty()) {
        out << "\n## Variant comparisons (rank-sum test)\n\n";
        for (const auto& c : comparisons) out << c << '\n';
    }

    out << "\n## Seeds\n\n";
    for (const auto& [run, v] : groups) {
        const auto sel = select(run, v);
        std::uint64_t lo = sel.front()->seed;
        std::uint64_t hi = lo;
        for (const auto* o : sel) {
            lo = std::min(lo, o->seed);
            hi = std::max(hi, o->seed);
        }
        out << fmt::format("- {} {}: {}\n", run, to_string(v), lo == hi ? fmt::format("{}", lo)
                                                                          : fmt::format("{} .. {}", lo, hi));
    }

    out << "\n## Faults\n\n";
    bool any = false;
    for (const auto& o : result.outcomes) {
        for (const auto& f : o.faults) {
            out << fmt::format("- {}: {}\n", run_stem(o.run, o.variant, o.replicate), f);
            any = true;
        }
    }
    if (!any) out << "none\n";
}

void write_batch_artifacts(const BatchResult& result) {
    std::ofstream summary(result.directory / "summary.md", std::ios::binary);
    write_summary(result, summary);
    std::ofstream seeds(result.directory / "seeds.csv", std::ios::binary);
    seeds << "run,variant,replicate,seed\n";
    for (const auto& o : result.outcomes) {
        seeds << fmt::format("{},{},{},{}\n", o.run, to_string(o.variant), o.replicate, o.seed);
    }
}

}  // namespace uchain
