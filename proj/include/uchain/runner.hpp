#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uchain/config.hpp"
#include "uchain/simengine.hpp"

namespace uchain {

struct BatchOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::optional<PolicyVariant> variant;
    std::filesystem::path out_dir;  // artifacts land in out_dir / <config name>
    unsigned jobs = 1;
    bool write_logs = true;
};

/// What is kept of one replicate once its world is gone.
struct RunOutcome {
    std::string run;
    PolicyVariant variant = PolicyVariant::Kalman;
    int replicate = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    std::optional<double> convergence_time;
    double position_variance = 0.0;
    int launches = 0;
    int airborne_relays = 0;
    double final_min_quality = 0.0;
    std::vector<double> final_abscissae;
    std::vector<double> final_link_quality;
    int wall_faults = 0;
    int order_faults = 0;
    int near_collisions = 0;
    std::vector<std::string> faults;  // "t=12.4 agent 2 fault:wall"
    std::string log_file;             // relative to the batch directory
};

struct BatchResult {
    std::string name;
    std::filesystem::path directory;
    std::vector<RunOutcome> outcomes;  // run order, then variant, then replicate
};

/// File stem used for one replicate's artifacts.
[[nodiscard]] std::string run_stem(const std::string& run, PolicyVariant variant, int replicate);

/// Per-run metrics; `log` receives the event log when given.
[[nodiscard]] RunOutcome simulate(const ScenarioConfig& scenario, PolicyVariant variant, int replicate,
                                  std::ostream* log = nullptr);

/// Runs every (run, variant, replicate) cell on `jobs` worker threads. Each worker owns whole worlds,
/// so the artifacts do not depend on scheduling.
[[nodiscard]] BatchResult run_batch(const BatchConfig& config, const BatchOptions& options);

/// Median/IQR table per run and variant, rank-sum comparisons between variants, seeds and faults.
void write_summary(const BatchResult& result, std::ostream& out);

/// Writes summary.md and seeds.csv into the batch directory.
void write_batch_artifacts(const BatchResult& result);

}  // namespace uchain
