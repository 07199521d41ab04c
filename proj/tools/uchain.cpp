#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "uchain/calibration.hpp"
#include "uchain/config.hpp"
#include "uchain/runner.hpp"
#include "uchain/telemetry.hpp"

namespace {

std::atomic<bool> interrupted{false};

std::filesystem::path output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("UCHAIN_OUT"); env && *env) return env;
    return "out";
}

int serve(const uchain::BatchConfig& config, const uchain::BatchOptions& options, int port, double time_scale) {
    if (config.runs.size() != 1) {
        std::cerr << fmt::format("error: --serve needs a config with a single run ('{}' has {})\n", config.name,
                                 config.runs.size());
        return 2;
    }
    const auto& spec = config.runs.front();
    uchain::ScenarioConfig scenario = spec.scenario;
    if (options.seed) scenario.seed = *options.seed;
    scenario.variant = options.variant.value_or(spec.variants.front());

    uchain::Simulation sim(scenario, 0);
    uchain::TelemetryServer server(sim, {static_cast<unsigned short>(port >= 0 ? port : config.telemetry_port), 10.0,
                                         time_scale});
    server.start();
    std::cout << fmt::format("serving '{}' ({}, variant {}) on ws://0.0.0.0:{}/ws\n", scenario.name,
                             scenario.env->name(), uchain::to_string(scenario.variant), server.port())
              << std::flush;
    std::signal(SIGINT, [](int) { interrupted = true; });
    std::signal(SIGTERM, [](int) { interrupted = true; });
    while (!server.finished() && !interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();

    const auto dir = options.out_dir / config.name / "logs";
    std::filesystem::create_directories(dir);
    const auto path = dir / (uchain::run_stem(scenario.name, scenario.variant, 0) + ".csv");
    std::ofstream log(path, std::ios::binary);
    sim.write_event_log(log);
    std::cout << fmt::format("stopped at t = {:.1f} s, event log in {}\n", sim.world().time(), path.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"U-Chain relay-chain simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the scenarios of a config file");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::string variant_text;
    std::string out_flag;
    bool serve_flag = false;
    int port = -1;
    double time_scale = 1.0;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    run->add_option("config", config_path, "Scenario config (YAML)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Base seed; replicate r uses seed + r");
    run->add_option("--replicates", replicates, "Replicates per run and variant")->check(CLI::PositiveNumber);
    run->add_option("--variant", variant_text, "Only run this variant")->check(CLI::IsMember({"T0", "T5", "K"}));
    run->add_option("--out", out_flag, "Output root (default: $UCHAIN_OUT or ./out)");
    run->add_option("--jobs", jobs, "Worker threads for replicates")->check(CLI::PositiveNumber);
    run->add_flag("--serve", serve_flag, "Run replicate 0 in real time behind the telemetry socket");
    run->add_option("--port", port, "Telemetry port (default: the config's, else 8008)")->check(CLI::Range(0, 65535));
    run->add_option("--time-scale", time_scale, "Simulated seconds per wall-clock second with --serve")
        ->check(CLI::PositiveNumber);

    auto* calibrate = app.add_subcommand("calibrate-a", "Fit the Kalman separation gain A from an event log");
    std::string log_path;
    calibrate->add_option("log", log_path, "Event log CSV")->required()->check(CLI::ExistingFile);

    auto* list = app.add_subcommand("list-envs", "List bundled maps and environment files");
    std::string envs_dir = "envs";
    list->add_option("--dir", envs_dir, "Directory of environment files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const uchain::BatchConfig config = uchain::load_config(config_path);
            uchain::BatchOptions options;
            options.seed = seed;
            options.replicates = replicates;
            if (!variant_text.empty()) options.variant = uchain::parse_variant(variant_text);
            options.out_dir = output_root(out_flag);
            options.jobs = jobs;
            if (serve_flag) return serve(config, options, port, time_scale);

            const auto result = uchain::run_batch(config, options);
            uchain::write_batch_artifacts(result);
            uchain::write_summary(result, std::cout);
            std::cout << fmt::format("\nartifacts in {}\n", result.directory.string());
            return 0;
        }
        if (*calibrate) {
            std::ifstream in(log_path);
            const auto fit = uchain::fit_separation_gain(uchain::read_link_observations(in));
            std::cout << fmt::format("A = {:.6f} per tick per m/s (residual RMS {:.4f}, {} samples over {} links)\n",
                                     fit.A, fit.residual, fit.samples, fit.links);
            return 0;
        }
        if (*list) {
            for (const auto& e : uchain::list_environments(envs_dir)) {
                std::cout << fmt::format("{:<16} {:>7.2f} m  {}\n", e.name, e.length, e.source);
            }
            return 0;
        }
    } catch (const uchain::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const uchain::CalibrationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
