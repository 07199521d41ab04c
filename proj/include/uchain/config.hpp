#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uchain/geometry.hpp"
#include "uchain/simengine.hpp"

namespace uchain {

/// Config or environment file problem. what() reads "file:line:column: message".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& origin, int line, int column, const std::string& message);

    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// One scenario of a config file and the policy variants it is run under.
struct RunSpec {
    ScenarioConfig scenario;
    std::vector<PolicyVariant> variants;
};

struct BatchConfig {
    std::string name;
    std::filesystem::path source;
    std::vector<RunSpec> runs;
    int telemetry_port = 8008;
};

/// Parses a scenario config. Top-level keys are defaults for every entry of `runs`; without a
/// `runs` list the file describes a single run. Relative environment paths resolve against `base_dir`.
[[nodiscard]] BatchConfig parse_config(std::string_view text, const std::string& origin,
                                       const std::filesystem::path& base_dir);
[[nodiscard]] BatchConfig load_config(const std::filesystem::path& path);

/// Environment file: name, half_width, end_margin and a centerline polyline.
[[nodiscard]] Environment parse_environment(std::string_view text, const std::string& origin);
[[nodiscard]] Environment load_environment(const std::filesystem::path& path);

/// A bundled map name, or a path to an environment file (absolute, or relative to `base_dir`).
/// Throws std::invalid_argument when neither matches.
[[nodiscard]] std::shared_ptr<const Environment> resolve_environment(const std::string& ref,
                                                                     const std::filesystem::path& base_dir);

struct EnvironmentListing {
    std::string name;
    std::string source;  // "builtin" or the file path
    double length = 0.0;
};

/// Bundled maps followed by every *.yaml file in `dir` (sorted by file name) that parses.
[[nodiscard]] std::vector<EnvironmentListing> list_environments(const std::filesystem::path& dir);

}  // namespace uchain
