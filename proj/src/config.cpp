#include "uchain/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace uchain {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
        const YAML::Mark m = node.Mark();
        throw ConfigError(origin_, m.line + 1, m.column + 1, message);
    }

    template <typename T>
    T as(const YAML::Node& node, std::string_view what) const {
        if (!node.IsScalar()) fail(node, fmt::format("{}: expected a {}", what, type_name<T>()));
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, fmt::format("{}: expected a {}, got '{}'", what, type_name<T>(), node.Scalar()));
        }
    }

    void expect_map(const YAML::Node& node, std::string_view what) const {
        if (!node.IsMap()) fail(node, fmt::format("{}: expected a mapping", what));
    }

    void expect_sequence(const YAML::Node& node, std::string_view what) const {
        if (!node.IsSequence()) fail(node, fmt::format("{}: expected a list", what));
    }

    /// Calls the handler registered for every key; unknown keys are errors.
    void fields(const YAML::Node& map, std::string_view section,
                const std::map<std::string, std::function<void(const YAML::Node&)>, std::less<>>& handlers) const {
        expect_map(map, section);
        for (const auto& kv : map) {
            const auto key = as<std::string>(kv.first, "key");
            const auto it = handlers.find(key);
            if (it == handlers.end()) {
                fail(kv.first, section.empty() ? fmt::format("unknown key '{}'", key)
                                               : fmt::format("unknown key '{}' in {}", key, section));
            }
            it->second(kv.second);
        }
    }

    [[nodiscard]] const std::string& origin() const { return origin_; }

private:
    template <typename T>
    static std::string_view type_name() {
        if constexpr (std::is_same_v<T, bool>) {
            return "boolean";
        } else if constexpr (std::is_integral_v<T>) {
            return "integer";
        } else if constexpr (std::is_floating_point_v<T>) {
            return "number";
        } else {
            return "string";
        }
    }

    std::string origin_;
};

YAML::Node parse_yaml(std::string_view text, const std::string& origin) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError(origin, e.mark.line + 1, e.mark.column + 1, e.msg);
    }
}

PolicyVariant variant_from(const Reader& r, const YAML::Node& node) {
    const auto text = r.as<std::string>(node, "variant");
    const auto v = parse_variant(text);
    if (!v) r.fail(node, fmt::format("variant: unknown '{}' (expected T0, T5 or K)", text));
    return *v;
}

struct ScenarioReader {
    const Reader& r;
    const std::filesystem::path& base_dir;

    void apply(const YAML::Node& map, RunSpec& spec, bool top_level) const {
        ScenarioConfig& c = spec.scenario;
        std::map<std::string, std::function<void(const YAML::Node&)>, std::less<>> h{
            {"environment",
             [&](const YAML::Node& n) {
                 const auto ref = r.as<std::string>(n, "environment");
                 try {
                     c.env = resolve_environment(ref, base_dir);
                 } catch (const ConfigError&) {
                     throw;
                 } catch (const std::exception& e) {
                     r.fail(n, e.what());
                 }
             }},
            {"relays", [&](const YAML::Node& n) { c.relays = r.as<int>(n, "relays"); }},
            {"variant", [&](const YAML::Node& n) { spec.variants = {variant_from(r, n)}; }},
            {"variants",
             [&](const YAML::Node& n) {
                 r.expect_sequence(n, "variants");
                 if (n.size() == 0) r.fail(n, "variants: list is empty");
                 spec.variants.clear();
                 for (const auto& v : n) spec.variants.push_back(variant_from(r, v));
             }},
            {"T", [&](const YAML::Node& n) { c.T = r.as<double>(n, "T"); }},
            {"layout",
             [&](const YAML::Node& n) {
                 const auto text = r.as<std::string>(n, "layout");
                 const auto l = parse_layout(text);
                 if (!l) r.fail(n, fmt::format("layout: unknown '{}' (expected exploration, random or explicit)", text));
                 c.layout = *l;
             }},
            {"head_start", [&](const YAML::Node& n) { c.head_start = r.as<double>(n, "head_start"); }},
            {"relay_start",
             [&](const YAML::Node& n) {
                 r.expect_sequence(n, "relay_start");
                 c.relay_start.clear();
                 for (const auto& x : n) c.relay_start.push_back(r.as<double>(x, "relay_start"));
             }},
            {"horizon", [&](const YAML::Node& n) { c.horizon = r.as<double>(n, "horizon"); }},
            {"seed", [&](const YAML::Node& n) { c.seed = r.as<std::uint64_t>(n, "seed"); }},
            {"replicates", [&](const YAML::Node& n) { c.replicates = r.as<int>(n, "replicates"); }},
            {"manual_launch", [&](const YAML::Node& n) { c.manual_launch = r.as<bool>(n, "manual_launch"); }},
            {"head",
             [&](const YAML::Node& n) {
                 r.fields(n, "head",
                          {{"mode",
                            [&](const YAML::Node& m) {
                                const auto mode = r.as<std::string>(m, "head.mode");
                                if (mode != "scripted" && mode != "interactive") {
                                    r.fail(m, fmt::format("head.mode: unknown '{}' (expected scripted or interactive)",
                                                          mode));
                                }
                                c.head.interactive = mode == "interactive";
                            }},
                           {"speed", [&](const YAML::Node& m) { c.head.speed = r.as<double>(m, "head.speed"); }},
                           {"duration",
                            [&](const YAML::Node& m) { c.head.duration = r.as<double>(m, "head.duration"); }}});
             }},
            {"radio",
             [&](const YAML::Node& n) {
                 auto num = [&](double& field, const char* what) {
                     return [&field, what, this](const YAML::Node& m) { field = r.as<double>(m, what); };
                 };
                 r.fields(n, "radio",
                          {{"alpha_base", num(c.radio.alpha_base, "radio.alpha_base")},
                           {"alpha_max", num(c.radio.alpha_max, "radio.alpha_max")},
                           {"noise_variance", num(c.radio.noise_variance, "radio.noise_variance")},
                           {"packet_loss", num(c.radio.packet_loss_prob, "radio.packet_loss")},
                           {"s_min", num(c.radio.s_min, "radio.s_min")}});
             }},
            {"kalman",
             [&](const YAML::Node& n) {
                 r.fields(n, "kalman",
                          {{"A", [&](const YAML::Node& m) { c.kalman.A = r.as<double>(m, "kalman.A"); }},
                           {"Q", [&](const YAML::Node& m) { c.kalman.Q = r.as<double>(m, "kalman.Q"); }},
                           {"R", [&](const YAML::Node& m) { c.kalman.R = r.as<double>(m, "kalman.R"); }}});
             }},
            {"policy",
             [&](const YAML::Node& n) {
                 PolicyParams& p = c.policy;
                 auto num = [&](double& field, const char* what) {
                     return [&field, what, this](const YAML::Node& m) { field = r.as<double>(m, what); };
                 };
                 auto count = [&](int& field, const char* what) {
                     return [&field, what, this](const YAML::Node& m) { field = r.as<int>(m, what); };
                 };
                 r.fields(n, "policy",
                          {{"v_max", num(p.v_max, "policy.v_max")},
                           {"k_v", num(p.k_v, "policy.k_v")},
                           {"C_t", num(p.C_t, "policy.C_t")},
                           {"C_r", num(p.C_r, "policy.C_r")},
                           {"D", num(p.D, "policy.D")},
                           {"invalid_wall_ratio", num(p.invalid_wall_ratio, "policy.invalid_wall_ratio")},
                           {"launch_margin", num(p.launch_margin, "policy.launch_margin")},
                           {"max_lateral_speed", num(p.max_lateral_speed, "policy.max_lateral_speed")},
                           {"max_yaw_rate", num(p.max_yaw_rate, "policy.max_yaw_rate")},
                           {"retreat_speed", num(p.retreat_speed, "policy.retreat_speed")},
                           {"stop_distance", num(p.stop_distance, "policy.stop_distance")},
                           {"slow_distance", num(p.slow_distance, "policy.slow_distance")},
                           {"opening_memory_ticks", count(p.opening_memory_ticks, "policy.opening_memory_ticks")},
                           {"link_timeout_ticks", count(p.link_timeout_ticks, "policy.link_timeout_ticks")},
                           {"takeoff_ticks", count(p.takeoff_ticks, "policy.takeoff_ticks")}});
             }},
            {"metrics",
             [&](const YAML::Node& n) {
                 r.fields(n, "metrics",
                          {{"convergence_window",
                            [&](const YAML::Node& m) {
                                c.convergence_window = r.as<double>(m, "metrics.convergence_window");
                            }},
                           {"variance_window", [&](const YAML::Node& m) {
                                c.variance_window = r.as<double>(m, "metrics.variance_window");
                            }}});
             }},
        };
        if (top_level) {
            for (const char* key : {"name", "runs", "telemetry"}) h[key] = [](const YAML::Node&) {};
        } else {
            h["name"] = [&](const YAML::Node& n) { c.name = r.as<std::string>(n, "name"); };
        }
        r.fields(map, top_level ? "" : "run", h);
    }
};

}  // namespace

ConfigError::ConfigError(const std::string& origin, int line, int column, const std::string& message)
    : std::runtime_error(fmt::format("{}:{}:{}: {}", origin, line, column, message)), line_(line), column_(column) {}

BatchConfig parse_config(std::string_view text, const std::string& origin, const std::filesystem::path& base_dir) {
    const Reader r(origin);
    const YAML::Node root = parse_yaml(text, origin);
    if (!root.IsMap()) throw ConfigError(origin, 1, 1, "config must be a mapping");

    BatchConfig batch;
    batch.source = origin;
    batch.name = std::filesystem::path(origin).stem().string();

    std::optional<YAML::Node> runs;
    for (const auto& kv : root) {
        const auto key = r.as<std::string>(kv.first, "key");
        if (key == "name") {
            batch.name = r.as<std::string>(kv.second, "name");
        } else if (key == "runs") {
            r.expect_sequence(kv.second, "runs");
            if (kv.second.size() == 0) r.fail(kv.second, "runs: list is empty");
            runs.emplace(kv.second);
        } else if (key == "telemetry") {
            r.fields(kv.second, "telemetry",
                     {{"port", [&](const YAML::Node& n) {
                           batch.telemetry_port = r.as<int>(n, "telemetry.port");
                           if (batch.telemetry_port < 0 || batch.telemetry_port > 65535) {
                               r.fail(n, "telemetry.port: out of range");
                           }
                       }}});
        }
    }

    const ScenarioReader reader{r, base_dir};
    RunSpec base;
    base.variants = {PolicyVariant::Kalman};
    base.scenario.name = batch.name;
    reader.apply(root, base, true);

    auto finish = [&](RunSpec spec, const YAML::Node& at) {
        if (!spec.scenario.env) r.fail(at, "no environment given");
        try {
            spec.scenario.validate();
        } catch (const std::invalid_argument& e) {
            r.fail(at, e.what());
        }
        batch.runs.push_back(std::move(spec));
    };
    if (!runs) {
        finish(base, root);
    } else {
        for (const auto& entry : *runs) {
            RunSpec spec = base;
            spec.scenario.name = fmt::format("run{}", batch.runs.size());
            reader.apply(entry, spec, false);
            finish(std::move(spec), entry);
        }
    }
    std::vector<std::string> names;
    for (const auto& run : batch.runs) names.push_back(run.scenario.name);
    std::sort(names.begin(), names.end());
    if (const auto dup = std::adjacent_find(names.begin(), names.end()); dup != names.end()) {
        throw ConfigError(origin, 1, 1, fmt::format("run name '{}' is used twice", *dup));
    }
    return batch;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

BatchConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.string(), path.parent_path());
}

Environment parse_environment(std::string_view text, const std::string& origin) {
    const Reader r(origin);
    const YAML::Node root = parse_yaml(text, origin);
    if (!root.IsMap()) throw ConfigError(origin, 1, 1, "environment file must be a mapping");
    std::string name = std::filesystem::path(origin).stem().string();
    double half_width = 1.0;
    double end_margin = 0.5;
    std::vector<Vec2> centerline;
    std::optional<YAML::Node> centerline_node;
    r.fields(root, "",
             {{"name", [&](const YAML::Node& n) { name = r.as<std::string>(n, "name"); }},
              {"half_width", [&](const YAML::Node& n) { half_width = r.as<double>(n, "half_width"); }},
              {"end_margin", [&](const YAML::Node& n) { end_margin = r.as<double>(n, "end_margin"); }},
              {"centerline", [&](const YAML::Node& n) {
                   r.expect_sequence(n, "centerline");
                   centerline_node.emplace(n);
                   for (const auto& p : n) {
                       if (!p.IsSequence() || p.size() != 2) r.fail(p, "centerline: each point is [x, y]");
                       centerline.push_back({r.as<double>(p[0], "centerline x"), r.as<double>(p[1], "centerline y")});
                   }
               }}});
    if (!centerline_node) throw ConfigError(origin, 1, 1, "environment file lacks a centerline");
    try {
        return make_corridor(name, std::move(centerline), half_width, end_margin);
    } catch (const std::invalid_argument& e) {
        r.fail(*centerline_node, e.what());
    }
}

Environment load_environment(const std::filesystem::path& path) {
    return parse_environment(read_file(path), path.string());
}

std::shared_ptr<const Environment> resolve_environment(const std::string& ref, const std::filesystem::path& base_dir) {
    const auto names = builtin_environment_names();
    if (std::find(names.begin(), names.end(), ref) != names.end()) {
        return std::make_shared<const Environment>(builtin_environment(ref));
    }
    std::filesystem::path path(ref);
    if (path.is_relative()) path = base_dir / path;
    if (!std::filesystem::is_regular_file(path)) {
        throw std::invalid_argument(
            fmt::format("environment '{}' is neither a bundled map nor a file ({})", ref, path.string()));
    }
    return std::make_shared<const Environment>(load_environment(path));
}

std::vector<EnvironmentListing> list_environments(const std::filesystem::path& dir) {
    std::vector<EnvironmentListing> out;
    for (const auto& name : builtin_environment_names()) {
        out.push_back({name, "builtin", builtin_environment(name).length()});
    }
    if (!std::filesystem::is_directory(dir)) return out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".yaml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            const Environment env = load_environment(f);
            out.push_back({env.name(), f.string(), env.length()});
        } catch (const std::exception&) {
            // listed maps must load; broken files are skipped
        }
    }
    return out;
}

}  // namespace uchain
