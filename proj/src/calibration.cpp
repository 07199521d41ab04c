#include "uchain/calibration.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <map>
#include <string_view>
#include <utility>

namespace uchain {

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line_no, std::string_view column) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw CalibrationError(fmt::format("line {}: bad {} value '{}'", line_no, column, text));
    }
    return value;
}

}  // namespace

std::vector<LinkObservation> read_link_observations(std::istream& log) {
    std::string line;
    if (!std::getline(log, line)) throw CalibrationError("empty log");
    const auto header = split(line);
    auto column = [&header](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw CalibrationError(fmt::format("log header lacks column '{}'", name));
    };
    const auto c_tick = column("tick");
    const auto c_agent = column("agent_id");
    const auto c_link = column("link_id");
    const auto c_raw = column("raw_q");
    const auto c_vel = column("velocity");
    const auto c_event = column("event");

    struct LinkRow {
        long tick;
        std::string link;
        int base_side;
        std::optional<double> raw_q;
        double velocity;
    };
    std::vector<LinkRow> rows;
    std::map<std::pair<long, int>, double> velocity;
    std::size_t line_no = 1;
    while (std::getline(log, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw CalibrationError(fmt::format("line {}: expected {} fields, got {}", line_no, header.size(), f.size()));
        }
        if (!f[c_event].empty()) continue;
        const auto tick = parse_number<long>(f[c_tick], line_no, "tick");
        const auto agent = parse_number<int>(f[c_agent], line_no, "agent_id");
        const auto v = parse_number<double>(f[c_vel], line_no, "velocity");
        velocity[{tick, agent}] = v;
        if (f[c_link].empty()) continue;
        const auto dash = f[c_link].find('-');
        if (dash == std::string_view::npos) throw CalibrationError(fmt::format("line {}: bad link_id", line_no));
        LinkRow row{tick, std::string(f[c_link]), parse_number<int>(f[c_link].substr(dash + 1), line_no, "link_id"),
                    std::nullopt, v};
        if (!f[c_raw].empty()) row.raw_q = parse_number<double>(f[c_raw], line_no, "raw_q");
        rows.push_back(std::move(row));
    }

    std::vector<LinkObservation> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        const auto it = velocity.find({r.tick, r.base_side});
        if (it == velocity.end()) {
            throw CalibrationError(fmt::format("no state row for agent {} at tick {}", r.base_side, r.tick));
        }
        out.push_back({r.link, r.tick, r.raw_q, r.velocity - it->second});
    }
    return out;
}

CalibrationFit fit_separation_gain(const std::vector<LinkObservation>& observations) {
    struct Series {
        std::vector<double> u_sum;
        std::vector<double> q;
    };
    std::map<std::string, Series> links;
    std::map<std::string, double> accumulated;
    for (const auto& o : observations) {
        double& acc = accumulated[o.link];
        if (o.raw_q) {
            links[o.link].u_sum.push_back(acc);
            links[o.link].q.push_back(*o.raw_q);
        }
        acc += o.separation_rate;
    }

    CalibrationFit fit;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [name, s] : links) {
        fit.samples += s.q.size();
        const auto m = static_cast<double>(s.q.size());
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            mx += s.u_sum[i] / m;
            my += s.q[i] / m;
        }
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            sxy += (s.u_sum[i] - mx) * (s.q[i] - my);
            sxx += (s.u_sum[i] - mx) * (s.u_sum[i] - mx);
        }
    }
    fit.links = links.size();
    if (fit.samples < 3) throw CalibrationError("too few link samples to fit");
    if (!(sxx > 0.0)) throw CalibrationError("degenerate log: link separation never changes (zero velocity throughout)");
    fit.A = sxy / sxx;

    double sse = 0.0;
    for (const auto& [name, s] : links) {
        const auto m = static_cast<double>(s.q.size());
        double intercept = 0.0;
        for (std::size_t i = 0; i < s.q.size(); ++i) intercept += (s.q[i] - fit.A * s.u_sum[i]) / m;
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            const double e = s.q[i] - intercept - fit.A * s.u_sum[i];
            sse += e * e;
        }
    }
    fit.residual = std::sqrt(sse / static_cast<double>(fit.samples));
    return fit;
}

}  // namespace uchain
