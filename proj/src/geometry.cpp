#include "uchain/geometry.hpp"

#include <algorithm>
#include <limits>

namespace uchain {

namespace {

constexpr double kEps = 1e-12;

int orientation(Vec2 a, Vec2 b, Vec2 c) {
    const double v = (b - a).cross(c - a);
    if (v > kEps) return 1;
    if (v < -kEps) return -1;
    return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return p.x <= std::max(a.x, b.x) + kEps && p.x >= std::min(a.x, b.x) - kEps &&
           p.y <= std::max(a.y, b.y) + kEps && p.y >= std::min(a.y, b.y) - kEps;
}

// Intersection of two infinite lines given as point + direction.
Vec2 line_intersection(Vec2 p, Vec2 r, Vec2 q, Vec2 s) {
    const double denom = r.cross(s);
    const double t = (q - p).cross(s) / denom;
    return p + r * t;
}

}  // namespace

double wrap_angle(double angle) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double a = std::fmod(angle, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

Environment::Environment(std::string name, std::vector<Segment> walls, std::vector<Vec2> centerline, Pose spawn)
    : name_(std::move(name)), walls_(std::move(walls)), centerline_(std::move(centerline)), spawn_(spawn) {
    if (centerline_.size() < 2) {
        throw std::invalid_argument("environment '" + name_ + "': centerline needs at least 2 points");
    }
    cumulative_.reserve(centerline_.size());
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < centerline_.size(); ++i) {
        const double len = distance(centerline_[i - 1], centerline_[i]);
        if (len <= 0.0) {
            throw std::invalid_argument("environment '" + name_ + "': repeated centerline point");
        }
        cumulative_.push_back(cumulative_.back() + len);
    }
    for (const auto& w : walls_) {
        if (w.length() <= 0.0) {
            throw std::invalid_argument("environment '" + name_ + "': zero-length wall segment");
        }
    }
    spawn_.heading = wrap_angle(spawn_.heading);
    if (project(spawn_.position).distance >= kTunnelTolerance) {
        throw std::invalid_argument("environment '" + name_ + "': spawn is too far from the centerline");
    }
}

Projection Environment::project(Vec2 p) const {
    Projection best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < centerline_.size(); ++i) {
        const Vec2 a = centerline_[i];
        const Vec2 ab = centerline_[i + 1] - a;
        const double len2 = ab.dot(ab);
        const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
        const Vec2 foot = a + ab * t;
        const double d = distance(p, foot);
        // Strict comparison keeps the earliest segment on ties, so abscissae never jump backwards.
        if (d < best.distance - 1e-12) {
            best.distance = d;
            best.abscissa = cumulative_[i] + t * std::sqrt(len2);
            const double side = ab.cross(p - a);
            best.offset = side >= 0.0 ? d : -d;
        }
    }
    return best;
}

Vec2 Environment::point_at(double s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    i = std::clamp<std::size_t>(i, 1, centerline_.size() - 1);
    const double seg = cumulative_[i] - cumulative_[i - 1];
    const double t = (s - cumulative_[i - 1]) / seg;
    return centerline_[i - 1] + (centerline_[i] - centerline_[i - 1]) * t;
}

double Environment::heading_at(double s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    i = std::clamp<std::size_t>(i, 1, centerline_.size() - 1);
    const Vec2 d = centerline_[i] - centerline_[i - 1];
    return std::atan2(d.y, d.x);
}

Environment make_corridor(std::string name, std::vector<Vec2> centerline, double half_width, double end_margin) {
    if (centerline.size() < 2) {
        throw std::invalid_argument("corridor needs at least 2 centerline points");
    }
    const std::size_t n = centerline.size();
    auto dir = [&](std::size_t i) {  // unit direction of segment i -> i+1
        const Vec2 d = centerline[i + 1] - centerline[i];
        return d * (1.0 / d.norm());
    };
    auto left_normal = [](Vec2 d) { return Vec2{-d.y, d.x}; };

    std::vector<Vec2> left;
    std::vector<Vec2> right;
    const Vec2 d0 = dir(0);
    const Vec2 start = centerline.front() - d0 * end_margin;
    left.push_back(start + left_normal(d0) * half_width);
    right.push_back(start - left_normal(d0) * half_width);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const Vec2 din = dir(i - 1);
        const Vec2 dout = dir(i);
        const Vec2 nin = left_normal(din);
        const Vec2 nout = left_normal(dout);
        left.push_back(line_intersection(centerline[i] + nin * half_width, din, centerline[i] + nout * half_width, dout));
        right.push_back(
            line_intersection(centerline[i] - nin * half_width, din, centerline[i] - nout * half_width, dout));
    }
    const Vec2 dn = dir(n - 2);
    const Vec2 end = centerline.back() + dn * end_margin;
    left.push_back(end + left_normal(dn) * half_width);
    right.push_back(end - left_normal(dn) * half_width);

    std::vector<Segment> walls;
    for (std::size_t i = 0; i + 1 < left.size(); ++i) {
        walls.push_back({left[i], left[i + 1]});
        walls.push_back({right[i], right[i + 1]});
    }
    walls.push_back({left.front(), right.front()});
    walls.push_back({left.back(), right.back()});

    const Pose spawn{centerline.front(), std::atan2(d0.y, d0.x)};
    return Environment(std::move(name), std::move(walls), std::move(centerline), spawn);
}

std::vector<std::string> builtin_environment_names() { return {"straight", "l_corridor", "s_corridor"}; }

Environment builtin_environment(const std::string& name) {
    constexpr double half_width = 1.0;
    if (name == "straight") {
        return make_corridor(name, {{0.0, 0.0}, {30.0, 0.0}}, half_width);
    }
    if (name == "l_corridor") {
        return make_corridor(name, {{0.0, 0.0}, {15.0, 0.0}, {15.0, 15.0}}, half_width);
    }
    if (name == "s_corridor") {
        return make_corridor(name, {{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}, {20.0, 10.0}}, half_width);
    }
    throw std::invalid_argument("unknown environment '" + name + "'");
}

RangeReading cast_ray(const Environment& env, Vec2 origin, double angle) {
    const Vec2 d = unit(angle);
    double best = kSensorRange;
    for (const auto& w : env.walls()) {
        const Vec2 e = w.b - w.a;
        const double denom = d.cross(e);
        if (std::abs(denom) < kEps) continue;
        const Vec2 ao = w.a - origin;
        const double t = ao.cross(e) / denom;
        const double u = ao.cross(d) / denom;
        if (t >= 0.0 && u >= 0.0 && u <= 1.0 && t < best) best = t;
    }
    return {best, best >= kSensorRange};
}

RangeReadings raycast_ranges(const Environment& env, const Pose& pose) {
    auto cone = [&](double center) {
        RangeReading out{kSensorRange, true};
        for (double offset : {-kConeHalfAngle, 0.0, kConeHalfAngle}) {
            const RangeReading r = cast_ray(env, pose.position, center + offset);
            if (r.distance < out.distance) out = r;
        }
        return out;
    };
    const double h = pose.heading;
    return {
        cone(h + kSensorAngle),
        cone(h - kSensorAngle),
        cone(h + 3.0 * kSensorAngle),
        cone(h - 3.0 * kSensorAngle),
    };
}

bool segments_intersect(const Segment& s1, const Segment& s2) {
    const int o1 = orientation(s1.a, s1.b, s2.a);
    const int o2 = orientation(s1.a, s1.b, s2.b);
    const int o3 = orientation(s2.a, s2.b, s1.a);
    const int o4 = orientation(s2.a, s2.b, s1.b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(s1.a, s1.b, s2.a)) return true;
    if (o2 == 0 && on_segment(s1.a, s1.b, s2.b)) return true;
    if (o3 == 0 && on_segment(s2.a, s2.b, s1.a)) return true;
    if (o4 == 0 && on_segment(s2.a, s2.b, s1.b)) return true;
    return false;
}

int wall_crossings(const Environment& env, Vec2 p1, Vec2 p2) {
    int count = 0;
    for (const auto& w : env.walls()) {
        const int o1 = orientation(w.a, w.b, p1);
        const int o2 = orientation(w.a, w.b, p2);
        // The open segment must pass strictly from one side of the wall line to the other.
        if (o1 == 0 || o2 == 0 || o1 == o2) continue;
        const int o3 = orientation(p1, p2, w.a);
        const int o4 = orientation(p1, p2, w.b);
        if (o3 != o4) ++count;
    }
    return count;
}

double arc_position(const Environment& env, Vec2 p) {
    const Projection pr = env.project(p);
    if (pr.distance > kTunnelTolerance) {
        throw OutsideTunnel("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is " +
                            std::to_string(pr.distance) + " m from the centerline of '" + env.name() + "'");
    }
    return pr.abscissa;
}

}  // namespace uchain
