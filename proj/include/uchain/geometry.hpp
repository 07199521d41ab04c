#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uchain {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
    constexpr bool operator==(const Vec2&) const = default;

    [[nodiscard]] constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    [[nodiscard]] constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
    [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

[[nodiscard]] inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Unit vector at `angle` radians from +x.
[[nodiscard]] inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Wraps an angle to (-pi, pi].
[[nodiscard]] double wrap_angle(double angle);

struct Segment {
    Vec2 a;
    Vec2 b;

    [[nodiscard]] double length() const { return distance(a, b); }
    constexpr bool operator==(const Segment&) const = default;
};

struct Pose {
    Vec2 position;
    double heading = 0.0;  // radians, kept in (-pi, pi]
};

/// Maximum range of the time-of-flight sensors, meters.
inline constexpr double kSensorRange = 2.0;
/// Half of the 27 degree detection cone.
inline constexpr double kConeHalfAngle = 13.5 * std::numbers::pi / 180.0;
/// Sensors sit on the diagonals: +-45 and +-135 degrees from the heading.
inline constexpr double kSensorAngle = std::numbers::pi / 4.0;
/// Search radius around the centerline that still counts as "inside the tunnel".
inline constexpr double kTunnelTolerance = 2.0;

struct RangeReading {
    double distance = kSensorRange;
    bool max_range = true;
};

/// Readings of the four diagonal sensors. N = front, S = rear, W = left, E = right.
struct RangeReadings {
    RangeReading nw;
    RangeReading ne;
    RangeReading sw;
    RangeReading se;

    /// Same readings seen by a drone flying tail-first: the rear sensors become the front ones.
    [[nodiscard]] RangeReadings reversed() const { return {se, sw, ne, nw}; }
};

/// Result of projecting a point onto the centerline.
struct Projection {
    double abscissa = 0.0;  // arc length from the base end, meters
    double offset = 0.0;    // signed lateral offset, positive to the left of the tangent
    double distance = 0.0;  // unsigned distance to the closest centerline point
};

class OutsideTunnel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Planar tunnel: zero-thickness wall segments plus the centerline the chain orders itself along.
class Environment {
public:
    Environment(std::string name, std::vector<Segment> walls, std::vector<Vec2> centerline, Pose spawn);

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] std::span<const Segment> walls() const { return walls_; }
    [[nodiscard]] std::span<const Vec2> centerline() const { return centerline_; }
    [[nodiscard]] const Pose& spawn() const { return spawn_; }
    [[nodiscard]] double length() const { return cumulative_.back(); }

    /// Closest centerline point; no range check.
    [[nodiscard]] Projection project(Vec2 p) const;
    /// Centerline point at arc length `s`, clamped to [0, length()].
    [[nodiscard]] Vec2 point_at(double s) const;
    /// Unit tangent direction (radians) of the centerline at arc length `s`.
    [[nodiscard]] double heading_at(double s) const;
    /// Arc length of every centerline vertex.
    [[nodiscard]] std::span<const double> vertex_abscissae() const { return cumulative_; }

private:
    std::string name_;
    std::vector<Segment> walls_;
    std::vector<Vec2> centerline_;
    std::vector<double> cumulative_;
    Pose spawn_;
};

/// Builds a constant-width corridor around `centerline` with mitred corners and
/// end caps `end_margin` meters beyond each end. Spawn is the first centerline point.
[[nodiscard]] Environment make_corridor(std::string name, std::vector<Vec2> centerline, double half_width,
                                        double end_margin = 0.5);

/// Bundled maps: "straight" (30 m), "l_corridor" (2 x 15 m), "s_corridor" (3 x 10 m).
[[nodiscard]] std::vector<std::string> builtin_environment_names();
[[nodiscard]] Environment builtin_environment(const std::string& name);

/// Distance along a single ray to the nearest wall, clamped to kSensorRange.
[[nodiscard]] RangeReading cast_ray(const Environment& env, Vec2 origin, double angle);

/// Four diagonal cone sensors, each the minimum over 3 rays (center and cone edges).
[[nodiscard]] RangeReadings raycast_ranges(const Environment& env, const Pose& pose);

/// Number of walls hit by the open segment (p1, p2). Grazing a wall endpoint counts.
[[nodiscard]] int wall_crossings(const Environment& env, Vec2 p1, Vec2 p2);

/// Arc length of the closest centerline point; throws OutsideTunnel beyond kTunnelTolerance.
[[nodiscard]] double arc_position(const Environment& env, Vec2 p);

/// True when the closed segments intersect (including touching).
[[nodiscard]] bool segments_intersect(const Segment& s1, const Segment& s2);

}  // namespace uchain
