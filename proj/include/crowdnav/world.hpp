#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

/// Linear and angular velocity command for a differential-drive robot.
struct Action {
  double v = 0.0;  // m/s, never negative (no reversing)
  double w = 0.0;  // rad/s

  bool operator==(const Action&) const = default;
};

inline constexpr double kMaxLinearSpeed = 0.6;
inline constexpr double kMaxAngularSpeed = 0.9;
inline constexpr double kRobotRadius = 0.17;
inline constexpr double kMaxPedestrianSpeed = 0.5;
inline constexpr double kPedestrianRadius = 0.3;

enum class AgentKind { robot, pedestrian };

struct AgentBody {
  Pose2D pose;
  Vec2 velocity;
  double radius = kRobotRadius;
  AgentKind kind = AgentKind::robot;

  Vec2 position() const { return pose.position(); }
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

/// Axis-aligned rectangle.
struct Rect {
  Vec2 center;
  Vec2 half_extents;
};

struct StaticObstacle {
  std::variant<Circle, Rect> shape;
};

struct Bounds {
  double min_x = -6.0;
  double min_y = -6.0;
  double max_x = 6.0;
  double max_y = 6.0;
};

/// Walking animation state. Phase advances with distance walked.
struct GaitState {
  double phase = 0.0;  // [0, 2pi)
  double stride_amplitude = 0.12;
  double stride_length = 0.5;
  double leg_radius = 0.08;
};

struct Pedestrian {
  AgentBody body;
  GaitState gait;
  std::array<Circle, 2> legs;
  Vec2 start;
  Vec2 goal;
  int id = 0;
};

struct WorldState {
  std::vector<AgentBody> robots;
  std::vector<Pedestrian> pedestrians;
  std::vector<StaticObstacle> obstacles;
  Bounds bounds;
  double time = 0.0;
};

/// Exact unicycle integration over one step; theta is renormalized.
Pose2D step_diff_drive(const Pose2D& pose, const Action& action, double dt);

struct CollisionReport {
  bool collided = false;
  /// Surface-to-surface distance to the closest pedestrian, clamped at zero.
  /// Infinity when there are no pedestrians.
  double d_min = std::numeric_limits<double>::infinity();
};

CollisionReport detect_collisions(const WorldState& world, std::size_t robot_index);

/// Signed distance from a point to the boundary of a shape (negative inside).
double signed_distance(const StaticObstacle& obstacle, Vec2 p);
/// Point on the obstacle boundary closest to p.
Vec2 closest_point(const StaticObstacle& obstacle, Vec2 p);

/// Distance along a ray to the first obstacle, pedestrian leg, or robot disk.
/// The robot at `ignore_robot` (the sensor carrier) is skipped. Returns
/// max_range when nothing is hit. World bounds are not visible.
double raycast(const WorldState& world, Vec2 origin, double angle, double max_range,
               std::optional<std::size_t> ignore_robot = std::nullopt);

// Ray/shape primitives. Return the entry distance along a unit direction, or
// nullopt if the ray misses. Origins inside the shape yield 0.
std::optional<double> ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius);
std::optional<double> ray_rect(Vec2 origin, Vec2 dir, const Rect& rect);

}  // namespace crowdnav
