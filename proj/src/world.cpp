#include "crowdnav/world.hpp"

#include <algorithm>
#include <cmath>

namespace crowdnav {

Pose2D step_diff_drive(const Pose2D& pose, const Action& action, double dt) {
  Pose2D next = pose;
  if (std::abs(action.w) < 1e-9) {
    next.x += action.v * dt * std::cos(pose.theta);
    next.y += action.v * dt * std::sin(pose.theta);
    return next;
  }
  // Chord of the arc: length 2R sin(w dt / 2) along the mid-step heading.
  const double half_turn = 0.5 * action.w * dt;
  const double chord = 2.0 * (action.v / action.w) * std::sin(half_turn);
  const double mid_heading = pose.theta + half_turn;
  next.x += chord * std::cos(mid_heading);
  next.y += chord * std::sin(mid_heading);
  next.theta = normalize_angle(pose.theta + action.w * dt);
  return next;
}

namespace {

double rect_signed_distance(const Rect& r, Vec2 p) {
  const double dx = std::abs(p.x - r.center.x) - r.half_extents.x;
  const double dy = std::abs(p.y - r.center.y) - r.half_extents.y;
  const double outside = std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  const double inside = std::min(std::max(dx, dy), 0.0);
  return outside + inside;
}

}  // namespace

double signed_distance(const StaticObstacle& obstacle, Vec2 p) {
  if (const auto* c = std::get_if<Circle>(&obstacle.shape)) {
    return norm(p - c->center) - c->radius;
  }
  return rect_signed_distance(std::get<Rect>(obstacle.shape), p);
}

Vec2 closest_point(const StaticObstacle& obstacle, Vec2 p) {
  if (const auto* c = std::get_if<Circle>(&obstacle.shape)) {
    const Vec2 d = p - c->center;
    const double n = norm(d);
    if (n == 0.0) return c->center + Vec2{c->radius, 0.0};
    return c->center + d * (c->radius / n);
  }
  const auto& r = std::get<Rect>(obstacle.shape);
  const Vec2 lo = r.center - r.half_extents;
  const Vec2 hi = r.center + r.half_extents;
  Vec2 q{std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
  if (q == p) {
    // Inside: snap to the nearest edge.
    const double to_left = p.x - lo.x;
    const double to_right = hi.x - p.x;
    const double to_bottom = p.y - lo.y;
    const double to_top = hi.y - p.y;
    const double m = std::min({to_left, to_right, to_bottom, to_top});
    if (m == to_left) {
      q.x = lo.x;
    } else if (m == to_right) {
      q.x = hi.x;
    } else if (m == to_bottom) {
      q.y = lo.y;
    } else {
      q.y = hi.y;
    }
  }
  return q;
}

CollisionReport detect_collisions(const WorldState& world, std::size_t robot_index) {
  CollisionReport report;
  const AgentBody& robot = world.robots.at(robot_index);
  const Vec2 p = robot.position();
  const double r = robot.radius;

  for (const Pedestrian& ped : world.pedestrians) {
    const double center_dist = norm(ped.body.position() - p);
    if (center_dist < r + ped.body.radius) report.collided = true;
    for (const Circle& leg : ped.legs) {
      if (norm(leg.center - p) < r + leg.radius) report.collided = true;
    }
    report.d_min = std::min(report.d_min, std::max(0.0, center_dist - r - ped.body.radius));
  }
  for (std::size_t j = 0; j < world.robots.size(); ++j) {
    if (j == robot_index) continue;
    const AgentBody& other = world.robots[j];
    if (norm(other.position() - p) < r + other.radius) report.collided = true;
  }
  for (const StaticObstacle& obs : world.obstacles) {
    if (signed_distance(obs, p) < r) report.collided = true;
  }
  const Bounds& b = world.bounds;
  if (p.x - r < b.min_x || p.x + r > b.max_x || p.y - r < b.min_y || p.y + r > b.max_y) {
    report.collided = true;
  }
  return report;
}

std::optional<double> ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = origin - center;
  const double c = abs_sq(oc) - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = dot(dir, oc);
  if (b > 0.0) return std::nullopt;  // pointing away
  const double disc = b * b - c;
  if (disc < -1e-12) return std::nullopt;
  return -b - std::sqrt(std::max(disc, 0.0));
}

std::optional<double> ray_rect(Vec2 origin, Vec2 dir, const Rect& rect) {
  const Vec2 lo = rect.center - rect.half_extents;
  const Vec2 hi = rect.center + rect.half_extents;
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
  const double o[2] = {origin.x, origin.y};
  const double d[2] = {dir.x, dir.y};
  const double l[2] = {lo.x, lo.y};
  const double h[2] = {hi.x, hi.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < l[axis] || o[axis] > h[axis]) return std::nullopt;
      continue;
    }
    double t0 = (l[axis] - o[axis]) / d[axis];
    double t1 = (h[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  return t_near;
}

double raycast(const WorldState& world, Vec2 origin, double angle, double max_range,
               std::optional<std::size_t> ignore_robot) {
  const Vec2 dir = unit_from_angle(angle);
  double best = max_range;
  auto consider = [&](std::optional<double> t) {
    if (t && *t < best) best = *t;
  };
  for (const StaticObstacle& obs : world.obstacles) {
    if (const auto* c = std::get_if<Circle>(&obs.shape)) {
      consider(ray_circle(origin, dir, c->center, c->radius));
    } else {
      consider(ray_rect(origin, dir, std::get<Rect>(obs.shape)));
    }
  }
  for (const Pedestrian& ped : world.pedestrians) {
    for (const Circle& leg : ped.legs) consider(ray_circle(origin, dir, leg.center, leg.radius));
  }
  for (std::size_t j = 0; j < world.robots.size(); ++j) {
    if (ignore_robot && *ignore_robot == j) continue;
    consider(ray_circle(origin, dir, world.robots[j].position(), world.robots[j].radius));
  }
  return best;
}

}  // namespace crowdnav
