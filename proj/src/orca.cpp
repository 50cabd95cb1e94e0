// ORCA half-plane construction and the incremental 2D/3D linear programs,
// following the formulation used by the RVO2 library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "crowdnav/pedestrians.hpp"

namespace crowdnav {
namespace {

constexpr double kEps = 1e-5;
constexpr int kCircleSides = 16;

struct ObstacleVertex {
  Vec2 point;
  Vec2 unit_dir;  // toward the next vertex
  bool convex = true;
  std::size_t next = 0;
  std::size_t prev = 0;
};

// Counter-clockwise polygons, all vertices in one flat array.
std::vector<ObstacleVertex> build_polygons(std::span<const StaticObstacle> obstacles) {
  std::vector<ObstacleVertex> verts;
  for (const StaticObstacle& obs : obstacles) {
    std::vector<Vec2> pts;
    if (const auto* c = std::get_if<Circle>(&obs.shape)) {
      // Circumscribed polygon so the circle is fully covered.
      const double r = c->radius / std::cos(std::numbers::pi / kCircleSides);
      for (int k = 0; k < kCircleSides; ++k) {
        pts.push_back(c->center + unit_from_angle(2.0 * std::numbers::pi * k / kCircleSides) * r);
      }
    } else {
      const auto& rect = std::get<Rect>(obs.shape);
      const Vec2 lo = rect.center - rect.half_extents;
      const Vec2 hi = rect.center + rect.half_extents;
      pts = {lo, {hi.x, lo.y}, hi, {lo.x, hi.y}};
    }
    const std::size_t base = verts.size();
    const std::size_t n = pts.size();
    for (std::size_t k = 0; k < n; ++k) {
      ObstacleVertex v;
      v.point = pts[k];
      v.unit_dir = normalized(pts[(k + 1) % n] - pts[k]);
      v.next = base + (k + 1) % n;
      v.prev = base + (k + n - 1) % n;
      verts.push_back(v);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = pts[(k + n - 1) % n];
      const Vec2 b = pts[k];
      const Vec2 c = pts[(k + 1) % n];
      verts[base + k].convex = det(a - c, b - a) >= 0.0;  // leftOf(a, b, c) >= 0
    }
  }
  return verts;
}

double left_of(Vec2 a, Vec2 b, Vec2 c) { return det(a - c, b - a); }

double dist_sq_point_segment(Vec2 a, Vec2 b, Vec2 c) {
  const double r = dot(c - a, b - a) / abs_sq(b - a);
  if (r < 0.0) return abs_sq(c - a);
  if (r > 1.0) return abs_sq(c - b);
  return abs_sq(c - (a + r * (b - a)));
}

void add_obstacle_lines(const OrcaAgent& agent, std::span<const StaticObstacle> obstacles,
                        const OrcaParams& params, std::vector<OrcaLine>& lines) {
  const std::vector<ObstacleVertex> verts = build_polygons(obstacles);
  const double range = params.time_horizon_obstacles * params.max_speed + agent.radius;
  const double range_sq = range * range;

  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const ObstacleVertex& o1 = verts[i];
    const ObstacleVertex& o2 = verts[o1.next];
    const double agent_left = left_of(o1.point, o2.point, agent.position);
    const double d = dist_sq_point_segment(o1.point, o2.point, agent.position);
    if (agent_left < 0.0 && d < range_sq) near.emplace_back(d, i);
  }
  std::stable_sort(near.begin(), near.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const double inv_th = 1.0 / params.time_horizon_obstacles;
  const double radius = agent.radius;
  const double radius_sq = radius * radius;
  const Vec2 position = agent.position;
  const Vec2 velocity = agent.velocity;

  for (const auto& [unused, idx] : near) {
    const ObstacleVertex* o1 = &verts[idx];
    const ObstacleVertex* o2 = &verts[o1->next];
    const Vec2 rel1 = o1->point - position;
    const Vec2 rel2 = o2->point - position;

    bool covered = false;
    for (const OrcaLine& l : lines) {
      if (det(inv_th * rel1 - l.point, l.direction) - inv_th * radius >= -kEps &&
          det(inv_th * rel2 - l.point, l.direction) - inv_th * radius >= -kEps) {
        covered = true;
        break;
      }
    }
    if (covered) continue;

    const double dist_sq1 = abs_sq(rel1);
    const double dist_sq2 = abs_sq(rel2);
    const Vec2 obstacle_vec = o2->point - o1->point;
    const double s = dot(-rel1, obstacle_vec) / abs_sq(obstacle_vec);
    const double dist_sq_line = abs_sq(-rel1 - s * obstacle_vec);

    OrcaLine line;
    if (s < 0.0 && dist_sq1 <= radius_sq) {
      if (o1->convex) {
        line.point = {};
        line.direction = normalized({-rel1.y, rel1.x});
        lines.push_back(line);
      }
      continue;
    }
    if (s > 1.0 && dist_sq2 <= radius_sq) {
      if (o2->convex && det(rel2, o2->unit_dir) >= 0.0) {
        line.point = {};
        line.direction = normalized({-rel2.y, rel2.x});
        lines.push_back(line);
      }
      continue;
    }
    if (s >= 0.0 && s < 1.0 && dist_sq_line <= radius_sq) {
      line.point = {};
      line.direction = -o1->unit_dir;
      lines.push_back(line);
      continue;
    }

    Vec2 left_leg;
    Vec2 right_leg;
    if (s < 0.0 && dist_sq_line <= radius_sq) {
      // Seen obliquely: the left vertex alone defines the cone.
      if (!o1->convex) continue;
      o2 = o1;
      const double leg1 = std::sqrt(dist_sq1 - radius_sq);
      left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      right_leg = Vec2{rel1.x * leg1 + rel1.y * radius, -rel1.x * radius + rel1.y * leg1} / dist_sq1;
    } else if (s > 1.0 && dist_sq_line <= radius_sq) {
      if (!o2->convex) continue;
      o1 = o2;
      const double leg2 = std::sqrt(dist_sq2 - radius_sq);
      left_leg = Vec2{rel2.x * leg2 - rel2.y * radius, rel2.x * radius + rel2.y * leg2} / dist_sq2;
      right_leg = Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
    } else {
      if (o1->convex) {
        const double leg1 = std::sqrt(dist_sq1 - radius_sq);
        left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      } else {
        left_leg = -o1->unit_dir;
      }
      if (o2->convex) {
        const double leg2 = std::sqrt(dist_sq2 - radius_sq);
        right_leg =
            Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
      } else {
        right_leg = o1->unit_dir;
      }
    }

    // A leg pointing into the neighboring edge is replaced by that edge.
    const ObstacleVertex& left_neighbor = verts[o1->prev];
    bool left_foreign = false;
    bool right_foreign = false;
    if (o1->convex && det(left_leg, -left_neighbor.unit_dir) >= 0.0) {
      left_leg = -left_neighbor.unit_dir;
      left_foreign = true;
    }
    if (o2->convex && det(right_leg, o2->unit_dir) <= 0.0) {
      right_leg = o2->unit_dir;
      right_foreign = true;
    }

    const Vec2 left_cutoff = inv_th * (o1->point - position);
    const Vec2 right_cutoff = inv_th * (o2->point - position);
    const Vec2 cutoff_vec = right_cutoff - left_cutoff;
    const bool same = o1 == o2;

    const double t = same ? 0.5 : dot(velocity - left_cutoff, cutoff_vec) / abs_sq(cutoff_vec);
    const double t_left = dot(velocity - left_cutoff, left_leg);
    const double t_right = dot(velocity - right_cutoff, right_leg);

    if ((t < 0.0 && t_left < 0.0) || (same && t_left < 0.0 && t_right < 0.0)) {
      const Vec2 unit_w = normalized(velocity - left_cutoff);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = left_cutoff + radius * inv_th * unit_w;
      lines.push_back(line);
      continue;
    }
    if (t > 1.0 && t_right < 0.0) {
      const Vec2 unit_w = normalized(velocity - right_cutoff);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = right_cutoff + radius * inv_th * unit_w;
      lines.push_back(line);
      continue;
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    const double dist_sq_cutoff = (t < 0.0 || t > 1.0 || same)
                                      ? inf
                                      : abs_sq(velocity - (left_cutoff + t * cutoff_vec));
    const double dist_sq_left =
        t_left < 0.0 ? inf : abs_sq(velocity - (left_cutoff + t_left * left_leg));
    const double dist_sq_right =
        t_right < 0.0 ? inf : abs_sq(velocity - (right_cutoff + t_right * right_leg));

    if (dist_sq_cutoff <= dist_sq_left && dist_sq_cutoff <= dist_sq_right) {
      line.direction = -o1->unit_dir;
      line.point = left_cutoff + radius * inv_th * Vec2{-line.direction.y, line.direction.x};
      lines.push_back(line);
    } else if (dist_sq_left <= dist_sq_right) {
      if (left_foreign) continue;
      line.direction = left_leg;
      line.point = left_cutoff + radius * inv_th * Vec2{-line.direction.y, line.direction.x};
      lines.push_back(line);
    } else {
      if (right_foreign) continue;
      line.direction = -right_leg;
      line.point = right_cutoff + radius * inv_th * Vec2{-line.direction.y, line.direction.x};
      lines.push_back(line);
    }
  }
}

void add_agent_lines(const OrcaAgent& agent, std::span<const Neighbor> neighbors,
                     const OrcaParams& params, double dt, std::vector<OrcaLine>& lines) {
  std::vector<std::pair<double, std::size_t>> near;
  const double range_sq = params.neighbor_dist * params.neighbor_dist;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const double d = abs_sq(neighbors[i].position - agent.position);
    if (d < range_sq) near.emplace_back(d, i);
  }
  std::stable_sort(near.begin(), near.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (near.size() > params.max_neighbors) near.resize(params.max_neighbors);

  const double inv_th = 1.0 / params.time_horizon_agents;
  for (const auto& [unused, idx] : near) {
    const Neighbor& other = neighbors[idx];
    const Vec2 rel_pos = other.position - agent.position;
    const Vec2 rel_vel = agent.velocity - other.velocity;
    const double dist_sq = abs_sq(rel_pos);
    const double combined_radius = agent.radius + other.radius;
    const double combined_radius_sq = combined_radius * combined_radius;

    OrcaLine line;
    Vec2 u;
    if (dist_sq > combined_radius_sq) {
      const Vec2 w = rel_vel - inv_th * rel_pos;
      const double w_length_sq = abs_sq(w);
      const double dot1 = dot(w, rel_pos);
      if (dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_length_sq) {
        // Project on the cut-off circle.
        const double w_length = std::sqrt(w_length_sq);
        const Vec2 unit_w = w / w_length;
        line.direction = {unit_w.y, -unit_w.x};
        u = (combined_radius * inv_th - w_length) * unit_w;
      } else {
        const double leg = std::sqrt(dist_sq - combined_radius_sq);
        if (det(rel_pos, w) > 0.0) {
          line.direction = Vec2{rel_pos.x * leg - rel_pos.y * combined_radius,
                                rel_pos.x * combined_radius + rel_pos.y * leg} /
                           dist_sq;
        } else {
          line.direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined_radius,
                                 -rel_pos.x * combined_radius + rel_pos.y * leg} /
                           dist_sq;
        }
        u = dot(rel_vel, line.direction) * line.direction - rel_vel;
      }
    } else {
      // Already overlapping: resolve within one time step.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_vel - inv_dt * rel_pos;
      const double w_length = norm(w);
      const Vec2 unit_w = w_length > 0.0 ? w / w_length : Vec2{1.0, 0.0};
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined_radius * inv_dt - w_length) * unit_w;
    }
    line.point = agent.velocity + 0.5 * u;
    lines.push_back(line);
  }
}

bool linear_program1(std::span<const OrcaLine> lines, std::size_t line_no, double radius,
                     Vec2 opt_velocity, bool direction_opt, Vec2& result) {
  const OrcaLine& ln = lines[line_no];
  const double dot_product = dot(ln.point, ln.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(ln.point);
  if (discriminant < 0.0) return false;

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(ln.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, ln.point - lines[i].point);
    if (std::abs(denominator) <= kEps) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt_velocity, ln.direction) > 0.0 ? ln.point + t_right * ln.direction
                                                   : ln.point + t_left * ln.direction;
  } else {
    const double t = std::clamp(dot(ln.direction, opt_velocity - ln.point), t_left, t_right);
    result = ln.point + t * ln.direction;
  }
  return true;
}

std::size_t linear_program2(std::span<const OrcaLine> lines, double radius, Vec2 opt_velocity,
                            bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt_velocity * radius;
  } else if (abs_sq(opt_velocity) > radius * radius) {
    result = normalized(opt_velocity) * radius;
  } else {
    result = opt_velocity;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 temp = result;
      if (!linear_program1(lines, i, radius, opt_velocity, direction_opt, result)) {
        result = temp;
        return i;
      }
    }
  }
  return lines.size();
}

void linear_program3(std::span<const OrcaLine> lines, std::size_t num_obst_lines,
                     std::size_t begin_line, double radius, Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= distance) continue;

    std::vector<OrcaLine> proj(lines.begin(), lines.begin() + static_cast<long>(num_obst_lines));
    for (std::size_t j = num_obst_lines; j < i; ++j) {
      OrcaLine line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::abs(determinant) <= kEps) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      proj.push_back(line);
    }

    const Vec2 temp = result;
    if (linear_program2(proj, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true,
                        result) < proj.size()) {
      // Only reachable through floating-point error; keep the previous point.
      result = temp;
    }
    distance = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

OrcaConstraints orca_constraints(const OrcaAgent& agent, std::span<const Neighbor> neighbors,
                                 std::span<const StaticObstacle> obstacles,
                                 const OrcaParams& params, double dt) {
  OrcaConstraints c;
  add_obstacle_lines(agent, obstacles, params, c.lines);
  c.obstacle_lines = c.lines.size();
  add_agent_lines(agent, neighbors, params, dt, c.lines);
  return c;
}

OrcaResult solve_orca(const OrcaConstraints& constraints, Vec2 preferred, double max_speed) {
  OrcaResult out;
  const std::size_t fail =
      linear_program2(constraints.lines, max_speed, preferred, false, out.velocity);
  if (fail < constraints.lines.size()) {
    out.infeasible = true;
    linear_program3(constraints.lines, constraints.obstacle_lines, fail, max_speed,
                    out.velocity);
  }
  return out;
}

OrcaResult orca_velocity(const OrcaAgent& agent, std::span<const Neighbor> neighbors,
                         std::span<const StaticObstacle> obstacles, const OrcaParams& params,
                         double dt) {
  const OrcaConstraints c = orca_constraints(agent, neighbors, obstacles, params, dt);
  return solve_orca(c, agent.preferred_velocity, params.max_speed);
}

}  // namespace crowdnav
