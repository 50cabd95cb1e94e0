#include <algorithm>
#include <cmath>
#include <numbers>

#include "crowdnav/pedestrians.hpp"

namespace crowdnav {

Vec2 sfm_pair_repulsion(const SfmAgent& self, const Neighbor& other, const SfmParams& params) {
  const Vec2 diff = self.position - other.position;
  const double d = norm(diff);
  Vec2 n;
  if (d < 1e-12) {
    n = self.id > other.id ? Vec2{1.0, 0.0} : Vec2{-1.0, 0.0};
  } else {
    n = diff / d;
  }
  const double magnitude =
      params.agent_strength * std::exp((self.radius + other.radius - d) / params.agent_range);
  return n * magnitude;
}

SfmForces sfm_forces(const SfmAgent& self, std::span<const Neighbor> neighbors,
                     std::span<const StaticObstacle> obstacles, const SfmParams& params,
                     double dt) {
  SfmForces f;
  const Vec2 to_goal = normalized(self.goal - self.position);
  f.driving = (params.desired_speed * to_goal - self.velocity) / params.relaxation_time;

  for (const Neighbor& other : neighbors) f.agents += sfm_pair_repulsion(self, other, params);

  for (const StaticObstacle& obs : obstacles) {
    const double sd = signed_distance(obs, self.position);
    const Vec2 cp = closest_point(obs, self.position);
    // Outward normal; flipped when the center is already inside.
    Vec2 n = normalized(self.position - cp);
    if (sd < 0.0) n = -n;
    f.obstacles += n * (params.obstacle_strength *
                        std::exp((self.radius - sd) / params.obstacle_range));
  }

  Vec2 a = f.driving + f.agents + f.obstacles;

  // Clamp so that |v + a dt| stays within the speed cap.
  const double v_max = params.max_speed_factor * params.desired_speed;
  const Vec2 next = self.velocity + a * dt;
  if (abs_sq(next) > v_max * v_max) {
    const Vec2 u = a * dt;
    const double qa = abs_sq(u);
    const double qb = dot(self.velocity, u);
    const double qc = abs_sq(self.velocity) - v_max * v_max;
    if (qc <= 0.0 && qa > 0.0) {
      const double s = (-qb + std::sqrt(std::max(0.0, qb * qb - qa * qc))) / qa;
      a = a * std::clamp(s, 0.0, 1.0);
    } else {
      a = (normalized(next) * v_max - self.velocity) / dt;
    }
  }
  f.total = a;
  return f;
}

Vec2 sfm_acceleration(const SfmAgent& self, std::span<const Neighbor> neighbors,
                      std::span<const StaticObstacle> obstacles, const SfmParams& params,
                      double dt) {
  return sfm_forces(self, neighbors, obstacles, params, dt).total;
}

std::array<Circle, 2> leg_disks(const GaitState& gait, const AgentBody& body) {
  const double speed = norm(body.velocity);
  const Vec2 dir = speed > 1e-9 ? body.velocity / speed : unit_from_angle(body.pose.theta);
  const double offset = gait.stride_amplitude * std::sin(gait.phase);
  const Vec2 c = body.position();
  return {Circle{c + dir * offset, gait.leg_radius}, Circle{c - dir * offset, gait.leg_radius}};
}

std::array<Circle, 2> update_gait(GaitState& gait, const AgentBody& body, double dt) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double speed = norm(body.velocity);
  gait.phase = std::fmod(gait.phase + two_pi * speed * dt / gait.stride_length, two_pi);
  if (gait.phase < 0.0) gait.phase += two_pi;
  return leg_disks(gait, body);
}

}  // namespace crowdnav
