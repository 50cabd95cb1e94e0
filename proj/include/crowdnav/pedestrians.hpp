#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "crowdnav/world.hpp"

namespace crowdnav {

/// Another agent as seen by a collision-avoidance strategy.
struct Neighbor {
  Vec2 position;
  Vec2 velocity;
  double radius = kPedestrianRadius;
  int id = 0;
};

// ---------------------------------------------------------------------------
// ORCA

struct OrcaParams {
  double neighbor_dist = 5.0;
  double time_horizon_agents = 5.0;
  double time_horizon_obstacles = 2.0;
  double max_speed = kMaxPedestrianSpeed;
  std::size_t max_neighbors = 10;
};

struct OrcaAgent {
  Vec2 position;
  Vec2 velocity;
  double radius = kPedestrianRadius;
  Vec2 preferred_velocity;
};

/// Directed line; permitted velocities lie on its left side.
struct OrcaLine {
  Vec2 point;
  Vec2 direction;
};

struct OrcaConstraints {
  std::vector<OrcaLine> lines;
  /// The first `obstacle_lines` entries come from static obstacles and are
  /// never relaxed.
  std::size_t obstacle_lines = 0;
};

struct OrcaResult {
  Vec2 velocity;
  /// True when the half-planes had no common point inside the speed disk and
  /// the least-violation fallback was used.
  bool infeasible = false;
};

/// Builds the obstacle and reciprocal agent half-planes for one agent.
OrcaConstraints orca_constraints(const OrcaAgent& agent, std::span<const Neighbor> neighbors,
                                 std::span<const StaticObstacle> obstacles,
                                 const OrcaParams& params, double dt);

/// Velocity inside the speed disk that satisfies all half-planes and is
/// closest to `preferred`; falls back to minimizing the largest agent-line
/// violation when infeasible.
OrcaResult solve_orca(const OrcaConstraints& constraints, Vec2 preferred, double max_speed);

OrcaResult orca_velocity(const OrcaAgent& agent, std::span<const Neighbor> neighbors,
                         std::span<const StaticObstacle> obstacles, const OrcaParams& params,
                         double dt);

// ---------------------------------------------------------------------------
// Social force model

struct SfmParams {
  double relaxation_time = 0.5;
  double agent_strength = 2.1;
  double agent_range = 0.3;
  double obstacle_strength = 10.0;
  double obstacle_range = 0.2;
  double desired_speed = kMaxPedestrianSpeed;
  /// Post-integration speed cap as a multiple of desired_speed.
  double max_speed_factor = 1.3;
};

struct SfmAgent {
  Vec2 position;
  Vec2 velocity;
  double radius = kPedestrianRadius;
  int id = 0;
  Vec2 goal;
};

struct SfmForces {
  Vec2 driving;
  Vec2 agents;
  Vec2 obstacles;
  Vec2 total;  // after the speed clamp
};

/// Repulsion exerted by one neighbor, pointing from the neighbor toward self.
/// Coincident centers push the higher id toward +x and the lower toward -x.
Vec2 sfm_pair_repulsion(const SfmAgent& self, const Neighbor& other, const SfmParams& params);

SfmForces sfm_forces(const SfmAgent& self, std::span<const Neighbor> neighbors,
                     std::span<const StaticObstacle> obstacles, const SfmParams& params,
                     double dt);

Vec2 sfm_acceleration(const SfmAgent& self, std::span<const Neighbor> neighbors,
                      std::span<const StaticObstacle> obstacles, const SfmParams& params,
                      double dt);

// ---------------------------------------------------------------------------
// Gait

/// Leg disks for the current gait phase, placed along the walking direction.
std::array<Circle, 2> leg_disks(const GaitState& gait, const AgentBody& body);

/// Advances the gait phase by the distance walked in dt and returns the new legs.
std::array<Circle, 2> update_gait(GaitState& gait, const AgentBody& body, double dt);

}  // namespace crowdnav
