#pragma once

// Plain-text trajectory files.
//
//   # crowdnav-trajectory 1
//   # scenario=random strategy=orca seed=7
//   # method=orca
//   # dt=0.10000000000000001
//   # obstacle rect <cx> <cy> <hx> <hy>      (one line per obstacle)
//   # obstacle circle <cx> <cy> <r>
//   # goal <robot> <x> <y> <theta>           (one line per robot)
//   # columns tick agent kind x y theta v w flags
//   <tick> <agent> <robot|pedestrian> <x> <y> <theta> <v> <w> <flags>
//
// Tick 0 holds the initial state with zero velocities. Row t > 0 holds the
// pose after step t and the velocity applied during it. Robot flags are the
// outcome at that tick (running, reached, collided, timeout); pedestrians
// use "-". Reals use the shortest text that reads back exactly.

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdnav/env.hpp"

namespace crowdnav {

struct TrajectoryRow {
  int tick = 0;
  int agent = 0;  // index within its kind
  AgentKind kind = AgentKind::robot;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double w = 0.0;
  std::string flags = "-";

  bool operator==(const TrajectoryRow&) const = default;
};

struct Trajectory {
  ScenarioId scenario;
  std::string method = "unknown";
  double dt = 0.1;
  std::vector<StaticObstacle> obstacles;
  std::vector<Pose2D> goals;
  std::vector<TrajectoryRow> rows;

  int tick_count() const;
  /// Rows of one agent in tick order.
  std::vector<TrajectoryRow> agent_rows(AgentKind kind, int agent) const;
  int agent_count(AgentKind kind) const;
};

struct TrajectoryParseError : std::runtime_error {
  TrajectoryParseError(int line, const std::string& what);
  int line;
};

std::string serialize_trajectory(const Trajectory& t);
Trajectory parse_trajectory(std::istream& in);
Trajectory parse_trajectory_string(const std::string& text);
Trajectory load_trajectory(const std::string& path);
void save_trajectory(const std::string& path, const Trajectory& t);

/// Appends one row per agent for `world`. Pedestrian angular rates come from
/// the heading change since `previous` (zero when null, i.e. at tick 0).
void record_tick(Trajectory& t, int tick, const WorldState& world, const WorldState* previous,
                 const std::vector<Action>& robot_actions, const std::vector<Outcome>& outcomes);

/// Rebuilds the world at a tick: robots and pedestrians at their recorded
/// poses and velocities, obstacles from the header, and pedestrian legs from
/// a gait integrated over the recorded speeds.
WorldState reconstruct_world(const Trajectory& t, int tick);

/// Static vector rendering: obstacles, goals, and one polyline per agent
/// with exactly one vertex per recorded row.
std::string render_svg(const Trajectory& t);

}  // namespace crowdnav
