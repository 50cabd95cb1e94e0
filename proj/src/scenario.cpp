#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "crowdnav/env.hpp"

namespace crowdnav {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::random:
      return "random";
    case ScenarioKind::circular:
      return "circular";
    case ScenarioKind::ppo_circular:
      return "ppo-circular";
    case ScenarioKind::open:
      return "open";
  }
  return "?";
}

std::string to_string(PedStrategy strategy) {
  switch (strategy) {
    case PedStrategy::orca:
      return "orca";
    case PedStrategy::sfm:
      return "sfm";
    case PedStrategy::none:
      return "none";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "random") return ScenarioKind::random;
  if (s == "circular") return ScenarioKind::circular;
  if (s == "ppo-circular") return ScenarioKind::ppo_circular;
  if (s == "open") return ScenarioKind::open;
  throw std::invalid_argument("unknown scenario kind '" + s + "'");
}

PedStrategy parse_ped_strategy(const std::string& s) {
  if (s == "orca") return PedStrategy::orca;
  if (s == "sfm") return PedStrategy::sfm;
  if (s == "none") return PedStrategy::none;
  throw std::invalid_argument("unknown pedestrian strategy '" + s + "'");
}

std::string ScenarioId::to_line() const {
  std::ostringstream os;
  os << "scenario=" << to_string(kind) << " strategy=" << to_string(strategy) << " seed=" << seed;
  return os.str();
}

ScenarioId ScenarioId::parse(const std::string& line) {
  std::istringstream is(line);
  std::string token;
  ScenarioId id;
  bool have_kind = false;
  bool have_strategy = false;
  bool have_seed = false;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad scenario token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "scenario") {
      id.kind = parse_scenario_kind(value);
      have_kind = true;
    } else if (key == "strategy") {
      id.strategy = parse_ped_strategy(value);
      have_strategy = true;
    } else if (key == "seed") {
      id.seed = std::stoull(value);
      have_seed = true;
    } else {
      throw std::invalid_argument("unknown scenario key '" + key + "'");
    }
  }
  if (!have_kind || !have_strategy || !have_seed) {
    throw std::invalid_argument("scenario line needs scenario=, strategy= and seed=");
  }
  return id;
}

namespace {

constexpr double kPlacementLimit = 5.0;  // agents start and finish inside [-5, 5]^2

struct Disk {
  Vec2 center;
  double radius;
};

class Placer {
 public:
  Placer(Rng& rng, const ScenarioGenConfig& cfg) : rng_(rng), cfg_(cfg) {}

  struct Exhausted {};

  void count_attempt() {
    if (++attempts_ > cfg_.max_attempts) throw Exhausted{};
  }

  bool clear_of_obstacles(Vec2 p, double r, const std::vector<StaticObstacle>& obstacles) const {
    return std::all_of(obstacles.begin(), obstacles.end(), [&](const StaticObstacle& o) {
      return signed_distance(o, p) - r >= cfg_.clearance;
    });
  }

  bool clear_of_disks(Vec2 p, double r, const std::vector<Disk>& disks) const {
    return std::all_of(disks.begin(), disks.end(), [&](const Disk& d) {
      return norm(d.center - p) - r - d.radius >= cfg_.clearance;
    });
  }

  Vec2 sample_point(double r) {
    const double lim = kPlacementLimit - r;
    return {uniform(rng_, -lim, lim), uniform(rng_, -lim, lim)};
  }

  Rng& rng() { return rng_; }

 private:
  Rng& rng_;
  const ScenarioGenConfig& cfg_;
  int attempts_ = 0;
};

bool rects_clear(const Rect& a, const Rect& b, double clearance) {
  const double gx = std::abs(a.center.x - b.center.x) - a.half_extents.x - b.half_extents.x;
  const double gy = std::abs(a.center.y - b.center.y) - a.half_extents.y - b.half_extents.y;
  return std::max(gx, gy) >= clearance;
}

Pedestrian make_pedestrian(Vec2 start, Vec2 goal, int id) {
  Pedestrian p;
  p.id = id;
  p.start = start;
  p.goal = goal;
  p.body.kind = AgentKind::pedestrian;
  p.body.radius = kPedestrianRadius;
  p.body.pose = {start.x, start.y, std::atan2(goal.y - start.y, goal.x - start.x)};
  p.legs = leg_disks(p.gait, p.body);
  return p;
}

AgentBody make_robot(Vec2 start, double heading) {
  AgentBody r;
  r.kind = AgentKind::robot;
  r.radius = kRobotRadius;
  r.pose = {start.x, start.y, normalize_angle(heading)};
  return r;
}

Scenario try_random(Placer& placer, const ScenarioGenConfig& cfg) {
  Scenario sc;
  Rng& rng = placer.rng();
  std::vector<Rect> rects;
  while (rects.size() < 4) {
    placer.count_attempt();
    Rect r{{uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)},
           {uniform(rng, 0.25, 0.75), uniform(rng, 0.25, 0.75)}};
    if (std::all_of(rects.begin(), rects.end(),
                    [&](const Rect& o) { return rects_clear(r, o, cfg.clearance); })) {
      rects.push_back(r);
    }
  }
  for (const Rect& r : rects) sc.world.obstacles.push_back({r});

  std::vector<Disk> starts;
  std::vector<Disk> robot_goals;
  for (int i = 0; i < 2; ++i) {
    Vec2 start;
    do {
      placer.count_attempt();
      start = placer.sample_point(kRobotRadius);
    } while (!placer.clear_of_obstacles(start, kRobotRadius, sc.world.obstacles) ||
             !placer.clear_of_disks(start, kRobotRadius, starts));
    Vec2 goal;
    do {
      placer.count_attempt();
      goal = placer.sample_point(kRobotRadius);
    } while (norm(goal - start) < cfg.min_robot_travel ||
             !placer.clear_of_obstacles(goal, kRobotRadius, sc.world.obstacles) ||
             !placer.clear_of_disks(goal, kRobotRadius, robot_goals));
    starts.push_back({start, kRobotRadius});
    robot_goals.push_back({goal, kRobotRadius});
    sc.world.robots.push_back(make_robot(start, uniform(rng, -std::numbers::pi, std::numbers::pi)));
    sc.goals.push_back({goal.x, goal.y, uniform(rng, -std::numbers::pi, std::numbers::pi)});
  }

  for (int i = 0; i < 4; ++i) {
    Vec2 start;
    do {
      placer.count_attempt();
      start = placer.sample_point(kPedestrianRadius);
    } while (!placer.clear_of_obstacles(start, kPedestrianRadius, sc.world.obstacles) ||
             !placer.clear_of_disks(start, kPedestrianRadius, starts));
    Vec2 goal;
    do {
      placer.count_attempt();
      goal = placer.sample_point(kPedestrianRadius);
    } while (norm(goal - start) < 2.0 ||
             !placer.clear_of_obstacles(goal, kPedestrianRadius, sc.world.obstacles));
    starts.push_back({start, kPedestrianRadius});
    sc.world.pedestrians.push_back(make_pedestrian(start, goal, i));
  }
  return sc;
}

Scenario try_circular(Rng& rng, bool robots_only) {
  Scenario sc;
  const int n_robots = robots_only ? 5 : 2;
  const int n_peds = robots_only ? 0 : 4;
  const int n = n_robots + n_peds;
  const double radius = uniform(rng, 2.5, 4.5);
  const double spacing = 2.0 * std::numbers::pi / n;
  const double jitter = 0.25 * spacing;
  const double base = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  // Shuffle which slots hold robots.
  std::vector<int> kinds(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n_robots; ++i) kinds[static_cast<std::size_t>(i)] = 1;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(i + 1)));
    std::swap(kinds[static_cast<std::size_t>(i)], kinds[static_cast<std::size_t>(j)]);
  }

  int ped_id = 0;
  for (int k = 0; k < n; ++k) {
    const double angle = base + k * spacing + uniform(rng, -jitter, jitter);
    const Vec2 start = unit_from_angle(angle) * radius;
    const Vec2 goal = -start;
    const double heading = normalize_angle(angle + std::numbers::pi);
    if (kinds[static_cast<std::size_t>(k)] == 1) {
      sc.world.robots.push_back(make_robot(start, heading));
      sc.goals.push_back({goal.x, goal.y, heading});
    } else {
      sc.world.pedestrians.push_back(make_pedestrian(start, goal, ped_id++));
    }
  }
  return sc;
}

}  // namespace

Scenario generate_random_scenario(Rng& rng, const ScenarioGenConfig& cfg) {
  bool regenerated = false;
  for (;;) {
    Placer placer(rng, cfg);
    try {
      Scenario sc = try_random(placer, cfg);
      sc.regenerated = regenerated;
      return sc;
    } catch (const Placer::Exhausted&) {
      regenerated = true;
    }
  }
}

Scenario generate_circular_scenario(Rng& rng, bool robots_only, const ScenarioGenConfig&) {
  // Angular spacing with bounded jitter guarantees separation; no rejection needed.
  return try_circular(rng, robots_only);
}

Scenario generate_open_scenario(Rng& rng, const ScenarioGenConfig& cfg) {
  Scenario sc;
  Vec2 start;
  Vec2 goal;
  do {
    start = {uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)};
    const double dist = uniform(rng, cfg.min_robot_travel, cfg.min_robot_travel + 2.0);
    goal = start + unit_from_angle(uniform(rng, -std::numbers::pi, std::numbers::pi)) * dist;
  } while (std::abs(goal.x) > kPlacementLimit || std::abs(goal.y) > kPlacementLimit);
  sc.world.robots.push_back(make_robot(start, uniform(rng, -std::numbers::pi, std::numbers::pi)));
  sc.goals.push_back({goal.x, goal.y, uniform(rng, -std::numbers::pi, std::numbers::pi)});
  return sc;
}

Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed, const ScenarioGenConfig& cfg) {
  Rng rng = make_rng(seed);
  switch (kind) {
    case ScenarioKind::random:
      return generate_random_scenario(rng, cfg);
    case ScenarioKind::circular:
      return generate_circular_scenario(rng, false, cfg);
    case ScenarioKind::ppo_circular:
      return generate_circular_scenario(rng, true, cfg);
    case ScenarioKind::open:
      return generate_open_scenario(rng, cfg);
  }
  throw std::invalid_argument("unknown scenario kind");
}

}  // namespace crowdnav
