#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowdnav/env.hpp"

namespace crowdnav {

Action discrete_action(int index) {
  if (index < 0 || index >= kDiscreteActions) {
    throw std::out_of_range("discrete action index out of range");
  }
  return {kDiscreteLinear[static_cast<std::size_t>(index / 7)],
          kDiscreteAngular[static_cast<std::size_t>(index % 7)]};
}

Action clamp_action(const Action& a, bool* clamped) {
  const Action c{std::clamp(a.v, 0.0, kMaxLinearSpeed),
                 std::clamp(a.w, -kMaxAngularSpeed, kMaxAngularSpeed)};
  if (clamped != nullptr) *clamped = !(c == a);
  return c;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::running:
      return "running";
    case Outcome::reached:
      return "reached";
    case Outcome::collided:
      return "collided";
    case Outcome::timeout:
      return "timeout";
  }
  return "?";
}

RewardBreakdown compute_reward(Vec2 prev_position, Vec2 next_position, Vec2 goal, Outcome outcome,
                               double d_min, const RewardConfig& cfg) {
  RewardBreakdown r;
  if (outcome == Outcome::reached) r.goal = cfg.arrival;
  // Collision takes precedence over the proximity penalty.
  if (outcome == Outcome::collided) {
    r.safe = cfg.collision;
  } else if (d_min < cfg.proximity_range) {
    r.safe = -cfg.proximity_weight * (cfg.proximity_range - d_min);
  }
  r.step = cfg.step;
  r.shaping = cfg.shaping_weight * (norm(prev_position - goal) - norm(next_position - goal));
  return r;
}

RewardBreakdown compute_reward(const WorldState& prev, const WorldState& next,
                               std::size_t robot_index, Vec2 goal, Outcome outcome,
                               const RewardConfig& cfg) {
  const double d_min = detect_collisions(next, robot_index).d_min;
  return compute_reward(prev.robots.at(robot_index).position(),
                        next.robots.at(robot_index).position(), goal, outcome, d_min, cfg);
}

CrowdEnv::CrowdEnv(EnvConfig config) : config_(std::move(config)) {
  if (config_.dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (config_.max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  reset(config_.seed);
}

void CrowdEnv::reset(std::uint64_t scenario_seed) {
  reset(generate_scenario(config_.scenario, scenario_seed, config_.generation));
  scenario_id_ = {config_.scenario, config_.strategy, scenario_seed};
}

void CrowdEnv::reset(const Scenario& scenario) {
  if (scenario.goals.size() != scenario.world.robots.size()) {
    throw std::invalid_argument("scenario needs one goal per robot");
  }
  world_ = scenario.world;
  goals_ = scenario.goals;
  outcomes_.assign(world_.robots.size(), Outcome::running);
  steps_ = 0;
  scenario_id_ = {config_.scenario, config_.strategy, 0};
  last_obs_.clear();
  if (config_.build_observations) {
    for (std::size_t i = 0; i < world_.robots.size(); ++i) last_obs_.push_back(observe(i));
  }
}

bool CrowdEnv::all_done() const {
  return std::all_of(outcomes_.begin(), outcomes_.end(),
                     [](Outcome o) { return o != Outcome::running; });
}

ObservationBundle CrowdEnv::observe(std::size_t robot) const {
  ObservationBundle obs;
  obs.sensor_map = build_sensor_map(world_, robot, config_.lidar);
  if (config_.use_pedestrian_map) obs.pedestrian_map = build_pedestrian_map(world_, robot);
  obs.target = target_in_robot_frame(world_.robots.at(robot).pose, goals_.at(robot));
  return obs;
}

void CrowdEnv::advance_pedestrians() {
  const double dt = config_.dt;
  const std::size_t n = world_.pedestrians.size();
  if (n == 0 || config_.strategy == PedStrategy::none) {
    for (Pedestrian& p : world_.pedestrians) {
      p.body.velocity = {};
      p.legs = update_gait(p.gait, p.body, dt);
    }
    return;
  }

  // Everyone reacts to the same snapshot; robots are neighbors too.
  std::vector<Neighbor> all;
  all.reserve(n + world_.robots.size());
  for (const Pedestrian& p : world_.pedestrians) {
    all.push_back({p.body.position(), p.body.velocity, p.body.radius, p.id});
  }
  for (std::size_t r = 0; r < world_.robots.size(); ++r) {
    const AgentBody& b = world_.robots[r];
    all.push_back({b.position(), b.velocity, b.radius, static_cast<int>(n + r)});
  }

  std::vector<Vec2> new_velocity(n);
  std::vector<Neighbor> others;
  for (std::size_t i = 0; i < n; ++i) {
    const Pedestrian& p = world_.pedestrians[i];
    others.clear();
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (j != i) others.push_back(all[j]);
    }
    if (config_.strategy == PedStrategy::orca) {
      const Vec2 to_goal = p.goal - p.body.position();
      const double dist = norm(to_goal);
      const double speed = std::min(config_.orca.max_speed, dist / dt);
      OrcaAgent agent{p.body.position(), p.body.velocity, p.body.radius,
                      dist > 0.0 ? to_goal * (speed / dist) : Vec2{}};
      new_velocity[i] = orca_velocity(agent, others, world_.obstacles, config_.orca, dt).velocity;
    } else {
      SfmAgent agent{p.body.position(), p.body.velocity, p.body.radius, p.id, p.goal};
      const Vec2 a = sfm_acceleration(agent, others, world_.obstacles, config_.sfm, dt);
      new_velocity[i] = p.body.velocity + a * dt;
    }
    // Table speed cap applies to every strategy.
    const double s = norm(new_velocity[i]);
    if (s > kMaxPedestrianSpeed) new_velocity[i] = new_velocity[i] * (kMaxPedestrianSpeed / s);
  }

  for (std::size_t i = 0; i < n; ++i) {
    Pedestrian& p = world_.pedestrians[i];
    p.body.velocity = new_velocity[i];
    p.body.pose.x += new_velocity[i].x * dt;
    p.body.pose.y += new_velocity[i].y * dt;
    if (norm(new_velocity[i]) > 1e-9) {
      p.body.pose.theta = std::atan2(new_velocity[i].y, new_velocity[i].x);
    }
    p.legs = update_gait(p.gait, p.body, dt);
    if (norm(p.goal - p.body.position()) < config_.goal_tolerance) std::swap(p.start, p.goal);
  }
}

std::vector<RobotStep> CrowdEnv::step(std::span<const Action> actions) {
  const std::size_t n = world_.robots.size();
  if (actions.size() != n) throw std::invalid_argument("step needs one action per robot");
  std::vector<RobotStep> results(n);

  if (all_done()) {
    for (std::size_t i = 0; i < n; ++i) {
      results[i].outcome = outcomes_[i];
      results[i].done = true;
      if (i < last_obs_.size()) results[i].observation = last_obs_[i];
    }
    return results;
  }

  const WorldState prev = world_;
  advance_pedestrians();

  for (std::size_t i = 0; i < n; ++i) {
    AgentBody& robot = world_.robots[i];
    if (done(i)) {
      robot.velocity = {};
      continue;
    }
    const Action a = clamp_action(actions[i], &results[i].action_clamped);
    robot.pose = step_diff_drive(robot.pose, a, config_.dt);
    robot.velocity = unit_from_angle(robot.pose.theta) * a.v;
  }
  ++steps_;
  world_.time += config_.dt;

  for (std::size_t i = 0; i < n; ++i) {
    RobotStep& res = results[i];
    if (done(i)) {
      res.outcome = outcomes_[i];
      res.done = true;
      continue;
    }
    const CollisionReport report = detect_collisions(world_, i);
    const Vec2 goal = goals_[i].position();
    Outcome outcome = Outcome::running;
    if (report.collided) {
      outcome = Outcome::collided;
    } else if (norm(world_.robots[i].position() - goal) <= config_.goal_tolerance) {
      outcome = Outcome::reached;
    } else if (steps_ >= config_.max_steps) {
      outcome = Outcome::timeout;
    }
    res.reward = compute_reward(prev.robots[i].position(), world_.robots[i].position(), goal,
                                outcome, report.d_min, config_.reward);
    res.outcome = outcome;
    res.done = outcome != Outcome::running;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i].done && outcomes_[i] == Outcome::running) {
      outcomes_[i] = results[i].outcome;
      world_.robots[i].velocity = {};
    }
  }

  if (config_.build_observations) {
    for (std::size_t i = 0; i < n; ++i) {
      last_obs_[i] = observe(i);
      results[i].observation = last_obs_[i];
    }
  }
  return results;
}

}  // namespace crowdnav
