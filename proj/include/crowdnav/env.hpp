#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/pedestrians.hpp"
#include "crowdnav/perception.hpp"
#include "crowdnav/random.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// `open` is a single robot with no pedestrians or obstacles.
enum class ScenarioKind { random, circular, ppo_circular, open };
enum class PedStrategy { orca, sfm, none };

std::string to_string(ScenarioKind kind);
std::string to_string(PedStrategy strategy);
ScenarioKind parse_scenario_kind(const std::string& s);
PedStrategy parse_ped_strategy(const std::string& s);

// ---------------------------------------------------------------------------
// Discrete action set: 4 linear x 7 angular velocities, index = v_idx * 7 + w_idx.

inline constexpr std::array<double, 4> kDiscreteLinear = {0.0, 0.2, 0.4, 0.6};
inline constexpr std::array<double, 7> kDiscreteAngular = {-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
inline constexpr int kDiscreteActions = 28;

Action discrete_action(int index);

/// Clamps into [0, 0.6] x [-0.9, 0.9]; reports whether anything changed.
Action clamp_action(const Action& a, bool* clamped = nullptr);

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  WorldState world;
  std::vector<Pose2D> goals;  // one per robot
  /// Set when rejection sampling ran out of attempts and restarted.
  bool regenerated = false;
};

struct ScenarioGenConfig {
  double clearance = 0.1;
  double min_robot_travel = 3.0;
  int max_attempts = 10000;
};

Scenario generate_random_scenario(Rng& rng, const ScenarioGenConfig& cfg = {});
/// 2 robots + 4 pedestrians, or 5 robots when `robots_only`.
Scenario generate_circular_scenario(Rng& rng, bool robots_only = false,
                                    const ScenarioGenConfig& cfg = {});
Scenario generate_open_scenario(Rng& rng, const ScenarioGenConfig& cfg = {});

/// A reproducible scenario: (kind, strategy, seed) serialized on one line.
struct ScenarioId {
  ScenarioKind kind = ScenarioKind::random;
  PedStrategy strategy = PedStrategy::orca;
  std::uint64_t seed = 0;

  std::string to_line() const;
  static ScenarioId parse(const std::string& line);
  bool operator==(const ScenarioId&) const = default;
};

Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed,
                           const ScenarioGenConfig& cfg = {});

// ---------------------------------------------------------------------------
// Reward

enum class Outcome { running, reached, collided, timeout };
std::string to_string(Outcome o);

struct RewardConfig {
  double arrival = 500.0;
  double collision = -500.0;
  double proximity_weight = 50.0;  // epsilon_1
  double shaping_weight = 200.0;   // epsilon_2
  double step = -5.0;
  double proximity_range = 1.0;
};

struct RewardBreakdown {
  double goal = 0.0;
  double safe = 0.0;
  double step = 0.0;
  double shaping = 0.0;

  double total() const { return goal + safe + step + shaping; }
};

RewardBreakdown compute_reward(Vec2 prev_position, Vec2 next_position, Vec2 goal, Outcome outcome,
                               double d_min, const RewardConfig& cfg = {});

/// d_min is taken from `next`.
RewardBreakdown compute_reward(const WorldState& prev, const WorldState& next,
                               std::size_t robot_index, Vec2 goal, Outcome outcome,
                               const RewardConfig& cfg = {});

// ---------------------------------------------------------------------------
// Environment

struct EnvConfig {
  ScenarioKind scenario = ScenarioKind::random;
  PedStrategy strategy = PedStrategy::orca;
  double dt = 0.1;
  int max_steps = 200;
  double goal_tolerance = 0.3;
  RewardConfig reward;
  bool use_pedestrian_map = true;
  bool build_observations = true;
  std::uint64_t seed = 0;
  OrcaParams orca;
  SfmParams sfm;
  LidarConfig lidar;
  ScenarioGenConfig generation;
};

struct RobotStep {
  ObservationBundle observation;
  RewardBreakdown reward;
  Outcome outcome = Outcome::running;
  bool done = false;
  bool action_clamped = false;
};

class CrowdEnv {
 public:
  explicit CrowdEnv(EnvConfig config);

  /// Starts the episode described by (kind, strategy, seed).
  void reset(std::uint64_t scenario_seed);
  void reset(const Scenario& scenario);

  /// One action per robot; entries for finished robots are ignored.
  std::vector<RobotStep> step(std::span<const Action> actions);

  const EnvConfig& config() const { return config_; }
  const WorldState& world() const { return world_; }
  const std::vector<Pose2D>& goals() const { return goals_; }
  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  std::size_t robot_count() const { return world_.robots.size(); }
  int step_count() const { return steps_; }
  bool done(std::size_t robot) const { return outcomes_.at(robot) != Outcome::running; }
  bool all_done() const;
  ScenarioId scenario_id() const { return scenario_id_; }

  ObservationBundle observe(std::size_t robot) const;

 private:
  void advance_pedestrians();

  EnvConfig config_;
  WorldState world_;
  std::vector<Pose2D> goals_;
  std::vector<Outcome> outcomes_;
  std::vector<ObservationBundle> last_obs_;
  ScenarioId scenario_id_;
  int steps_ = 0;
};

}  // namespace crowdnav
