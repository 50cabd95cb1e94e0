#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/env.hpp"
#include "crowdnav/network.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/trajectory.hpp"

namespace crowdnav {

/// One robot in one episode.
struct MetricRecord {
  std::string method;
  ScenarioId scenario;
  int robot = 0;
  Outcome outcome = Outcome::running;
  int steps = 0;
  double episode_time = 0.0;   // s, until this robot's terminal event
  double straight_time = 0.0;  // (start-goal distance - goal tolerance) / max linear speed
  double total_reward = 0.0;
  std::vector<double> angular;  // commanded w per step
  std::vector<Pose2D> trajectory;

  bool success() const { return outcome == Outcome::reached; }
};

/// Reached / total. Throws on an empty set.
double success_rate(std::span<const MetricRecord> records);

/// Episode time minus straight-line time. Throws unless the robot reached.
double extra_time(const MetricRecord& record);

/// Mean |w_t - w_{t-1}|; zero for fewer than two steps.
double avg_angular_change(std::span<const double> w);
double avg_angular_change(const MetricRecord& record);

// ---------------------------------------------------------------------------
// Methods

struct FeedbackGains {
  double k_v = 1.0;
  double k_w = 2.0;
};

/// ORCA settings for a robot agent: default neighborhood, robot top speed.
OrcaParams robot_orca_params();

/// Holonomic ORCA velocity for the robot (perfect state access), converted to
/// (v, w) by heading-error feedback.
Action orca_robot_policy(const WorldState& world, std::size_t robot, const Pose2D& goal,
                         double dt, const OrcaParams& params = robot_orca_params(),
                         FeedbackGains gains = {});

/// Converts a desired planar velocity into a differential-drive command.
Action feedback_conversion(const Pose2D& pose, Vec2 desired, FeedbackGains gains = {});

class NavigationMethod {
 public:
  virtual ~NavigationMethod() = default;
  virtual std::string name() const = 0;
  /// False when w is not meaningful (the holonomic baseline).
  virtual bool reports_angular_change() const { return true; }
  /// Whether the method reads the pedestrian map channels.
  virtual bool uses_pedestrian_map() const { return true; }
  virtual void begin_episode(std::uint64_t /*seed*/) {}
  /// One action per robot; entries for finished robots are ignored.
  virtual std::vector<Action> act(const CrowdEnv& env) = 0;
};

class OrcaBaseline final : public NavigationMethod {
 public:
  std::string name() const override { return "orca"; }
  bool reports_angular_change() const override { return false; }
  std::vector<Action> act(const CrowdEnv& env) override;
};

/// A trained policy network. Greedy by default; stochastic evaluation draws
/// from a stream reseeded at every episode.
class PpoMethod final : public NavigationMethod {
 public:
  PpoMethod(std::string name, nn::ConvNet<float> policy, ActionMode mode, bool use_ped_map = true,
            bool greedy = true);
  std::string name() const override { return name_; }
  bool uses_pedestrian_map() const override { return use_ped_map_; }
  void begin_episode(std::uint64_t seed) override;
  std::vector<Action> act(const CrowdEnv& env) override;

 private:
  std::string name_;
  nn::ConvNet<float> policy_;
  ActionMode mode_;
  bool use_ped_map_;
  bool greedy_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Episodes and comparisons

struct EpisodeResult {
  std::vector<MetricRecord> records;  // one per robot
  std::optional<Trajectory> trajectory;
};

/// Runs one full episode of `method` on scenario (config.scenario,
/// config.strategy, seed).
EpisodeResult run_episode(NavigationMethod& method, EnvConfig config, std::uint64_t seed,
                          bool record_trajectory = false);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::random;
  PedStrategy strategy = PedStrategy::orca;
  std::string label() const;  // e.g. "orca-random"
};

struct ComparisonRow {
  std::string method;
  ScenarioSpec scenario;
  int episodes = 0;
  int records = 0;
  int successes = 0;
  double success_rate = 0.0;
  double success_half_width = 0.0;  // 95% normal approximation
  double mean_extra_time = 0.0;     // NaN without successes
  double extra_time_half_width = 0.0;
  double mean_angular_change = 0.0;  // NaN when not applicable
  double mean_reward = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::vector<MetricRecord> records;
  std::vector<std::string> notices;  // skipped methods and similar

  std::string to_csv() const;
  std::string to_json() const;
  std::string records_jsonl() const;
};

/// Aggregates one (method, scenario) group of records.
ComparisonRow aggregate(const std::string& method, const ScenarioSpec& scenario, int episodes,
                        std::span<const MetricRecord> records, bool angular_applicable);

struct ComparisonOptions {
  int episodes = 500;
  std::uint64_t seed_base = 0;
  EnvConfig env;  // scenario and strategy come from each ScenarioSpec
  /// Called for every episode whose index is below `trajectory_limit`.
  int trajectory_limit = 0;
  std::function<void(const std::string& method, const ScenarioSpec&, int episode, const Trajectory&)>
      on_trajectory;
};

/// Paired evaluation: episode i of every method uses seed seed_base + i.
ComparisonReport run_comparison(std::span<NavigationMethod* const> methods,
                                std::span<const ScenarioSpec> scenarios,
                                const ComparisonOptions& options);

/// The four training/evaluation combinations of {random, circular} x {orca, sfm}.
std::vector<ScenarioSpec> table_scenarios();

}  // namespace crowdnav
