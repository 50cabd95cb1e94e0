#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "crowdnav/eval.hpp"

using namespace crowdnav;

namespace {

MetricRecord record(Outcome o) {
  MetricRecord r;
  r.outcome = o;
  return r;
}

// Drives every robot straight at full speed.
class StraightLine final : public NavigationMethod {
 public:
  std::string name() const override { return "straight"; }
  std::vector<Action> act(const CrowdEnv& env) override {
    return std::vector<Action>(env.robot_count(), Action{kMaxLinearSpeed, 0.0});
  }
};

}  // namespace

TEST_CASE("success rate") {
  const std::vector<MetricRecord> rs{record(Outcome::reached), record(Outcome::reached),
                                     record(Outcome::collided), record(Outcome::reached)};
  CHECK(success_rate(rs) == 0.75);
  CHECK_THROWS_AS(success_rate(std::span<const MetricRecord>{}), std::invalid_argument);
}

TEST_CASE("extra time") {
  MetricRecord r = record(Outcome::reached);
  r.straight_time = 6.0 / kMaxLinearSpeed;
  r.episode_time = 14.0;
  CHECK(extra_time(r) == doctest::Approx(4.0));
  r.outcome = Outcome::timeout;
  CHECK_THROWS_AS(extra_time(r), std::invalid_argument);
}

TEST_CASE("straight unobstructed run has extra time within one step") {
  EnvConfig cfg;
  cfg.scenario = ScenarioKind::open;
  cfg.strategy = PedStrategy::none;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Face the goal first by replaying the scenario with the robot turned.
    Scenario s = generate_scenario(ScenarioKind::open, seed);
    const Vec2 to_goal = s.goals[0].position() - s.world.robots[0].position();
    s.world.robots[0].pose.theta = std::atan2(to_goal.y, to_goal.x);
    CrowdEnv env(cfg);
    env.reset(s);
    int steps = 0;
    while (!env.all_done()) {
      const Action a{kMaxLinearSpeed, 0.0};
      env.step(std::span(&a, 1));
      ++steps;
    }
    REQUIRE(env.outcomes()[0] == Outcome::reached);
    MetricRecord r = record(Outcome::reached);
    r.episode_time = steps * cfg.dt;
    r.straight_time = (norm(to_goal) - cfg.goal_tolerance) / kMaxLinearSpeed;
    CHECK(extra_time(r) >= -1e-9);
    CHECK(extra_time(r) <= cfg.dt + 1e-9);
  }
}

TEST_CASE("run_episode records straight time to the tolerance") {
  EnvConfig cfg;
  cfg.scenario = ScenarioKind::open;
  cfg.strategy = PedStrategy::none;
  StraightLine m;
  const EpisodeResult res = run_episode(m, cfg, 3, true);
  REQUIRE(res.records.size() == 1);
  const Scenario s = generate_scenario(ScenarioKind::open, 3);
  const double d = norm(s.goals[0].position() - s.world.robots[0].position());
  CHECK(res.records[0].straight_time == doctest::Approx((d - cfg.goal_tolerance) / kMaxLinearSpeed));
  REQUIRE(res.trajectory.has_value());
  CHECK(res.trajectory->tick_count() == res.records[0].steps + 1);
}

TEST_CASE("average angular change") {
  const std::vector<double> a{0.0, 0.3, 0.3, 0.9};
  CHECK(avg_angular_change(a) == doctest::Approx(0.3));
  std::vector<double> alt;
  for (int i = 0; i < 10; ++i) alt.push_back(i % 2 == 0 ? 0.9 : -0.9);
  CHECK(avg_angular_change(alt) == doctest::Approx(1.8));
  CHECK(avg_angular_change(std::vector<double>{0.4}) == 0.0);
}

TEST_CASE("feedback conversion clamps") {
  const Action ahead = feedback_conversion({0, 0, 0}, {0.6, 0.0});
  CHECK(ahead.v == doctest::Approx(0.6));
  CHECK(ahead.w == 0.0);
  const Action behind = feedback_conversion({0, 0, 0}, {-0.6, 0.0});
  CHECK(behind.v == 0.0);
  CHECK(std::abs(behind.w) == doctest::Approx(kMaxAngularSpeed));
}

TEST_CASE("orca robot policy toward a free goal") {
  WorldState w;
  AgentBody r;
  w.robots.push_back(r);
  const Action ahead = orca_robot_policy(w, 0, {4.0, 0.0, 0.0}, 0.1);
  CHECK(ahead.v == doctest::Approx(0.6));
  CHECK(std::abs(ahead.w) < 1e-12);
  const Action behind = orca_robot_policy(w, 0, {-4.0, 0.0, 0.0}, 0.1);
  CHECK(behind.v < 1e-9);
  CHECK(std::abs(behind.w) == doctest::Approx(kMaxAngularSpeed));
}

TEST_CASE("aggregate handles missing successes and angular change") {
  std::vector<MetricRecord> rs{record(Outcome::collided), record(Outcome::timeout)};
  rs[0].angular = {0.0, 0.9};
  const ComparisonRow row = aggregate("orca", {}, 2, rs, false);
  CHECK(row.success_rate == 0.0);
  CHECK(std::isnan(row.mean_extra_time));
  CHECK(std::isnan(row.mean_angular_change));
  const ComparisonRow ppo = aggregate("ppo", {}, 2, rs, true);
  CHECK(ppo.mean_angular_change == doctest::Approx(0.45 + 0.0));
}

TEST_CASE("paired comparison is reproducible and reports every group") {
  OrcaBaseline orca;
  StraightLine straight;
  std::vector<NavigationMethod*> methods{&orca, &straight};
  ComparisonOptions opt;
  opt.episodes = 6;
  opt.seed_base = 100;
  int trajectories = 0;
  opt.trajectory_limit = 2;
  opt.on_trajectory = [&](const std::string&, const ScenarioSpec&, int, const Trajectory&) { ++trajectories; };
  const auto specs = table_scenarios();
  const ComparisonReport a = run_comparison(methods, specs, opt);
  CHECK(a.rows.size() == 2 * specs.size());
  CHECK(trajectories == static_cast<int>(2 * specs.size() * 2));
  opt.on_trajectory = nullptr;
  const ComparisonReport b = run_comparison(methods, specs, opt);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.records_jsonl() == b.records_jsonl());
  CHECK(a.to_csv().find("NA") != std::string::npos);  // baseline angular change
  for (const ComparisonRow& r : a.rows) {
    CHECK(r.episodes == 6);
    CHECK(r.records == 12);
  }
}

TEST_CASE("scenario labels") {
  CHECK(ScenarioSpec{ScenarioKind::circular, PedStrategy::sfm}.label() == "sfm-circular");
  CHECK(table_scenarios().size() == 4);
}
