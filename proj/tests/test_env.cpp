#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "crowdnav/env.hpp"

using namespace crowdnav;

namespace {

bool same_world(const WorldState& a, const WorldState& b) {
  if (a.robots.size() != b.robots.size() || a.pedestrians.size() != b.pedestrians.size() ||
      a.obstacles.size() != b.obstacles.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.robots.size(); ++i) {
    if (!(a.robots[i].pose == b.robots[i].pose) || !(a.robots[i].velocity == b.robots[i].velocity)) return false;
  }
  for (std::size_t i = 0; i < a.pedestrians.size(); ++i) {
    const Pedestrian& p = a.pedestrians[i];
    const Pedestrian& q = b.pedestrians[i];
    if (!(p.body.pose == q.body.pose) || !(p.body.velocity == q.body.velocity) ||
        p.gait.phase != q.gait.phase || !(p.goal == q.goal)) {
      return false;
    }
  }
  return true;
}

Scenario straight_scenario(double distance) {
  Scenario s;
  AgentBody r;
  r.pose = {-distance / 2, 0.0, 0.0};
  s.world.robots.push_back(r);
  s.goals.push_back({distance / 2, 0.0, 0.0});
  return s;
}

}  // namespace

TEST_CASE("reward examples") {
  const Vec2 goal{0.0, 0.0};
  const RewardBreakdown arrive = compute_reward({0.25, 0.0}, {0.2, 0.0}, goal, Outcome::reached, 1.5);
  CHECK(arrive.total() == doctest::Approx(505.0).epsilon(1e-12));
  CHECK(arrive.shaping == doctest::Approx(10.0).epsilon(1e-12));

  const RewardBreakdown close = compute_reward({1.0, 1.0}, {1.0, 1.0}, goal, Outcome::running, 0.5);
  CHECK(close.total() == doctest::Approx(-30.0).epsilon(1e-12));

  const RewardBreakdown crash = compute_reward({1.0, 1.0}, {1.0, 1.0}, goal, Outcome::collided, 0.1);
  CHECK(crash.total() == doctest::Approx(-505.0).epsilon(1e-12));
  CHECK(crash.safe == -500.0);
}

TEST_CASE("reward branches are exclusive") {
  const Vec2 g{3.0, 0.0};
  CHECK(compute_reward({}, {}, g, Outcome::running, 2.0).safe == 0.0);
  CHECK(compute_reward({}, {}, g, Outcome::running, 0.0).safe == -50.0);
  const RewardBreakdown hit = compute_reward({}, {}, g, Outcome::collided, 0.0);
  CHECK(hit.safe == -500.0);
  CHECK(hit.goal == 0.0);
  const RewardBreakdown win = compute_reward({}, {}, g, Outcome::reached, 0.2);
  CHECK(win.goal == 500.0);
  CHECK(win.step == -5.0);
}

TEST_CASE("shaping telescopes along random trajectories") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 100; ++t) {
    const Vec2 goal{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    Vec2 p{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec2 start = p;
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vec2 next = p + Vec2{uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06)};
      sum += compute_reward(p, next, goal, Outcome::running, 5.0).shaping;
      p = next;
    }
    CHECK(std::abs(sum - 200.0 * (norm(start - goal) - norm(p - goal))) < 1e-9);
  }
}

TEST_CASE("discrete action table") {
  CHECK(discrete_action(0) == Action{0.0, -0.9});
  CHECK(discrete_action(27) == Action{0.6, 0.9});
  CHECK(discrete_action(3 * 7 + 3) == Action{0.6, 0.0});
  bool clamped = false;
  CHECK(clamp_action({0.7, -2.0}, &clamped) == Action{0.6, -0.9});
  CHECK(clamped);
  clamp_action({0.3, 0.1}, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("random scenario layout") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scenario s = generate_scenario(ScenarioKind::random, seed);
    REQUIRE(s.world.robots.size() == 2);
    REQUIRE(s.world.pedestrians.size() == 4);
    REQUIRE(s.world.obstacles.size() == 4);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(norm(s.world.robots[i].position() - s.goals[i].position()) >= 3.0);
      CHECK_FALSE(detect_collisions(s.world, i).collided);
    }
  }
  const Scenario a = generate_scenario(ScenarioKind::random, 77);
  const Scenario b = generate_scenario(ScenarioKind::random, 77);
  CHECK(same_world(a.world, b.world));
}

TEST_CASE("circular scenario layout") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scenario s = generate_scenario(ScenarioKind::circular, seed);
    REQUIRE(s.world.robots.size() == 2);
    REQUIRE(s.world.pedestrians.size() == 4);
    const double radius = norm(s.world.robots[0].position());
    CHECK(radius >= 2.5);
    CHECK(radius <= 4.5);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(norm(s.world.robots[i].position()) - radius) < 1e-9);
      CHECK(norm(s.goals[i].position() - s.world.robots[i].position()) ==
            doctest::Approx(2 * radius).epsilon(1e-9));
      CHECK_FALSE(detect_collisions(s.world, i).collided);
    }
    for (const Pedestrian& p : s.world.pedestrians) {
      CHECK(std::abs(norm(p.body.position()) - radius) < 1e-9);
      CHECK(norm(p.goal + p.body.position()) < 1e-9);
    }
  }
  const Scenario p = generate_scenario(ScenarioKind::ppo_circular, 3);
  CHECK(p.world.robots.size() == 5);
  CHECK(p.world.pedestrians.empty());
  const Scenario o = generate_scenario(ScenarioKind::open, 3);
  CHECK(o.world.robots.size() == 1);
  CHECK(o.world.pedestrians.empty());
  CHECK(o.world.obstacles.empty());
}

TEST_CASE("scenario id round trip") {
  const ScenarioId id{ScenarioKind::circular, PedStrategy::sfm, 1234567890123ULL};
  CHECK(ScenarioId::parse(id.to_line()) == id);
  CHECK_THROWS(ScenarioId::parse("nonsense"));
  CHECK(parse_scenario_kind("ppo-circular") == ScenarioKind::ppo_circular);
  CHECK_THROWS(parse_ped_strategy("teleport"));
}

TEST_CASE("straight drive reaches the goal and shaping telescopes") {
  EnvConfig cfg;
  cfg.strategy = PedStrategy::none;
  CrowdEnv env(cfg);
  env.reset(straight_scenario(4.0));
  double shaping = 0.0;
  const Vec2 start = env.world().robots[0].position();
  Outcome out = Outcome::running;
  while (!env.all_done()) {
    const Action a{0.6, 0.0};
    const auto r = env.step(std::span(&a, 1));
    shaping += r[0].reward.shaping;
    out = r[0].outcome;
  }
  CHECK(out == Outcome::reached);
  const Vec2 end = env.world().robots[0].position();
  const Vec2 goal = env.goals()[0].position();
  CHECK(shaping == doctest::Approx(200.0 * (norm(start - goal) - norm(end - goal))).epsilon(1e-12));
  CHECK(norm(end - goal) < cfg.goal_tolerance);
}

TEST_CASE("driving into a wall collides in time") {
  EnvConfig cfg;
  cfg.strategy = PedStrategy::none;
  CrowdEnv env(cfg);
  Scenario s = straight_scenario(8.0);
  s.world.obstacles.push_back({Rect{{0.0, 0.0}, {0.2, 2.0}}});
  env.reset(s);
  const double gap = 4.0 - 0.2 - kRobotRadius;
  const int bound = static_cast<int>(std::ceil(gap / (0.6 * cfg.dt)));
  int steps = 0;
  while (!env.all_done()) {
    const Action a{0.6, 0.0};
    env.step(std::span(&a, 1));
    ++steps;
  }
  CHECK(env.outcomes()[0] == Outcome::collided);
  CHECK(steps <= bound);
}

TEST_CASE("finished episodes are frozen and further steps are no-ops") {
  EnvConfig cfg;
  cfg.strategy = PedStrategy::none;
  cfg.max_steps = 5;
  CrowdEnv env(cfg);
  env.reset(straight_scenario(6.0));
  const Action a{0.0, 0.0};
  for (int i = 0; i < 5; ++i) env.step(std::span(&a, 1));
  CHECK(env.outcomes()[0] == Outcome::timeout);
  const Pose2D frozen = env.world().robots[0].pose;
  const Action go{0.6, 0.5};
  const auto r = env.step(std::span(&go, 1));
  CHECK(r[0].done);
  CHECK(env.world().robots[0].pose == frozen);
  CHECK(env.step_count() <= 5);
}

TEST_CASE("identical seeds and actions give identical episodes") {
  for (PedStrategy strat : {PedStrategy::orca, PedStrategy::sfm}) {
    EnvConfig cfg;
    cfg.strategy = strat;
    CrowdEnv a(cfg);
    CrowdEnv b(cfg);
    a.reset(5);
    b.reset(5);
    Rng rng = make_rng(8);
    while (!a.all_done()) {
      std::vector<Action> acts;
      for (std::size_t i = 0; i < a.robot_count(); ++i) {
        acts.push_back(discrete_action(static_cast<int>(uniform_index(rng, kDiscreteActions))));
      }
      const auto ra = a.step(acts);
      const auto rb = b.step(acts);
      for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].reward.total() == rb[i].reward.total());
      CHECK(same_world(a.world(), b.world()));
    }
    CHECK(b.all_done());
    CHECK(a.step_count() <= 200);
  }
}

TEST_CASE("ped map ablation zeroes channels but keeps shapes") {
  EnvConfig cfg;
  cfg.scenario = ScenarioKind::circular;
  cfg.use_pedestrian_map = false;
  CrowdEnv env(cfg);
  env.reset(2);
  for (int k = 0; k < 20 && !env.all_done(); ++k) {
    std::vector<Action> acts(env.robot_count(), Action{0.3, 0.0});
    for (const RobotStep& r : env.step(acts)) {
      CHECK(r.observation.pedestrian_map.occupancy.size() == static_cast<std::size_t>(kMapCells));
      CHECK(r.observation.pedestrian_map.empty());
    }
  }
}

TEST_CASE("wrong action counts are rejected") {
  CrowdEnv env(EnvConfig{});
  env.reset(1);
  std::vector<Action> one(1);
  CHECK_THROWS_AS(env.step(one), std::invalid_argument);
}
