#include "crowdnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "crowdnav/text.hpp"

namespace crowdnav {

double success_rate(std::span<const MetricRecord> records) {
  if (records.empty()) throw std::invalid_argument("success_rate: no records");
  std::size_t hits = 0;
  for (const MetricRecord& r : records) hits += r.success() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double extra_time(const MetricRecord& record) {
  if (!record.success()) throw std::invalid_argument("extra_time: episode did not reach the goal");
  return record.episode_time - record.straight_time;
}

double avg_angular_change(std::span<const double> w) {
  if (w.size() < 2) return 0.0;
  double s = 0.0;
  for (std::size_t t = 1; t < w.size(); ++t) s += std::abs(w[t] - w[t - 1]);
  return s / static_cast<double>(w.size() - 1);
}

double avg_angular_change(const MetricRecord& record) { return avg_angular_change(record.angular); }

OrcaParams robot_orca_params() {
  OrcaParams p;
  p.max_speed = kMaxLinearSpeed;
  return p;
}

Action feedback_conversion(const Pose2D& pose, Vec2 desired, FeedbackGains gains) {
  const Vec2 heading = unit_from_angle(pose.theta);
  Action a;
  a.v = std::clamp(gains.k_v * dot(desired, heading), 0.0, kMaxLinearSpeed);
  if (norm(desired) > 1e-9) {
    const double err = normalize_angle(std::atan2(desired.y, desired.x) - pose.theta);
    a.w = std::clamp(gains.k_w * err, -kMaxAngularSpeed, kMaxAngularSpeed);
  }
  return a;
}

Action orca_robot_policy(const WorldState& world, std::size_t robot, const Pose2D& goal, double dt,
                         const OrcaParams& params, FeedbackGains gains) {
  const AgentBody& self = world.robots.at(robot);
  std::vector<Neighbor> neighbors;
  for (const Pedestrian& p : world.pedestrians) {
    neighbors.push_back({p.body.position(), p.body.velocity, p.body.radius, p.id});
  }
  for (std::size_t j = 0; j < world.robots.size(); ++j) {
    if (j == robot) continue;
    const AgentBody& b = world.robots[j];
    neighbors.push_back({b.position(), b.velocity, b.radius,
                         static_cast<int>(world.pedestrians.size() + j)});
  }
  const Vec2 to_goal = goal.position() - self.position();
  const double dist = norm(to_goal);
  const double speed = std::min(params.max_speed, dist / dt);
  const OrcaAgent agent{self.position(), self.velocity, self.radius,
                        dist > 0.0 ? to_goal * (speed / dist) : Vec2{}};
  const Vec2 v = orca_velocity(agent, neighbors, world.obstacles, params, dt).velocity;
  return feedback_conversion(self.pose, v, gains);
}

std::vector<Action> OrcaBaseline::act(const CrowdEnv& env) {
  std::vector<Action> actions(env.robot_count());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (env.done(i)) continue;
    actions[i] = orca_robot_policy(env.world(), i, env.goals()[i], env.config().dt,
                                   robot_orca_params());
  }
  return actions;
}

PpoMethod::PpoMethod(std::string name, nn::ConvNet<float> policy, ActionMode mode, bool use_ped_map,
                     bool greedy)
    : name_(std::move(name)),
      policy_(std::move(policy)),
      mode_(mode),
      use_ped_map_(use_ped_map),
      greedy_(greedy),
      rng_(make_rng(0)) {
  if (policy_.arch().hash() != policy_arch(mode_).hash()) {
    throw std::invalid_argument("policy network does not match action mode " + to_string(mode_));
  }
}

void PpoMethod::begin_episode(std::uint64_t seed) { rng_ = make_rng(seed ^ 0x5eedULL); }

std::vector<Action> PpoMethod::act(const CrowdEnv& env) {
  std::vector<Action> actions(env.robot_count());
  std::vector<std::size_t> active;
  nn::Batch<float> batch;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (env.done(i)) continue;
    active.push_back(i);
    append_observation(batch, env.observe(i));
  }
  if (active.empty()) return actions;
  const nn::ForwardResult<float> out = policy_.forward(batch, false);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    if (mode_ == ActionMode::discrete) {
      std::vector<double> logits(static_cast<std::size_t>(out.out.cols()));
      for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = out.out(row, static_cast<Eigen::Index>(j));
      actions[active[k]] = sample_discrete(logits, rng_, greedy_).action;
    } else {
      const double mean[2] = {out.out(row, 0), out.out(row, 1)};
      const double ls[2] = {out.log_std(row, 0), out.log_std(row, 1)};
      actions[active[k]] = sample_continuous(mean, ls, rng_, greedy_).action;
    }
  }
  return actions;
}

EpisodeResult run_episode(NavigationMethod& method, EnvConfig config, std::uint64_t seed,
                          bool record_trajectory) {
  config.build_observations = false;
  config.use_pedestrian_map = config.use_pedestrian_map && method.uses_pedestrian_map();
  CrowdEnv env(config);
  env.reset(seed);
  method.begin_episode(seed);

  const std::size_t n = env.robot_count();
  EpisodeResult res;
  res.records.resize(n);
  std::vector<Vec2> starts(n);
  for (std::size_t i = 0; i < n; ++i) {
    MetricRecord& r = res.records[i];
    r.method = method.name();
    r.scenario = env.scenario_id();
    r.robot = static_cast<int>(i);
    starts[i] = env.world().robots[i].position();
    // Driving straight ends once inside the goal tolerance, like any episode.
    const double d = norm(env.goals()[i].position() - starts[i]);
    r.straight_time = std::max(0.0, d - config.goal_tolerance) / kMaxLinearSpeed;
    r.trajectory.push_back(env.world().robots[i].pose);
  }
  if (record_trajectory) {
    Trajectory t;
    t.scenario = env.scenario_id();
    t.method = method.name();
    t.dt = config.dt;
    t.obstacles = env.world().obstacles;
    t.goals = env.goals();
    record_tick(t, 0, env.world(), nullptr, {}, env.outcomes());
    res.trajectory = std::move(t);
  }

  int tick = 0;
  while (!env.all_done()) {
    std::vector<Action> actions = method.act(env);
    actions.resize(n);
    std::vector<bool> was_running(n);
    for (std::size_t i = 0; i < n; ++i) {
      was_running[i] = !env.done(i);
      if (!was_running[i]) actions[i] = {};
      actions[i] = clamp_action(actions[i]);
    }
    const WorldState before = record_trajectory ? env.world() : WorldState{};
    const std::vector<RobotStep> steps = env.step(actions);
    ++tick;
    for (std::size_t i = 0; i < n; ++i) {
      if (!was_running[i]) continue;
      MetricRecord& r = res.records[i];
      r.steps += 1;
      r.angular.push_back(actions[i].w);
      r.total_reward += steps[i].reward.total();
      r.trajectory.push_back(env.world().robots[i].pose);
      if (steps[i].done) {
        r.outcome = steps[i].outcome;
        r.episode_time = r.steps * config.dt;
      }
    }
    if (record_trajectory) record_tick(*res.trajectory, tick, env.world(), &before, actions, env.outcomes());
  }
  return res;
}

std::string ScenarioSpec::label() const { return to_string(strategy) + "-" + to_string(kind); }

std::vector<ScenarioSpec> table_scenarios() {
  return {{ScenarioKind::random, PedStrategy::orca},
          {ScenarioKind::random, PedStrategy::sfm},
          {ScenarioKind::circular, PedStrategy::orca},
          {ScenarioKind::circular, PedStrategy::sfm}};
}

ComparisonRow aggregate(const std::string& method, const ScenarioSpec& scenario, int episodes,
                        std::span<const MetricRecord> records, bool angular_applicable) {
  ComparisonRow row;
  row.method = method;
  row.scenario = scenario;
  row.episodes = episodes;
  row.records = static_cast<int>(records.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (records.empty()) {
    row.success_rate = row.mean_extra_time = row.mean_angular_change = row.mean_reward = nan;
    return row;
  }
  double extra = 0.0;
  double extra_sq = 0.0;
  double ang = 0.0;
  double reward = 0.0;
  for (const MetricRecord& r : records) {
    if (r.success()) {
      ++row.successes;
      const double e = extra_time(r);
      extra += e;
      extra_sq += e * e;
    }
    ang += avg_angular_change(r);
    reward += r.total_reward;
  }
  const double n = static_cast<double>(records.size());
  row.success_rate = success_rate(records);
  row.success_half_width = 1.96 * std::sqrt(row.success_rate * (1.0 - row.success_rate) / n);
  if (row.successes > 0) {
    const double k = row.successes;
    row.mean_extra_time = extra / k;
    const double var = std::max(0.0, extra_sq / k - row.mean_extra_time * row.mean_extra_time);
    row.extra_time_half_width = 1.96 * std::sqrt(var / k);
  } else {
    row.mean_extra_time = nan;
    row.extra_time_half_width = nan;
  }
  row.mean_angular_change = angular_applicable ? ang / n : nan;
  row.mean_reward = reward / n;
  return row;
}

ComparisonReport run_comparison(std::span<NavigationMethod* const> methods,
                                std::span<const ScenarioSpec> scenarios,
                                const ComparisonOptions& options) {
  if (options.episodes < 1) throw std::invalid_argument("run_comparison: need at least one episode");
  ComparisonReport report;
  for (NavigationMethod* m : methods) {
    if (m == nullptr) {
      report.notices.push_back("skipped a missing method");
      continue;
    }
    for (const ScenarioSpec& spec : scenarios) {
      EnvConfig cfg = options.env;
      cfg.scenario = spec.kind;
      cfg.strategy = spec.strategy;
      const std::size_t first = report.records.size();
      for (int e = 0; e < options.episodes; ++e) {
        const std::uint64_t seed = options.seed_base + static_cast<std::uint64_t>(e);
        const bool record = e < options.trajectory_limit && static_cast<bool>(options.on_trajectory);
        EpisodeResult res = run_episode(*m, cfg, seed, record);
        if (record) options.on_trajectory(m->name(), spec, e, *res.trajectory);
        for (MetricRecord& r : res.records) {
          r.trajectory.clear();  // trajectory files carry the paths
          report.records.push_back(std::move(r));
        }
      }
      const std::span<const MetricRecord> group(report.records.data() + first,
                                                report.records.size() - first);
      report.rows.push_back(
          aggregate(m->name(), spec, options.episodes, group, m->reports_angular_change()));
    }
  }
  return report;
}

namespace {

std::string csv_real(double x) { return std::isnan(x) ? "NA" : format_real(x); }

nlohmann::json json_real(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace

std::string ComparisonReport::to_csv() const {
  std::ostringstream os;
  os << "method,scenario,strategy,episodes,records,successes,success_rate,success_hw,"
        "extra_time,extra_time_hw,angular_change,mean_reward\n";
  for (const ComparisonRow& r : rows) {
    os << r.method << ',' << to_string(r.scenario.kind) << ',' << to_string(r.scenario.strategy)
       << ',' << r.episodes << ',' << r.records << ',' << r.successes << ','
       << csv_real(r.success_rate) << ',' << csv_real(r.success_half_width) << ','
       << csv_real(r.mean_extra_time) << ',' << csv_real(r.extra_time_half_width) << ','
       << csv_real(r.mean_angular_change) << ',' << csv_real(r.mean_reward) << '\n';
  }
  return os.str();
}

std::string ComparisonReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const ComparisonRow& r : rows) {
    j["rows"].push_back({{"method", r.method},
                         {"scenario", to_string(r.scenario.kind)},
                         {"strategy", to_string(r.scenario.strategy)},
                         {"episodes", r.episodes},
                         {"records", r.records},
                         {"successes", r.successes},
                         {"success_rate", json_real(r.success_rate)},
                         {"success_half_width", json_real(r.success_half_width)},
                         {"extra_time", json_real(r.mean_extra_time)},
                         {"extra_time_half_width", json_real(r.extra_time_half_width)},
                         {"angular_change", json_real(r.mean_angular_change)},
                         {"mean_reward", json_real(r.mean_reward)}});
  }
  j["notices"] = notices;
  return j.dump(2) + "\n";
}

std::string ComparisonReport::records_jsonl() const {
  std::ostringstream os;
  for (const MetricRecord& r : records) {
    nlohmann::json j = {{"method", r.method},
                        {"scenario", to_string(r.scenario.kind)},
                        {"strategy", to_string(r.scenario.strategy)},
                        {"seed", r.scenario.seed},
                        {"robot", r.robot},
                        {"outcome", to_string(r.outcome)},
                        {"steps", r.steps},
                        {"episode_time", r.episode_time},
                        {"straight_time", r.straight_time},
                        {"angular_change", avg_angular_change(r)},
                        {"total_reward", r.total_reward}};
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace crowdnav
