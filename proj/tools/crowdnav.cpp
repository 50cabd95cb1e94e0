// Command-line front end: train / eval / replay / bench.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdnav/checkpoint.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/eval.hpp"
#include "crowdnav/perception.hpp"
#include "crowdnav/rollout.hpp"
#include "crowdnav/text.hpp"
#include "crowdnav/trainer.hpp"
#include "crowdnav/trajectory.hpp"

namespace fs = std::filesystem;
using namespace crowdnav;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario;
  std::optional<std::string> strategy;
  std::optional<std::string> mode;
  bool no_ped_map = false;
  std::optional<int> episodes;
  std::optional<std::string> out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_option("--scenario", f.scenario, "default, random, circular, ppo-circular or open");
  cmd->add_option("--strategy", f.strategy, "Pedestrian model: default, orca, sfm or none");
  cmd->add_option("--mode", f.mode, "Action space: discrete or continuous");
  cmd->add_flag("--no-ped-map", f.no_ped_map, "Zero the pedestrian-map channels");
  cmd->add_option("--episodes", f.episodes, "Evaluation episodes per scenario");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.sets, "Override any config key: --set key=value");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c;
  try {
    if (!f.config.empty()) c = load_config(f.config, c);
    if (f.seed) set_config_value(c, "seed", std::to_string(*f.seed));
    if (f.scenario) set_config_value(c, "scenario", *f.scenario);
    if (f.strategy) set_config_value(c, "strategy", *f.strategy);
    if (f.mode) set_config_value(c, "mode", *f.mode);
    if (f.no_ped_map) c.use_ped_map = false;
    if (f.episodes) set_config_value(c, "episodes", std::to_string(*f.episodes));
    if (f.out) set_config_value(c, "out", *f.out);
    for (const std::string& s : f.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
    }
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  c.env.use_pedestrian_map = c.use_ped_map;
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", dump_config(c));
  return dir;
}

EnvConfig env_for(const RunConfig& c, ScenarioKind kind, PedStrategy strategy) {
  EnvConfig e = c.env;
  e.scenario = kind;
  e.strategy = strategy;
  return e;
}

std::vector<ScenarioSpec> eval_scenarios(const RunConfig& c) {
  if (c.scenario == "default") {
    if (c.strategy == "default") return table_scenarios();
    const PedStrategy s = parse_ped_strategy(c.strategy);
    return {{ScenarioKind::random, s}, {ScenarioKind::circular, s}};
  }
  const ScenarioKind k = parse_scenario_kind(c.scenario);
  if (c.strategy != "default") return {{k, parse_ped_strategy(c.strategy)}};
  if (k == ScenarioKind::open || k == ScenarioKind::ppo_circular) return {{k, PedStrategy::orca}};
  return {{k, PedStrategy::orca}, {k, PedStrategy::sfm}};
}

std::string checkpoint_name(int iteration) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%04d.bin", iteration);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  TrainerConfig tc;
  tc.mode = c.mode;
  tc.ppo = c.ppo;
  tc.env = c.env;
  tc.seed = c.seed;
  tc.eval_every = c.train_eval_every;
  tc.eval_episodes = c.train_eval_episodes;
  if (c.scenario != "default" || c.strategy != "default") {
    for (const ScenarioSpec& s : eval_scenarios(c)) tc.envs.push_back(env_for(c, s.kind, s.strategy));
    // Fill up to four parallel environments by cycling the requested set.
    const std::size_t n = tc.envs.size();
    while (tc.envs.size() < 4) tc.envs.push_back(tc.envs[tc.envs.size() % n]);
    tc.eval_env = tc.envs.front();
  }
  Trainer trainer(tc);

  const fs::path log_path = dir / "train_log.txt";
  const fs::path latest = dir / "checkpoint_latest.bin";
  bool resumed = false;
  if (c.train_resume && fs::exists(latest)) {
    trainer.restore(load_checkpoint(latest.string(), trainer.policy().arch(), nn::NetArch::value()));
    resumed = true;
    std::cout << "resumed at iteration " << trainer.iteration() << "\n";
  }
  std::ofstream log(log_path, resumed ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot open " + log_path.string());
  if (!resumed) {
    const Checkpoint initial = trainer.checkpoint();
    save_checkpoint((dir / checkpoint_name(0)).string(), initial);
    save_checkpoint(latest.string(), initial);
  }

  while (trainer.iteration() < c.train_iterations) {
    const IterationRecord rec = trainer.iterate();
    const std::string line = format_record(rec);
    log << line << '\n';
    log.flush();
    std::cout << line << std::endl;
    const bool stop = rec.eval && c.train_target_success >= 0.0 &&
                      rec.eval->success_rate >= c.train_target_success;
    if (c.train_checkpoint_every > 0 && rec.iteration % c.train_checkpoint_every == 0) {
      save_checkpoint((dir / checkpoint_name(rec.iteration)).string(), trainer.checkpoint());
    }
    save_checkpoint(latest.string(), trainer.checkpoint());
    if (stop) {
      std::cout << "target success reached at iteration " << rec.iteration << "\n";
      break;
    }
  }
  save_checkpoint((dir / "checkpoint_final.bin").string(), trainer.checkpoint());
  return 0;
}

int cmd_eval(const RunConfig& c) {
  const fs::path dir = prepare_out(c);
  const nn::NetArch parch = policy_arch(c.mode);
  OrcaBaseline baseline;
  std::vector<std::unique_ptr<PpoMethod>> owned;
  std::vector<NavigationMethod*> methods{&baseline};
  std::vector<std::string> notices;
  for (const std::string& path : c.eval_checkpoints) {
    if (!fs::exists(path)) {
      notices.push_back("checkpoint " + path + " not found; method skipped");
      std::cerr << notices.back() << "\n";
      continue;
    }
    const Checkpoint ck = load_checkpoint(path, parch, nn::NetArch::value());
    nn::ConvNet<float> net(parch);
    net.params() = ck.policy;
    const std::string name = "ppo-" + fs::path(path).stem().string();
    owned.push_back(std::make_unique<PpoMethod>(name, std::move(net), c.mode, c.use_ped_map, c.eval_greedy));
    methods.push_back(owned.back().get());
  }

  const fs::path traj_dir = dir / "trajectories";
  fs::create_directories(traj_dir);
  ComparisonOptions opt;
  opt.episodes = c.episodes;
  opt.seed_base = c.seed;
  opt.env = c.env;
  opt.trajectory_limit = c.eval_trajectories;
  opt.on_trajectory = [&](const std::string& method, const ScenarioSpec& spec, int episode,
                          const Trajectory& t) {
    char name[256];
    std::snprintf(name, sizeof name, "%s_%s_%04d.traj", method.c_str(), spec.label().c_str(), episode);
    save_trajectory((traj_dir / name).string(), t);
  };
  const std::vector<ScenarioSpec> scenarios = eval_scenarios(c);
  ComparisonReport report = run_comparison(methods, scenarios, opt);
  report.notices.insert(report.notices.begin(), notices.begin(), notices.end());

  write_text(dir / "report.csv", report.to_csv());
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "records.jsonl", report.records_jsonl());
  std::cout << report.to_csv();
  return 0;
}

int cmd_replay(const RunConfig& c, const std::vector<std::string>& files) {
  if (files.empty()) throw UsageError("replay needs at least one trajectory file");
  const fs::path dir(c.out);
  fs::create_directories(dir);
  for (const std::string& file : files) {
    Trajectory t;
    try {
      t = load_trajectory(file);
    } catch (const TrajectoryParseError& e) {
      throw std::runtime_error(file + ": " + e.what());
    }
    const std::string stem = fs::path(file).stem().string();
    write_text(dir / (stem + ".svg"), render_svg(t));
    std::cout << stem << ".svg ticks=" << t.tick_count() << "\n";
    if (!c.replay_maps || t.rows.empty()) continue;
    const fs::path maps = dir / (stem + "_maps");
    fs::create_directories(maps);
    const int robots = t.agent_count(AgentKind::robot);
    if (c.replay_robot < 0 || c.replay_robot >= robots) {
      throw UsageError("replay.robot out of range for " + file);
    }
    const auto robot = static_cast<std::size_t>(c.replay_robot);
    for (int tick = 0; tick < t.tick_count(); ++tick) {
      const WorldState w = reconstruct_world(t, tick);
      const SensorMap sm = build_sensor_map(w, robot, c.env.lidar);
      const PedestrianMap pm = build_pedestrian_map(w, robot);
      char base[64];
      std::snprintf(base, sizeof base, "tick_%04d", tick);
      write_sensor_map_pgm((maps / (std::string(base) + "_sensor.pgm")).string(), sm);
      write_pedestrian_map_pgm((maps / (std::string(base) + "_ped.pgm")).string(), pm, 0);
      write_text(maps / (std::string(base) + ".txt"),
                 sensor_map_to_text(sm) + "\n" + pedestrian_map_to_text(pm));
    }
  }
  return 0;
}

int cmd_bench(const RunConfig& c) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };

  const nn::NetArch arch = policy_arch(c.mode);
  std::cout << "policy parameters " << arch.parameter_count() << "\n";
  std::cout << "value parameters " << nn::NetArch::value().parameter_count() << "\n";

  for (const ScenarioSpec& s : eval_scenarios(c)) {
    CrowdEnv env(env_for(c, s.kind, s.strategy));
    int steps = 0;
    const auto t0 = clock::now();
    for (std::uint64_t ep = 0; ep < 3; ++ep) {
      env.reset(c.seed + ep);
      while (!env.all_done()) {
        std::vector<Action> a(env.robot_count(), Action{0.3, 0.1});
        env.step(a);
        ++steps;
      }
    }
    std::cout << "env " << s.label() << " " << ms(clock::now() - t0) / steps << " ms/step\n";
  }

  nn::ConvNet<float> net(arch, c.seed);
  for (const std::size_t n : {std::size_t{1}, std::size_t{64}}) {
    nn::Batch<float> b;
    b.n = n;
    b.maps.assign(n * kObservationFloats, 0.5F);
    b.goals.assign(n * kGoalDim, 1.0F);
    const auto t0 = clock::now();
    auto r = net.forward(b, true);
    const auto t1 = clock::now();
    std::vector<float> g(net.params().size());
    net.backward(r.cache, nn::Mat<float>::Ones(static_cast<Eigen::Index>(n), arch.outputs),
                 r.log_std.size() ? nn::Mat<float>::Zero(r.log_std.rows(), r.log_std.cols()) : nn::Mat<float>(),
                 g);
    const auto t2 = clock::now();
    std::cout << "batch " << n << " forward " << ms(t1 - t0) / n << " ms/sample, backward "
              << ms(t2 - t1) / n << " ms/sample\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd navigation laboratory"};
  app.require_subcommand(1);
  CommonFlags f;
  std::vector<std::string> replay_files;
  std::vector<std::string> checkpoints;
  std::optional<int> iterations;
  bool maps = false;

  CLI::App* train = app.add_subcommand("train", "Train a PPO policy");
  add_common(train, f);
  train->add_option("--iterations", iterations, "Training iterations");
  CLI::App* eval = app.add_subcommand("eval", "Compare the ORCA baseline and checkpoints");
  add_common(eval, f);
  eval->add_option("--checkpoint", checkpoints, "Policy checkpoint (repeatable)");
  CLI::App* replay = app.add_subcommand("replay", "Render trajectory files");
  add_common(replay, f);
  replay->add_option("files", replay_files, "Trajectory files");
  replay->add_flag("--maps", maps, "Also dump per-tick sensor and pedestrian maps");
  CLI::App* bench = app.add_subcommand("bench", "Time environment and network");
  add_common(bench, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig c = resolve(f);
    if (iterations) c.train_iterations = *iterations;
    if (maps) c.replay_maps = true;
    for (const std::string& p : checkpoints) c.eval_checkpoints.push_back(p);
    if (c.train_iterations < 0 || c.episodes < 1) throw UsageError("iterations must be >= 0 and episodes >= 1");

    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) return cmd_eval(c);
    if (replay->parsed()) return cmd_replay(c, replay_files);
    if (bench->parsed()) return cmd_bench(c);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
