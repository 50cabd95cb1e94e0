#include "crowdnav/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "crowdnav/text.hpp"

namespace crowdnav {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("bad value '" + value + "' for " + key + " (expected " + want + ")");
}

template <typename M>
Field real_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return format_real(member(const_cast<RunConfig&>(c))); },
          [member, key](RunConfig& c, const std::string& v) {
            const auto x = parse_real(v);
            if (!x) bad(key, v, "a number");
            member(c) = *x;
          }};
}

template <typename M>
Field int_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member, key](RunConfig& c, const std::string& v) {
            const auto x = parse_int(v);
            if (!x) bad(key, v, "an integer");
            using Target = std::remove_reference_t<decltype(member(c))>;
            member(c) = static_cast<Target>(*x);
          }};
}

template <typename M>
Field bool_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)) ? "true" : "false"; },
          [member, key](RunConfig& c, const std::string& v) {
            if (v == "true" || v == "1") {
              member(c) = true;
            } else if (v == "false" || v == "0") {
              member(c) = false;
            } else {
              bad(key, v, "true or false");
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& s) {
                   const auto x = parse_uint(s);
                   if (!x) bad("seed", s, "a non-negative integer");
                   c.seed = *x;
                 }});
    v.push_back({"mode", [](const RunConfig& c) { return to_string(c.mode); },
                 [](RunConfig& c, const std::string& s) {
                   try {
                     c.mode = parse_action_mode(s);
                   } catch (const std::exception&) {
                     bad("mode", s, "discrete or continuous");
                   }
                 }});
    v.push_back({"scenario", [](const RunConfig& c) { return c.scenario; },
                 [](RunConfig& c, const std::string& s) {
                   if (s != "default") {
                     try {
                       parse_scenario_kind(s);
                     } catch (const std::exception&) {
                       bad("scenario", s, "default, random, circular, ppo-circular or open");
                     }
                   }
                   c.scenario = s;
                 }});
    v.push_back({"strategy", [](const RunConfig& c) { return c.strategy; },
                 [](RunConfig& c, const std::string& s) {
                   if (s != "default") {
                     try {
                       parse_ped_strategy(s);
                     } catch (const std::exception&) {
                       bad("strategy", s, "default, orca, sfm or none");
                     }
                   }
                   c.strategy = s;
                 }});
    v.push_back(bool_field("use_ped_map", [](RunConfig& c) -> bool& { return c.use_ped_map; }));
    v.push_back(int_field("episodes", [](RunConfig& c) -> int& { return c.episodes; }));
    v.push_back({"out", [](const RunConfig& c) { return c.out; },
                 [](RunConfig& c, const std::string& s) {
                   if (s.empty()) bad("out", s, "a directory");
                   c.out = s;
                 }});

    v.push_back(real_field("env.dt", [](RunConfig& c) -> double& { return c.env.dt; }));
    v.push_back(int_field("env.max_steps", [](RunConfig& c) -> int& { return c.env.max_steps; }));
    v.push_back(real_field("env.goal_tolerance", [](RunConfig& c) -> double& { return c.env.goal_tolerance; }));
    v.push_back(real_field("reward.arrival", [](RunConfig& c) -> double& { return c.env.reward.arrival; }));
    v.push_back(real_field("reward.collision", [](RunConfig& c) -> double& { return c.env.reward.collision; }));
    v.push_back(real_field("reward.proximity_weight", [](RunConfig& c) -> double& { return c.env.reward.proximity_weight; }));
    v.push_back(real_field("reward.proximity_range", [](RunConfig& c) -> double& { return c.env.reward.proximity_range; }));
    v.push_back(real_field("reward.shaping_weight", [](RunConfig& c) -> double& { return c.env.reward.shaping_weight; }));
    v.push_back(real_field("reward.step", [](RunConfig& c) -> double& { return c.env.reward.step; }));
    v.push_back(int_field("lidar.beams", [](RunConfig& c) -> int& { return c.env.lidar.beams; }));
    v.push_back(real_field("lidar.fov", [](RunConfig& c) -> double& { return c.env.lidar.fov; }));
    v.push_back(real_field("lidar.max_range", [](RunConfig& c) -> double& { return c.env.lidar.max_range; }));
    v.push_back(real_field("orca.neighbor_dist", [](RunConfig& c) -> double& { return c.env.orca.neighbor_dist; }));
    v.push_back(real_field("orca.time_horizon_agents", [](RunConfig& c) -> double& { return c.env.orca.time_horizon_agents; }));
    v.push_back(real_field("orca.time_horizon_obstacles", [](RunConfig& c) -> double& { return c.env.orca.time_horizon_obstacles; }));
    v.push_back(real_field("orca.max_speed", [](RunConfig& c) -> double& { return c.env.orca.max_speed; }));
    v.push_back(int_field("orca.max_neighbors", [](RunConfig& c) -> std::size_t& { return c.env.orca.max_neighbors; }));
    v.push_back(real_field("sfm.relaxation_time", [](RunConfig& c) -> double& { return c.env.sfm.relaxation_time; }));
    v.push_back(real_field("sfm.agent_strength", [](RunConfig& c) -> double& { return c.env.sfm.agent_strength; }));
    v.push_back(real_field("sfm.agent_range", [](RunConfig& c) -> double& { return c.env.sfm.agent_range; }));
    v.push_back(real_field("sfm.obstacle_strength", [](RunConfig& c) -> double& { return c.env.sfm.obstacle_strength; }));
    v.push_back(real_field("sfm.obstacle_range", [](RunConfig& c) -> double& { return c.env.sfm.obstacle_range; }));
    v.push_back(real_field("sfm.desired_speed", [](RunConfig& c) -> double& { return c.env.sfm.desired_speed; }));
    v.push_back(real_field("sfm.max_speed_factor", [](RunConfig& c) -> double& { return c.env.sfm.max_speed_factor; }));
    v.push_back(real_field("generation.clearance", [](RunConfig& c) -> double& { return c.env.generation.clearance; }));
    v.push_back(real_field("generation.min_robot_travel", [](RunConfig& c) -> double& { return c.env.generation.min_robot_travel; }));
    v.push_back(int_field("generation.max_attempts", [](RunConfig& c) -> int& { return c.env.generation.max_attempts; }));

    v.push_back(real_field("ppo.lr_policy", [](RunConfig& c) -> double& { return c.ppo.lr_policy; }));
    v.push_back(real_field("ppo.lr_value", [](RunConfig& c) -> double& { return c.ppo.lr_value; }));
    v.push_back(real_field("ppo.gamma", [](RunConfig& c) -> double& { return c.ppo.gamma; }));
    v.push_back(real_field("ppo.lambda", [](RunConfig& c) -> double& { return c.ppo.lambda; }));
    v.push_back(real_field("ppo.clip", [](RunConfig& c) -> double& { return c.ppo.clip; }));
    v.push_back(int_field("ppo.epochs", [](RunConfig& c) -> int& { return c.ppo.epochs; }));
    v.push_back(int_field("ppo.minibatch", [](RunConfig& c) -> int& { return c.ppo.minibatch; }));
    v.push_back(real_field("ppo.entropy_coef", [](RunConfig& c) -> double& { return c.ppo.entropy_coef; }));
    v.push_back(real_field("ppo.max_grad_norm", [](RunConfig& c) -> double& { return c.ppo.max_grad_norm; }));
    v.push_back(int_field("ppo.buffer_size", [](RunConfig& c) -> int& { return c.ppo.buffer_size; }));
    v.push_back(bool_field("ppo.normalize_advantages", [](RunConfig& c) -> bool& { return c.ppo.normalize_advantages; }));
    v.push_back(real_field("ppo.adam_beta1", [](RunConfig& c) -> double& { return c.ppo.adam_beta1; }));
    v.push_back(real_field("ppo.adam_beta2", [](RunConfig& c) -> double& { return c.ppo.adam_beta2; }));
    v.push_back(real_field("ppo.adam_eps", [](RunConfig& c) -> double& { return c.ppo.adam_eps; }));

    v.push_back(int_field("train.iterations", [](RunConfig& c) -> int& { return c.train_iterations; }));
    v.push_back(int_field("train.checkpoint_every", [](RunConfig& c) -> int& { return c.train_checkpoint_every; }));
    v.push_back(int_field("train.eval_every", [](RunConfig& c) -> int& { return c.train_eval_every; }));
    v.push_back(int_field("train.eval_episodes", [](RunConfig& c) -> int& { return c.train_eval_episodes; }));
    v.push_back(real_field("train.target_success", [](RunConfig& c) -> double& { return c.train_target_success; }));
    v.push_back(bool_field("train.resume", [](RunConfig& c) -> bool& { return c.train_resume; }));

    v.push_back({"eval.checkpoints",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.eval_checkpoints.size(); ++i) {
                     s += (i ? "," : "") + c.eval_checkpoints[i];
                   }
                   return s;
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.eval_checkpoints.clear();
                   std::size_t start = 0;
                   while (start <= s.size() && !s.empty()) {
                     const std::size_t comma = s.find(',', start);
                     const std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                     if (item.empty()) bad("eval.checkpoints", s, "comma-separated paths");
                     c.eval_checkpoints.push_back(item);
                     if (comma == std::string::npos) break;
                     start = comma + 1;
                   }
                 }});
    v.push_back(int_field("eval.trajectories", [](RunConfig& c) -> int& { return c.eval_trajectories; }));
    v.push_back(bool_field("eval.greedy", [](RunConfig& c) -> bool& { return c.eval_greedy; }));
    v.push_back(bool_field("replay.maps", [](RunConfig& c) -> bool& { return c.replay_maps; }));
    v.push_back(int_field("replay.robot", [](RunConfig& c) -> int& { return c.replay_robot; }));
    return v;
  }();
  return f;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const Field& f : fields()) k.push_back(f.key);
  return k;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.key << " = " << f.get(c) << '\n';
  return os.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace crowdnav
