#pragma once

// Run configuration: defaults < config file < command-line flags.
//
// File format: one `key = value` per line, '#' starts a comment. Booleans are
// true/false, lists are comma-separated without spaces. Unknown keys and
// malformed values are errors reported with their line number.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdnav/env.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/ppo.hpp"

namespace crowdnav {

struct RunConfig {
  std::uint64_t seed = 0;
  ActionMode mode = ActionMode::discrete;
  std::string scenario = "default";  // default, random, circular, ppo-circular, open
  std::string strategy = "default";  // default, orca, sfm, none
  bool use_ped_map = true;
  int episodes = 500;
  std::string out = "out";

  EnvConfig env;  // dt, limits, reward, lidar, pedestrian models, generation
  PpoConfig ppo;

  int train_iterations = 500;
  int train_checkpoint_every = 50;
  int train_eval_every = 0;
  int train_eval_episodes = 100;
  double train_target_success = -1.0;  // stop once periodic eval reaches it; < 0 never
  bool train_resume = false;

  std::vector<std::string> eval_checkpoints;
  int eval_trajectories = 20;  // per method and scenario
  bool eval_greedy = true;

  bool replay_maps = false;
  int replay_robot = 0;

  bool operator==(const RunConfig& o) const { return dump_config(*this) == dump_config(o); }
  friend std::string dump_config(const RunConfig& c);
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every key=value pair, one per line, in a fixed order.
std::string dump_config(const RunConfig& c);

/// Applies `text` on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Sets one key from its textual value; throws ConfigError.
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

}  // namespace crowdnav
