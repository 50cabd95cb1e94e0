#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdnav/checkpoint.hpp"
#include "crowdnav/env.hpp"
#include "crowdnav/network.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/rollout.hpp"

namespace crowdnav {

struct TrainerConfig {
  ActionMode mode = ActionMode::discrete;
  PpoConfig ppo;
  /// Training environments; empty means the four standard ones built from `env`.
  std::vector<EnvConfig> envs;
  EnvConfig env;
  std::uint64_t seed = 0;
  /// Periodic greedy evaluation on `eval_env` every `eval_every` iterations
  /// (0 disables) over `eval_episodes` fixed seeds.
  int eval_every = 0;
  int eval_episodes = 100;
  std::optional<EnvConfig> eval_env;

  std::vector<EnvConfig> resolved_envs() const;
};

struct EvalSummary {
  int episodes = 0;
  int records = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

/// Greedy (or sampled) roll-outs of a policy over seeds seed_base + i.
EvalSummary evaluate_policy(const nn::ConvNet<float>& policy, ActionMode mode, const EnvConfig& env,
                            int episodes, std::uint64_t seed_base, bool greedy = true);

struct IterationRecord {
  int iteration = 0;
  int episodes = 0;  // robot-episodes finished during collection
  double mean_reward = 0.0;
  double success_rate = 0.0;
  PpoStats stats;
  std::optional<EvalSummary> eval;
};

/// One log line: space-separated key=value pairs.
std::string format_record(const IterationRecord& r);

class Trainer {
 public:
  explicit Trainer(TrainerConfig cfg);

  /// Collects one buffer and runs one PPO update.
  IterationRecord iterate();

  /// Evaluation on the configured eval environment with the fixed eval seeds.
  EvalSummary evaluate() const;

  int iteration() const { return iteration_; }
  const TrainerConfig& config() const { return cfg_; }
  nn::ConvNet<float>& policy() { return policy_; }
  nn::ConvNet<float>& value() { return value_; }
  const nn::ConvNet<float>& policy() const { return policy_; }

  Checkpoint checkpoint(bool with_optimizer = true) const;
  /// Resumes from a checkpoint; streams restart from a seed tied to its iteration.
  void restore(const Checkpoint& ckpt);

 private:
  void reseed(std::uint64_t salt);

  TrainerConfig cfg_;
  nn::ConvNet<float> policy_;
  nn::ConvNet<float> value_;
  AdamState<float> policy_adam_;
  AdamState<float> value_adam_;
  std::unique_ptr<RolloutCollector> collector_;
  Rng update_rng_;
  int iteration_ = 0;
};

}  // namespace crowdnav
