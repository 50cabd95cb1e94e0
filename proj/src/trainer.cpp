#include "crowdnav/trainer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "crowdnav/eval.hpp"
#include "crowdnav/text.hpp"

namespace crowdnav {

std::vector<EnvConfig> TrainerConfig::resolved_envs() const {
  return envs.empty() ? training_envs(env) : envs;
}

EvalSummary evaluate_policy(const nn::ConvNet<float>& policy, ActionMode mode, const EnvConfig& env,
                            int episodes, std::uint64_t seed_base, bool greedy) {
  PpoMethod method("policy", policy, mode, env.use_pedestrian_map, greedy);
  EvalSummary s;
  s.episodes = episodes;
  std::vector<MetricRecord> all;
  for (int e = 0; e < episodes; ++e) {
    EpisodeResult r = run_episode(method, env, seed_base + static_cast<std::uint64_t>(e));
    for (MetricRecord& m : r.records) all.push_back(std::move(m));
  }
  s.records = static_cast<int>(all.size());
  if (!all.empty()) {
    s.success_rate = success_rate(all);
    double total = 0.0;
    for (const MetricRecord& m : all) total += m.total_reward;
    s.mean_reward = total / static_cast<double>(all.size());
  }
  return s;
}

std::string format_record(const IterationRecord& r) {
  std::ostringstream os;
  os << "iteration=" << r.iteration << " episodes=" << r.episodes
     << " mean_reward=" << format_real(r.mean_reward) << " success=" << format_real(r.success_rate)
     << " policy_loss=" << format_real(r.stats.policy_loss)
     << " value_loss=" << format_real(r.stats.value_loss)
     << " entropy=" << format_real(r.stats.entropy)
     << " clip_fraction=" << format_real(r.stats.clip_fraction)
     << " approx_kl=" << format_real(r.stats.approx_kl)
     << " rolled_back=" << (r.stats.rolled_back ? 1 : 0);
  if (r.eval) {
    os << " eval_success=" << format_real(r.eval->success_rate)
       << " eval_reward=" << format_real(r.eval->mean_reward);
  }
  return os.str();
}

namespace {

std::uint64_t eval_seed_base(std::uint64_t seed) { return splitmix64(seed ^ 0xE7A1E7A1ULL); }

}  // namespace

Trainer::Trainer(TrainerConfig cfg)
    : cfg_(std::move(cfg)),
      policy_(policy_arch(cfg_.mode), splitmix64(cfg_.seed + 1)),
      value_(nn::NetArch::value(), splitmix64(cfg_.seed + 2)) {
  cfg_.ppo.validate();
  reseed(0);
}

void Trainer::reseed(std::uint64_t salt) {
  const std::uint64_t s = salt == 0 ? cfg_.seed : splitmix64(cfg_.seed + salt);
  collector_ = std::make_unique<RolloutCollector>(cfg_.resolved_envs(), cfg_.mode, s);
  update_rng_ = make_rng(s ^ 0x0BDA7EULL);
}

IterationRecord Trainer::iterate() {
  const RolloutBuffer buf =
      collector_->collect(policy_, value_, static_cast<std::size_t>(cfg_.ppo.buffer_size),
                          cfg_.ppo.gamma, cfg_.ppo.lambda);
  IterationRecord rec;
  const std::vector<EpisodeStat> eps = collector_->take_finished();
  rec.episodes = static_cast<int>(eps.size());
  if (eps.empty()) {
    rec.mean_reward = std::numeric_limits<double>::quiet_NaN();
    rec.success_rate = std::numeric_limits<double>::quiet_NaN();
  } else {
    double total = 0.0;
    int hits = 0;
    for (const EpisodeStat& e : eps) {
      total += e.total_reward;
      hits += e.outcome == Outcome::reached ? 1 : 0;
    }
    rec.mean_reward = total / static_cast<double>(eps.size());
    rec.success_rate = static_cast<double>(hits) / static_cast<double>(eps.size());
  }

  NetPolicyModel pm(policy_, buf, cfg_.mode);
  NetValueModel vm(value_, buf);
  rec.stats = ppo_update(pm, vm, buf.samples(), cfg_.ppo, policy_adam_, value_adam_, update_rng_);
  ++iteration_;
  rec.iteration = iteration_;
  if (cfg_.eval_every > 0 && iteration_ % cfg_.eval_every == 0) rec.eval = evaluate();
  return rec;
}

EvalSummary Trainer::evaluate() const {
  const EnvConfig env = cfg_.eval_env ? *cfg_.eval_env : cfg_.resolved_envs().front();
  return evaluate_policy(policy_, cfg_.mode, env, cfg_.eval_episodes, eval_seed_base(cfg_.seed));
}

Checkpoint Trainer::checkpoint(bool with_optimizer) const {
  Checkpoint c;
  c.policy_hash = policy_.arch().hash();
  c.value_hash = value_.arch().hash();
  c.iteration = static_cast<std::uint64_t>(iteration_);
  c.policy = policy_.params();
  c.value = value_.params();
  if (with_optimizer && !policy_adam_.m.empty() && !value_adam_.m.empty()) {
    c.policy_adam = policy_adam_;
    c.value_adam = value_adam_;
  }
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (c.policy_hash != policy_.arch().hash() || c.value_hash != value_.arch().hash() ||
      c.policy.size() != policy_.params().size() || c.value.size() != value_.params().size()) {
    throw CheckpointError("checkpoint does not match the configured architecture");
  }
  policy_.params() = c.policy;
  value_.params() = c.value;
  policy_adam_ = c.policy_adam.value_or(AdamState<float>{});
  value_adam_ = c.value_adam.value_or(AdamState<float>{});
  iteration_ = static_cast<int>(c.iteration);
  reseed(c.iteration);
}

}  // namespace crowdnav
