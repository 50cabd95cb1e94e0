#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowdnav/env.hpp"
#include "crowdnav/network.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/ppo.hpp"

namespace crowdnav {

/// Structure-of-arrays transition store. Transitions arrive interleaved
/// across streams (one stream = one robot's contiguous run inside one
/// episode); finish() computes GAE per stream and reorders so that every
/// environment's transitions are contiguous and time-ordered.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity = 2048);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return log_prob.size(); }
  bool full() const { return size() >= capacity_; }
  bool finished() const { return finished_; }

  struct Entry {
    std::span<const float> maps;  // kObservationFloats
    std::span<const float> goal;  // kGoalDim
    int action_index = -1;
    double raw_action[2] = {0.0, 0.0};
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
    int env = 0;
    std::uint64_t stream = 0;
  };
  void add(const Entry& e);

  /// Value of the state following the last transition of `stream`.
  void set_bootstrap(std::uint64_t stream, double value);

  /// Computes advantages/returns; requires a full buffer.
  void finish(double gamma, double lambda);

  /// Gathers observations of the given transitions into a network batch.
  nn::Batch<float> gather(std::span<const std::size_t> idx) const;

  PpoSamples samples() const;

  // Per-transition arrays (index-aligned).
  std::vector<float> maps;
  std::vector<float> goals;
  std::vector<int> action_index;
  std::vector<double> raw_v;
  std::vector<double> raw_w;
  std::vector<double> log_prob;
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<std::uint8_t> done;
  std::vector<int> env;
  std::vector<std::uint64_t> stream;
  std::vector<double> advantages;
  std::vector<double> returns;

 private:
  std::size_t capacity_;
  bool finished_ = false;
  std::vector<std::pair<std::uint64_t, double>> bootstrap_;
};

/// Adapts a policy network over a finished buffer to the PPO model concept.
class NetPolicyModel {
 public:
  using Scalar = float;
  NetPolicyModel(nn::ConvNet<float>& net, const RolloutBuffer& buffer, ActionMode mode);

  std::vector<float>& params() { return net_.params(); }
  void evaluate(std::span<const std::size_t> idx, std::vector<double>& log_prob,
                std::vector<double>& entropy);
  void backward(std::span<const double> d_log_prob, std::span<const double> d_entropy,
                std::vector<float>& grad);

 private:
  nn::ConvNet<float>& net_;
  const RolloutBuffer& buffer_;
  ActionMode mode_;
  std::vector<std::size_t> idx_;
  nn::ForwardResult<float> last_;
};

class NetValueModel {
 public:
  using Scalar = float;
  NetValueModel(nn::ConvNet<float>& net, const RolloutBuffer& buffer);

  std::vector<float>& params() { return net_.params(); }
  void evaluate(std::span<const std::size_t> idx, std::vector<double>& values);
  void backward(std::span<const double> d_value, std::vector<float>& grad);

 private:
  nn::ConvNet<float>& net_;
  const RolloutBuffer& buffer_;
  nn::ForwardResult<float> last_;
};

struct EpisodeStat {
  int env = 0;
  int robot = 0;
  double total_reward = 0.0;
  Outcome outcome = Outcome::running;
  int steps = 0;
};

/// Steps several environments against one shared policy. Each step goes to
/// an environment with the fewest transitions so far (lowest index on ties),
/// so per-environment counts stay within one step's worth of each other.
/// Episodes reset automatically with seeds derived from the collector seed.
class RolloutCollector {
 public:
  RolloutCollector(std::vector<EnvConfig> envs, ActionMode mode, std::uint64_t seed);

  /// Gathers exactly `count` transitions, bootstraps open streams with the
  /// value network, and computes advantages.
  RolloutBuffer collect(const nn::ConvNet<float>& policy, const nn::ConvNet<float>& value,
                        std::size_t count, double gamma, double lambda);

  /// Robot-episodes completed since the last call.
  std::vector<EpisodeStat> take_finished();

  std::size_t env_count() const { return slots_.size(); }

 private:
  struct Slot {
    CrowdEnv env;
    int index = 0;
    std::uint64_t episodes = 0;
    std::vector<ObservationBundle> obs;
    std::vector<std::uint64_t> stream;
    std::vector<double> returns;
  };
  void start_episode(Slot& slot);

  std::vector<Slot> slots_;
  ActionMode mode_;
  std::uint64_t seed_;
  Rng rng_;
  std::uint64_t next_stream_ = 0;
  std::vector<EpisodeStat> finished_;
};

/// Deterministic per-episode seed for environment `env`.
std::uint64_t episode_seed(std::uint64_t base, int env, std::uint64_t episode);

/// The four training environments: {random, circular} x {orca, sfm}.
std::vector<EnvConfig> training_envs(const EnvConfig& base);

}  // namespace crowdnav
