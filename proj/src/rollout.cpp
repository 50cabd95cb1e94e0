#include "crowdnav/rollout.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace crowdnav {

RolloutBuffer::RolloutBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("rollout buffer capacity must be positive");
  maps.reserve(capacity_ * kObservationFloats);
  goals.reserve(capacity_ * kGoalDim);
}

void RolloutBuffer::add(const Entry& e) {
  if (full()) throw std::logic_error("rollout buffer is full");
  if (finished_) throw std::logic_error("rollout buffer already finished");
  if (e.maps.size() != kObservationFloats || e.goal.size() != kGoalDim) {
    throw std::invalid_argument("rollout buffer: observation shape mismatch");
  }
  maps.insert(maps.end(), e.maps.begin(), e.maps.end());
  goals.insert(goals.end(), e.goal.begin(), e.goal.end());
  action_index.push_back(e.action_index);
  raw_v.push_back(e.raw_action[0]);
  raw_w.push_back(e.raw_action[1]);
  log_prob.push_back(e.log_prob);
  reward.push_back(e.reward);
  value.push_back(e.value);
  done.push_back(e.done ? 1 : 0);
  env.push_back(e.env);
  stream.push_back(e.stream);
}

void RolloutBuffer::set_bootstrap(std::uint64_t s, double v) { bootstrap_.emplace_back(s, v); }

void RolloutBuffer::finish(double gamma, double lambda) {
  if (!full()) throw std::logic_error("advantages are computed on a full buffer only");
  const std::size_t n = size();

  // Streams in order of first appearance; members keep insertion (time) order.
  std::map<std::uint64_t, std::vector<std::size_t>> members;
  std::vector<std::uint64_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = members.try_emplace(stream[i]);
    if (fresh) order.push_back(stream[i]);
    it->second.push_back(i);
  }
  std::map<std::uint64_t, double> boot(bootstrap_.begin(), bootstrap_.end());

  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  std::vector<double> r, v;
  std::vector<std::uint8_t> d;
  for (const std::uint64_t s : order) {
    const std::vector<std::size_t>& m = members[s];
    r.clear();
    v.clear();
    d.clear();
    for (const std::size_t i : m) {
      r.push_back(reward[i]);
      v.push_back(value[i]);
      d.push_back(done[i]);
    }
    double b = 0.0;
    if (d.back() == 0) {
      const auto it = boot.find(s);
      if (it == boot.end()) throw std::logic_error("open stream without a bootstrap value");
      b = it->second;
    }
    const GaeResult g = compute_gae(r, v, d, b, gamma, lambda);
    for (std::size_t k = 0; k < m.size(); ++k) {
      advantages[m[k]] = g.advantages[k];
      returns[m[k]] = g.returns[k];
    }
  }

  // Environment-major layout: env, then stream (first appearance), then time.
  std::map<std::uint64_t, std::size_t> rank;
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    if (env[a] != env[b]) return env[a] < env[b];
    return rank[stream[a]] < rank[stream[b]];
  });
  auto apply = [&](auto& vec, std::size_t width) {
    auto copy = vec;
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(copy.begin() + static_cast<std::ptrdiff_t>(perm[k] * width), width,
                  vec.begin() + static_cast<std::ptrdiff_t>(k * width));
    }
  };
  apply(maps, kObservationFloats);
  apply(goals, kGoalDim);
  apply(action_index, 1);
  apply(raw_v, 1);
  apply(raw_w, 1);
  apply(log_prob, 1);
  apply(reward, 1);
  apply(value, 1);
  apply(done, 1);
  apply(env, 1);
  apply(stream, 1);
  apply(advantages, 1);
  apply(returns, 1);
  finished_ = true;
}

nn::Batch<float> RolloutBuffer::gather(std::span<const std::size_t> idx) const {
  nn::Batch<float> b;
  b.n = idx.size();
  b.maps.resize(idx.size() * kObservationFloats);
  b.goals.resize(idx.size() * kGoalDim);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(maps.begin() + static_cast<std::ptrdiff_t>(idx[k] * kObservationFloats),
                kObservationFloats, b.maps.begin() + static_cast<std::ptrdiff_t>(k * kObservationFloats));
    std::copy_n(goals.begin() + static_cast<std::ptrdiff_t>(idx[k] * kGoalDim), kGoalDim,
                b.goals.begin() + static_cast<std::ptrdiff_t>(k * kGoalDim));
  }
  return b;
}

PpoSamples RolloutBuffer::samples() const {
  if (!finished_) throw std::logic_error("rollout buffer not finished");
  return {log_prob, advantages, returns};
}

// ---------------------------------------------------------------------------

NetPolicyModel::NetPolicyModel(nn::ConvNet<float>& net, const RolloutBuffer& buffer, ActionMode mode)
    : net_(net), buffer_(buffer), mode_(mode) {}

void NetPolicyModel::evaluate(std::span<const std::size_t> idx, std::vector<double>& log_prob,
                              std::vector<double>& entropy) {
  idx_.assign(idx.begin(), idx.end());
  last_ = net_.forward(buffer_.gather(idx), true);
  log_prob.resize(idx.size());
  entropy.resize(idx.size());
  const auto cols = static_cast<std::size_t>(last_.out.cols());
  std::vector<double> z(cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t j = 0; j < cols; ++j) z[j] = last_.out(row, static_cast<Eigen::Index>(j));
    if (mode_ == ActionMode::discrete) {
      log_prob[k] = categorical_log_prob(z, buffer_.action_index[idx[k]]);
      entropy[k] = categorical_entropy(z);
    } else {
      const double ls[2] = {last_.log_std(row, 0), last_.log_std(row, 1)};
      const double x[2] = {buffer_.raw_v[idx[k]], buffer_.raw_w[idx[k]]};
      log_prob[k] = gaussian_log_prob(z, ls, x);
      entropy[k] = gaussian_entropy(ls);
    }
  }
}

void NetPolicyModel::backward(std::span<const double> d_log_prob, std::span<const double> d_entropy,
                              std::vector<float>& grad) {
  const auto n = static_cast<Eigen::Index>(idx_.size());
  const Eigen::Index cols = last_.out.cols();
  nn::Mat<float> d_out = nn::Mat<float>::Zero(n, cols);
  nn::Mat<float> d_ls;
  std::vector<double> z(static_cast<std::size_t>(cols));
  std::vector<double> g1(z.size()), g2(z.size());
  if (mode_ == ActionMode::continuous) d_ls = nn::Mat<float>::Zero(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    for (Eigen::Index j = 0; j < cols; ++j) z[static_cast<std::size_t>(j)] = last_.out(k, j);
    if (mode_ == ActionMode::discrete) {
      categorical_log_prob_grad(z, buffer_.action_index[idx_[ku]], g1);
      categorical_entropy_grad(z, g2);
      for (Eigen::Index j = 0; j < cols; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        d_out(k, j) = static_cast<float>(d_log_prob[ku] * g1[ju] + d_entropy[ku] * g2[ju]);
      }
    } else {
      const double ls[2] = {last_.log_std(k, 0), last_.log_std(k, 1)};
      const double x[2] = {buffer_.raw_v[idx_[ku]], buffer_.raw_w[idx_[ku]]};
      double dm[2];
      double dl[2];
      gaussian_log_prob_grad(z, ls, x, dm, dl);
      for (Eigen::Index j = 0; j < 2; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        d_out(k, j) = static_cast<float>(d_log_prob[ku] * dm[ju]);
        // Entropy of a diagonal Gaussian has unit slope in each log-std.
        d_ls(k, j) = static_cast<float>(d_log_prob[ku] * dl[ju] + d_entropy[ku]);
      }
    }
  }
  net_.backward(last_.cache, d_out, d_ls, grad);
}

NetValueModel::NetValueModel(nn::ConvNet<float>& net, const RolloutBuffer& buffer)
    : net_(net), buffer_(buffer) {}

void NetValueModel::evaluate(std::span<const std::size_t> idx, std::vector<double>& values) {
  last_ = net_.forward(buffer_.gather(idx), true);
  values.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) values[k] = last_.out(static_cast<Eigen::Index>(k), 0);
}

void NetValueModel::backward(std::span<const double> d_value, std::vector<float>& grad) {
  nn::Mat<float> d(static_cast<Eigen::Index>(d_value.size()), 1);
  for (std::size_t k = 0; k < d_value.size(); ++k) d(static_cast<Eigen::Index>(k), 0) = static_cast<float>(d_value[k]);
  net_.backward(last_.cache, d, nn::Mat<float>(), grad);
}

// ---------------------------------------------------------------------------

std::uint64_t episode_seed(std::uint64_t base, int env, std::uint64_t episode) {
  return splitmix64(splitmix64(base ^ (0xA5A5ULL + static_cast<std::uint64_t>(env))) + episode);
}

std::vector<EnvConfig> training_envs(const EnvConfig& base) {
  std::vector<EnvConfig> out;
  for (const ScenarioKind kind : {ScenarioKind::random, ScenarioKind::circular}) {
    for (const PedStrategy s : {PedStrategy::orca, PedStrategy::sfm}) {
      EnvConfig c = base;
      c.scenario = kind;
      c.strategy = s;
      out.push_back(c);
    }
  }
  return out;
}

RolloutCollector::RolloutCollector(std::vector<EnvConfig> envs, ActionMode mode, std::uint64_t seed)
    : mode_(mode), seed_(seed), rng_(make_rng(splitmix64(seed) ^ 0x0C011EC7ULL)) {
  if (envs.empty()) throw std::invalid_argument("collector needs at least one environment");
  slots_.reserve(envs.size());
  for (std::size_t i = 0; i < envs.size(); ++i) {
    EnvConfig c = envs[i];
    c.build_observations = true;
    c.seed = episode_seed(seed_, static_cast<int>(i), 0);
    slots_.push_back(Slot{CrowdEnv(c), static_cast<int>(i), 0, {}, {}, {}});
    start_episode(slots_.back());
  }
}

void RolloutCollector::start_episode(Slot& slot) {
  slot.env.reset(episode_seed(seed_, slot.index, slot.episodes++));
  const std::size_t n = slot.env.robot_count();
  slot.obs.clear();
  for (std::size_t i = 0; i < n; ++i) slot.obs.push_back(slot.env.observe(i));
  slot.stream.resize(n);
  for (auto& s : slot.stream) s = next_stream_++;
  slot.returns.assign(n, 0.0);
}

RolloutBuffer RolloutCollector::collect(const nn::ConvNet<float>& policy,
                                        const nn::ConvNet<float>& value, std::size_t count,
                                        double gamma, double lambda) {
  RolloutBuffer buf(count);
  for (Slot& s : slots_) {
    for (auto& id : s.stream) id = next_stream_++;
  }
  std::vector<std::size_t> counts(slots_.size(), 0);
  std::map<std::uint64_t, ObservationBundle> pending;
  std::vector<float> maps(kObservationFloats);
  std::vector<float> goal(kGoalDim);

  while (!buf.full()) {
    const auto e = static_cast<std::size_t>(std::min_element(counts.begin(), counts.end()) - counts.begin());
    Slot& slot = slots_[e];
    const std::size_t n = slot.env.robot_count();
    std::vector<std::size_t> active;
    nn::Batch<float> batch;
    for (std::size_t i = 0; i < n; ++i) {
      if (slot.env.done(i)) continue;
      active.push_back(i);
      append_observation(batch, slot.obs[i]);
    }
    const nn::ForwardResult<float> pol = policy.forward(batch, false);
    const nn::ForwardResult<float> val = value.forward(batch, false);

    std::vector<Action> actions(n);
    std::vector<SampledAction> sampled(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      if (mode_ == ActionMode::discrete) {
        std::vector<double> z(static_cast<std::size_t>(pol.out.cols()));
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = pol.out(row, static_cast<Eigen::Index>(j));
        sampled[k] = sample_discrete(z, rng_);
      } else {
        const double mean[2] = {pol.out(row, 0), pol.out(row, 1)};
        const double ls[2] = {pol.log_std(row, 0), pol.log_std(row, 1)};
        sampled[k] = sample_continuous(mean, ls, rng_);
      }
      actions[active[k]] = sampled[k].action;
    }

    const std::vector<RobotStep> steps = slot.env.step(actions);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t r = active[k];
      const RobotStep& st = steps[r];
      slot.returns[r] += st.reward.total();
      if (st.done) {
        finished_.push_back({slot.index, static_cast<int>(r), slot.returns[r], st.outcome,
                             slot.env.step_count()});
      }
      if (buf.full()) {
        // Out of room: the stream ends at its previous transition, whose
        // bootstrap (the pre-step observation) is already pending.
        slot.stream[r] = next_stream_++;
      } else {
        const std::span<float> m(maps);
        const std::span<float> g(goal);
        encode_observation(slot.obs[r], m, g);
        RolloutBuffer::Entry entry;
        entry.maps = m;
        entry.goal = g;
        entry.action_index = sampled[k].index;
        entry.raw_action[0] = sampled[k].raw[0];
        entry.raw_action[1] = sampled[k].raw[1];
        entry.log_prob = sampled[k].log_prob;
        entry.reward = st.reward.total();
        entry.value = val.out(static_cast<Eigen::Index>(k), 0);
        entry.done = st.done;
        entry.env = slot.index;
        entry.stream = slot.stream[r];
        buf.add(entry);
        ++counts[e];
        if (st.done) {
          pending.erase(slot.stream[r]);
        } else {
          pending[slot.stream[r]] = st.observation;
        }
      }
      slot.obs[r] = st.observation;
    }
    if (slot.env.all_done()) start_episode(slot);
  }

  if (!pending.empty()) {
    nn::Batch<float> batch;
    std::vector<std::uint64_t> ids;
    for (const auto& [id, obs] : pending) {
      ids.push_back(id);
      append_observation(batch, obs);
    }
    const nn::ForwardResult<float> v = value.forward(batch, false);
    for (std::size_t k = 0; k < ids.size(); ++k) buf.set_bootstrap(ids[k], v.out(static_cast<Eigen::Index>(k), 0));
  }
  buf.finish(gamma, lambda);
  return buf;
}

std::vector<EpisodeStat> RolloutCollector::take_finished() {
  std::vector<EpisodeStat> out;
  out.swap(finished_);
  return out;
}

}  // namespace crowdnav
