#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "crowdnav/adam.hpp"
#include "crowdnav/random.hpp"

namespace crowdnav {

struct PpoConfig {
  double lr_policy = 5e-5;
  double lr_value = 1e-3;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 256;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;  // per network; <= 0 disables
  int buffer_size = 2048;
  bool normalize_advantages = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// One time-ordered stream. `dones[t]` marks a terminal transition (no
/// bootstrapping across it); `bootstrap` is V of the state after the last
/// transition and is ignored when the stream ends with a done.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                      double lambda);

/// Shifts and scales to zero mean, unit (population) variance. Leaves a
/// constant vector centered at zero.
void normalize_advantages(std::span<double> adv);

/// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative w.r.t. r.
struct Surrogate {
  double value = 0.0;
  double d_ratio = 0.0;
  bool clipped = false;  // the clipped branch is the active minimum
};
Surrogate clipped_surrogate(double ratio, double advantage, double eps);

// ---------------------------------------------------------------------------
// Generic update. Models cache their last evaluate() for backward().

template <typename M>
concept PpoPolicyModel = requires(M m, std::span<const std::size_t> idx, std::vector<double>& out,
                                  std::span<const double> d,
                                  std::vector<typename M::Scalar>& grad) {
  { m.params() } -> std::same_as<std::vector<typename M::Scalar>&>;
  m.evaluate(idx, out, out);  // log-probs of the stored actions, entropies
  m.backward(d, d, grad);     // d loss / d log-prob, d loss / d entropy
};

template <typename M>
concept PpoValueModel = requires(M m, std::span<const std::size_t> idx, std::vector<double>& out,
                                 std::span<const double> d,
                                 std::vector<typename M::Scalar>& grad) {
  { m.params() } -> std::same_as<std::vector<typename M::Scalar>&>;
  m.evaluate(idx, out);
  m.backward(d, grad);
};

/// Per-transition data the update consumes.
struct PpoSamples {
  std::vector<double> old_log_prob;
  std::vector<double> advantages;  // normalized in ppo_update when configured
  std::vector<double> returns;
  std::size_t size() const { return old_log_prob.size(); }
};

struct PpoStats {
  double policy_loss = 0.0;  // surrogate part, averaged over minibatches
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;  // mean(old_logp - new_logp)
  int minibatches = 0;
  bool rolled_back = false;
};

namespace detail {

template <typename T>
double clip_grad_norm(std::vector<T>& g, double max_norm) {
  double sq = 0.0;
  for (const T v : g) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (T& v : g) v = static_cast<T>(static_cast<double>(v) * s);
  }
  return norm;
}

template <typename T>
AdamState<T> fresh_adam(std::size_t n, const PpoConfig& c) {
  AdamState<T> a(n);
  a.beta1 = c.adam_beta1;
  a.beta2 = c.adam_beta2;
  a.eps = c.adam_eps;
  return a;
}

}  // namespace detail

/// Clipped-surrogate PPO with separate Adam optimizers for policy and value.
/// A non-finite loss or gradient restores both models and optimizers to their
/// state on entry and sets `rolled_back`.
template <PpoPolicyModel P, PpoValueModel V>
PpoStats ppo_update(P& policy, V& value, PpoSamples samples, const PpoConfig& cfg,
                    AdamState<typename P::Scalar>& policy_adam,
                    AdamState<typename V::Scalar>& value_adam, Rng& rng) {
  using TP = typename P::Scalar;
  using TV = typename V::Scalar;
  cfg.validate();
  const std::size_t n = samples.size();
  if (samples.advantages.size() != n || samples.returns.size() != n) {
    throw std::invalid_argument("ppo_update: sample arrays differ in length");
  }
  if (n == 0) throw std::invalid_argument("ppo_update: no samples");
  if (cfg.normalize_advantages) normalize_advantages(samples.advantages);
  if (policy_adam.m.size() != policy.params().size()) {
    policy_adam = detail::fresh_adam<TP>(policy.params().size(), cfg);
  }
  if (value_adam.m.size() != value.params().size()) {
    value_adam = detail::fresh_adam<TV>(value.params().size(), cfg);
  }

  policy_adam.beta1 = value_adam.beta1 = cfg.adam_beta1;
  policy_adam.beta2 = value_adam.beta2 = cfg.adam_beta2;
  policy_adam.eps = value_adam.eps = cfg.adam_eps;

  const std::vector<TP> policy_backup = policy.params();
  const std::vector<TV> value_backup = value.params();
  const AdamState<TP> policy_adam_backup = policy_adam;
  const AdamState<TV> value_adam_backup = value_adam;

  PpoStats st;
  std::vector<std::size_t> order(n);
  std::vector<double> logp, ent, vals, d_logp, d_ent, d_val;
  std::vector<TP> g_pol(policy.params().size());
  std::vector<TV> g_val(value.params().size());
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  std::size_t clipped = 0;
  std::size_t seen = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t b = std::min(mb, n - start);
      const std::span<const std::size_t> idx(order.data() + start, b);
      const double inv_b = 1.0 / static_cast<double>(b);

      policy.evaluate(idx, logp, ent);
      d_logp.assign(b, 0.0);
      d_ent.assign(b, -cfg.entropy_coef * inv_b);
      double surr = 0.0;
      double entropy = 0.0;
      double kl = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t k = idx[j];
        const double ratio = std::exp(logp[j] - samples.old_log_prob[k]);
        const Surrogate s = clipped_surrogate(ratio, samples.advantages[k], cfg.clip);
        surr += s.value;
        entropy += ent[j];
        kl += samples.old_log_prob[k] - logp[j];
        if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
        // d(-s)/dlogp = -ds/dr * r
        d_logp[j] = -s.d_ratio * ratio * inv_b;
      }
      seen += b;

      value.evaluate(idx, vals);
      d_val.resize(b);
      double vloss = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const double e = vals[j] - samples.returns[idx[j]];
        vloss += e * e;
        d_val[j] = 2.0 * e * inv_b;
      }
      vloss *= inv_b;
      const double ploss = -surr * inv_b - cfg.entropy_coef * entropy * inv_b;

      std::fill(g_pol.begin(), g_pol.end(), TP(0));
      std::fill(g_val.begin(), g_val.end(), TV(0));
      bool finite = std::isfinite(ploss) && std::isfinite(vloss);
      if (finite) {
        policy.backward(d_logp, d_ent, g_pol);
        value.backward(d_val, g_val);
        const double gp = detail::clip_grad_norm(g_pol, cfg.max_grad_norm);
        const double gv = detail::clip_grad_norm(g_val, cfg.max_grad_norm);
        finite = std::isfinite(gp) && std::isfinite(gv);
      }
      if (!finite) {
        policy.params() = policy_backup;
        value.params() = value_backup;
        policy_adam = policy_adam_backup;
        value_adam = value_adam_backup;
        PpoStats bad;
        bad.rolled_back = true;
        return bad;
      }
      adam_step<TP>(policy_adam, policy.params(), g_pol, cfg.lr_policy);
      adam_step<TV>(value_adam, value.params(), g_val, cfg.lr_value);

      st.policy_loss += -surr * inv_b;
      st.value_loss += vloss;
      st.entropy += entropy * inv_b;
      st.approx_kl += kl * inv_b;
      ++st.minibatches;
    }
  }
  if (st.minibatches > 0) {
    const double m = st.minibatches;
    st.policy_loss /= m;
    st.value_loss /= m;
    st.entropy /= m;
    st.approx_kl /= m;
  }
  st.clip_fraction = seen > 0 ? static_cast<double>(clipped) / static_cast<double>(seen) : 0.0;
  return st;
}

}  // namespace crowdnav
