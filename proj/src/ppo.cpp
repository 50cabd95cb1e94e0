#include "crowdnav/ppo.hpp"

namespace crowdnav {

void PpoConfig::validate() const {
  auto open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!open_unit(gamma)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!open_unit(lambda) && lambda != 1.0 && lambda != 0.0) {
    throw std::invalid_argument("lambda must lie in [0, 1]");
  }
  if (!(clip > 0.0)) throw std::invalid_argument("clip epsilon must be positive");
  if (epochs < 1 || minibatch < 1 || buffer_size < 1) {
    throw std::invalid_argument("epochs, minibatch and buffer size must be positive");
  }
  if (!(lr_policy > 0.0) || !(lr_value > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (entropy_coef < 0.0) throw std::invalid_argument("entropy coefficient must be non-negative");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("compute_gae: rewards, values and dones differ in length");
  }
  GaeResult r;
  r.advantages.resize(n);
  r.returns.resize(n);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] != 0 ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    r.advantages[k] = next_adv;
    r.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return r;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (const double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (const double a : adv) var += (a - mean) * (a - mean);
  var /= n;
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& a : adv) a = var > 0.0 ? (a - mean) * inv : 0.0;
}

Surrogate clipped_surrogate(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return {unclipped, advantage, false};
  // The clipped branch is strictly smaller only outside the trust region,
  // where clamp() is flat.
  return {clipped, 0.0, true};
}

}  // namespace crowdnav
