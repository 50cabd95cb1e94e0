#include "crowdnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "crowdnav/env.hpp"

namespace crowdnav {

std::string to_string(ActionMode mode) {
  return mode == ActionMode::discrete ? "discrete" : "continuous";
}

ActionMode parse_action_mode(const std::string& s) {
  if (s == "discrete") return ActionMode::discrete;
  if (s == "continuous") return ActionMode::continuous;
  throw std::invalid_argument("unknown action mode '" + s + "'");
}

namespace {

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (const double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

void require_nonempty(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("empty logits");
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  require_nonempty(logits);
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

double categorical_log_prob(std::span<const double> logits, int k) {
  require_nonempty(logits);
  if (k < 0 || static_cast<std::size_t>(k) >= logits.size()) {
    throw std::out_of_range("categorical index out of range");
  }
  return logits[static_cast<std::size_t>(k)] - log_sum_exp(logits);
}

double categorical_entropy(std::span<const double> logits) {
  require_nonempty(logits);
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (const double z : logits) {
    const double lp = z - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

void categorical_log_prob_grad(std::span<const double> logits, int k, std::span<double> out) {
  const std::vector<double> p = softmax(logits);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = -p[i];
  out[static_cast<std::size_t>(k)] += 1.0;
}

void categorical_entropy_grad(std::span<const double> logits, std::span<double> out) {
  require_nonempty(logits);
  const double lse = log_sum_exp(logits);
  const double h = categorical_entropy(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double lp = logits[i] - lse;
    out[i] = -std::exp(lp) * (lp + h);
  }
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> x) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

double gaussian_entropy(std::span<const double> log_std) {
  double h = 0.0;
  for (const double ls : log_std) h += ls + 0.5 + kHalfLog2Pi;
  return h;
}

void gaussian_log_prob_grad(std::span<const double> mean, std::span<const double> log_std,
                            std::span<const double> x, std::span<double> d_mean,
                            std::span<double> d_log_std) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double inv_sigma = std::exp(-log_std[i]);
    const double z = (x[i] - mean[i]) * inv_sigma;
    d_mean[i] = z * inv_sigma;
    d_log_std[i] = z * z - 1.0;
  }
}

SampledAction sample_discrete(std::span<const double> logits, Rng& rng, bool greedy) {
  const std::vector<double> p = softmax(logits);
  int k = 0;
  if (greedy) {
    k = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  } else {
    const double u = uniform01(rng);
    double cdf = 0.0;
    k = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cdf += p[i];
      if (u < cdf) {
        k = static_cast<int>(i);
        break;
      }
    }
    // Never land on a zero-probability tail entry through rounding.
    while (k > 0 && p[static_cast<std::size_t>(k)] == 0.0) --k;
  }
  SampledAction s;
  s.index = k;
  s.action = discrete_action(k);
  s.log_prob = categorical_log_prob(logits, k);
  return s;
}

SampledAction sample_continuous(std::span<const double> mean, std::span<const double> log_std,
                                Rng& rng, bool greedy) {
  if (mean.size() != 2 || log_std.size() != 2) {
    throw std::invalid_argument("continuous actions are two-dimensional");
  }
  SampledAction s;
  for (std::size_t i = 0; i < 2; ++i) {
    s.raw[i] = greedy ? mean[i] : mean[i] + std::exp(log_std[i]) * standard_normal(rng);
  }
  s.log_prob = gaussian_log_prob(mean, log_std, std::span<const double>(s.raw, 2));
  s.action = clamp_action({s.raw[0], s.raw[1]});
  return s;
}

void append_observation(nn::Batch<float>& batch, const ObservationBundle& obs) {
  const std::size_t m = batch.maps.size();
  const std::size_t g = batch.goals.size();
  batch.maps.resize(m + kObservationFloats);
  batch.goals.resize(g + kGoalDim);
  encode_observation(obs, std::span<float>(batch.maps.data() + m, kObservationFloats),
                     std::span<float>(batch.goals.data() + g, kGoalDim));
  ++batch.n;
}

nn::NetArch policy_arch(ActionMode mode) {
  return mode == ActionMode::discrete ? nn::NetArch::policy_discrete()
                                      : nn::NetArch::policy_continuous();
}

}  // namespace crowdnav
