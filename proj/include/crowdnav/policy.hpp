#pragma once

// Action distributions on top of the network heads: categorical over the 28
// discrete (v, w) pairs, or a diagonal Gaussian over (v, w) clipped into the
// velocity box after sampling.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/network.hpp"
#include "crowdnav/perception.hpp"
#include "crowdnav/random.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

enum class ActionMode { discrete, continuous };

std::string to_string(ActionMode mode);
ActionMode parse_action_mode(const std::string& s);

// Categorical ---------------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits);
double categorical_log_prob(std::span<const double> logits, int k);
double categorical_entropy(std::span<const double> logits);
/// d log p_k / d logits = onehot(k) - p.
void categorical_log_prob_grad(std::span<const double> logits, int k, std::span<double> out);
/// dH / d logit_j = -p_j (log p_j + H).
void categorical_entropy_grad(std::span<const double> logits, std::span<double> out);

// Diagonal Gaussian ---------------------------------------------------------

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> x);
double gaussian_entropy(std::span<const double> log_std);
/// Gradients of log N(x; mean, exp(log_std)) w.r.t. mean and log_std.
void gaussian_log_prob_grad(std::span<const double> mean, std::span<const double> log_std,
                            std::span<const double> x, std::span<double> d_mean,
                            std::span<double> d_log_std);

// Sampling ------------------------------------------------------------------

struct SampledAction {
  Action action;            // what the environment receives (clipped)
  int index = -1;           // discrete index, -1 in continuous mode
  double raw[2] = {0, 0};   // continuous pre-clip sample
  double log_prob = 0.0;    // of the stored index / pre-clip sample
};

/// Categorical draw by inverse CDF; `greedy` takes the arg-max (first on ties).
SampledAction sample_discrete(std::span<const double> logits, Rng& rng, bool greedy = false);

/// Gaussian draw, then clipped into [0, 0.6] x [-0.9, 0.9]. The log-prob is
/// that of the unclipped sample. `greedy` returns the (clipped) mean.
SampledAction sample_continuous(std::span<const double> mean, std::span<const double> log_std,
                                Rng& rng, bool greedy = false);

// Observation batching -------------------------------------------------------

inline constexpr std::size_t kObservationFloats = kObservationChannels * kMapCells;

/// Appends one encoded observation to the batch.
void append_observation(nn::Batch<float>& batch, const ObservationBundle& obs);

/// Architecture for a policy in the given mode.
nn::NetArch policy_arch(ActionMode mode);

}  // namespace crowdnav
