#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace crowdnav {

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

/// Bias-corrected Adam update, in place. Moments are accumulated in double
/// and stored back in T.
template <typename T>
void adam_step(AdamState<T>& s, std::span<T> params, std::span<const T> grads, double lr) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    const double m = s.beta1 * static_cast<double>(s.m[i]) + (1.0 - s.beta1) * g;
    const double v = s.beta2 * static_cast<double>(s.v[i]) + (1.0 - s.beta2) * g * g;
    s.m[i] = static_cast<T>(m);
    s.v[i] = static_cast<T>(v);
    params[i] = static_cast<T>(static_cast<double>(params[i]) -
                               lr * (m / c1) / (std::sqrt(v / c2) + s.eps));
  }
}

}  // namespace crowdnav
