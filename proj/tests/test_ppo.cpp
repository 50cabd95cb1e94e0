#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "crowdnav/adam.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/rollout.hpp"
#include "oracles.hpp"

using namespace crowdnav;

namespace {

// Two-action categorical policy with logits (theta0 * f_i, theta1 * g_i);
// each transition i stores the chosen action k_i.
struct ToyPolicy {
  using Scalar = double;
  std::vector<double> theta{0.3, -0.2};
  std::vector<double> f{1.0, 0.5, -1.0, 2.0};
  std::vector<double> g{0.2, -1.0, 1.5, 0.7};
  std::vector<int> k{0, 1, 1, 0};
  std::vector<std::size_t> last;
  std::vector<std::vector<double>> seen_d_logp;
  std::vector<std::vector<double>> seen_d_ent;
  std::vector<std::vector<double>> seen_logp;

  std::vector<double>& params() { return theta; }

  std::array<double, 2> logits(std::size_t i) const { return {theta[0] * f[i], theta[1] * g[i]}; }

  void evaluate(std::span<const std::size_t> idx, std::vector<double>& logp, std::vector<double>& ent) {
    last.assign(idx.begin(), idx.end());
    logp.resize(idx.size());
    ent.resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto l = logits(idx[j]);
      logp[j] = categorical_log_prob(l, k[idx[j]]);
      ent[j] = categorical_entropy(l);
    }
    seen_logp.push_back(logp);
  }

  void backward(std::span<const double> d_logp, std::span<const double> d_ent, std::vector<double>& grad) {
    seen_d_logp.emplace_back(d_logp.begin(), d_logp.end());
    seen_d_ent.emplace_back(d_ent.begin(), d_ent.end());
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t j = 0; j < last.size(); ++j) {
      const std::size_t i = last[j];
      const auto l = logits(i);
      double gl[2];
      double ge[2];
      categorical_log_prob_grad(l, k[i], gl);
      categorical_entropy_grad(l, ge);
      grad[0] += (d_logp[j] * gl[0] + d_ent[j] * ge[0]) * f[i];
      grad[1] += (d_logp[j] * gl[1] + d_ent[j] * ge[1]) * g[i];
    }
  }
};

// Linear value v_i = w0 * h_i + w1.
struct ToyValue {
  using Scalar = double;
  std::vector<double> w{0.1, 0.0};
  std::vector<double> h{1.0, -2.0, 0.5, 3.0};
  std::vector<std::size_t> last;

  std::vector<double>& params() { return w; }
  void evaluate(std::span<const std::size_t> idx, std::vector<double>& v) {
    last.assign(idx.begin(), idx.end());
    v.resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) v[j] = w[0] * h[idx[j]] + w[1];
  }
  void backward(std::span<const double> d, std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t j = 0; j < last.size(); ++j) {
      grad[0] += d[j] * h[last[j]];
      grad[1] += d[j];
    }
  }
};

PpoSamples toy_samples(ToyPolicy& p) {
  PpoSamples s;
  for (std::size_t i = 0; i < 4; ++i) s.old_log_prob.push_back(categorical_log_prob(p.logits(i), p.k[i]));
  s.advantages = {1.0, -0.5, 2.0, 0.25};
  s.returns = {1.0, 0.0, -1.0, 2.0};
  return s;
}

}  // namespace

TEST_CASE("gae single step") {
  const std::vector<double> r{1.0}, v{0.0};
  const std::vector<std::uint8_t> d{1};
  const GaeResult g = compute_gae(r, v, d, 123.0, 0.99, 0.95);
  CHECK(g.advantages[0] == 1.0);
  CHECK(g.returns[0] == 1.0);
}

TEST_CASE("gae two step example") {
  const std::vector<double> r{1.0, 1.0}, v{0.5, 0.5};
  const std::vector<std::uint8_t> d{0, 0};
  const GaeResult g = compute_gae(r, v, d, 0.5, 0.99, 0.95);
  CHECK(std::abs(g.advantages[0] - (0.995 + 0.9405 * 0.995)) < 1e-9);
  CHECK(std::abs(g.advantages[1] - 0.995) < 1e-9);
  CHECK(std::abs(g.advantages[0] - 1.9307975) < 1e-9);
  CHECK(g.returns[1] == doctest::Approx(g.advantages[1] + 0.5));
}

TEST_CASE("gae with lambda one equals discounted returns minus values") {
  Rng rng = make_rng(12);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 64);
    std::vector<double> r(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = uniform(rng, -10, 10);
      v[i] = uniform(rng, -10, 10);
    }
    const bool terminal = uniform01(rng) < 0.5;
    std::vector<std::uint8_t> d(n, 0);
    d.back() = terminal ? 1 : 0;
    const double boot = uniform(rng, -10, 10);
    const GaeResult g = compute_gae(r, v, d, boot, 0.97, 1.0);
    const auto mc = oracle::discounted_returns(r, terminal ? 0.0 : boot, 0.97);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g.advantages[i] - (mc[i] - v[i])) < 1e-9);
  }
}

TEST_CASE("gae stops at episode boundaries inside a stream") {
  const std::vector<double> r{1.0, 2.0, 3.0}, v{0.0, 0.0, 0.0};
  const std::vector<std::uint8_t> d{0, 1, 0};
  const GaeResult g = compute_gae(r, v, d, 10.0, 0.5, 1.0);
  CHECK(g.advantages[1] == 2.0);
  CHECK(g.advantages[0] == 1.0 + 0.5 * 2.0);
  CHECK(g.advantages[2] == 3.0 + 0.5 * 10.0);
  CHECK_THROWS_AS(compute_gae(r, std::vector<double>{0.0}, d, 0.0, 0.9, 0.9), std::invalid_argument);
}

TEST_CASE("advantage normalization") {
  Rng rng = make_rng(3);
  std::vector<double> a(1000);
  for (double& x : a) x = uniform(rng, -50, 400);
  normalize_advantages(a);
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= a.size();
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  var /= a.size();
  CHECK(std::abs(mean) <= 1e-6);
  CHECK(std::abs(var - 1.0) <= 1e-6);

  std::vector<double> flat(5, 3.0);
  normalize_advantages(flat);
  for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("adam closed forms") {
  AdamState<double> s(3);
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0);
  adam_step<double>(s, p, zero, 1e-3);
  CHECK(p == std::vector<double>{1.0, -2.0, 0.5});

  AdamState<double> t(3);
  std::vector<double> q{1.0, -2.0, 0.5};
  const std::vector<double> g(3, 0.5);
  adam_step<double>(t, q, g, 1e-3);
  // First step: m_hat = g, v_hat = g^2.
  const double delta = 1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(q[0] == doctest::Approx(1.0 - delta).epsilon(1e-14));
  CHECK(q[1] - (-2.0) == doctest::Approx(q[0] - 1.0).epsilon(1e-9));
  CHECK(q[2] - 0.5 == doctest::Approx(q[0] - 1.0).epsilon(1e-9));

  // Second step with the same gradient, by hand.
  adam_step<double>(t, q, g, 1e-3);
  const double m = 0.9 * 0.05 + 0.1 * 0.5;
  const double v = 0.999 * 0.00025 + 0.001 * 0.25;
  const double step2 = 1e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.998001)) + 1e-8);
  CHECK(q[0] == doctest::Approx(1.0 - delta - step2).epsilon(1e-14));

  std::vector<double> bad(2);
  CHECK_THROWS_AS(adam_step<double>(t, bad, zero, 1e-3), std::invalid_argument);
}

TEST_CASE("clipped surrogate branches") {
  const Surrogate a = clipped_surrogate(1.0, 2.0, 0.2);
  CHECK(a.value == 2.0);
  CHECK(a.d_ratio == 2.0);
  CHECK_FALSE(a.clipped);
  const Surrogate b = clipped_surrogate(1.5, 1.0, 0.2);
  CHECK(b.value == doctest::Approx(1.2));
  CHECK(b.d_ratio == 0.0);
  CHECK(b.clipped);
  const Surrogate c = clipped_surrogate(0.5, -1.0, 0.2);
  CHECK(c.value == doctest::Approx(-0.8));
  CHECK(c.d_ratio == 0.0);
  const Surrogate d = clipped_surrogate(0.5, 1.0, 0.2);
  CHECK(d.value == 0.5);
  CHECK(d.d_ratio == 1.0);
}

TEST_CASE("one ppo step on a toy head matches the hand-derived adam step") {
  ToyPolicy pol;
  ToyValue val;
  PpoSamples s = toy_samples(pol);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 4;
  cfg.buffer_size = 4;
  cfg.max_grad_norm = 0.0;
  cfg.lr_policy = 1e-3;
  cfg.lr_value = 1e-2;
  AdamState<double> pa, va;
  Rng rng = make_rng(0);

  // Expected gradients with ratio 1 everywhere.
  std::vector<double> adv = s.advantages;
  normalize_advantages(adv);
  double gp[2] = {0.0, 0.0};
  double gv[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto l = pol.logits(i);
    double gl[2], ge[2];
    categorical_log_prob_grad(l, pol.k[i], gl);
    categorical_entropy_grad(l, ge);
    gp[0] += (-adv[i] * gl[0] - cfg.entropy_coef * ge[0]) * pol.f[i] / 4.0;
    gp[1] += (-adv[i] * gl[1] - cfg.entropy_coef * ge[1]) * pol.g[i] / 4.0;
    const double e = val.w[0] * val.h[i] + val.w[1] - s.returns[i];
    gv[0] += 2.0 * e * val.h[i] / 4.0;
    gv[1] += 2.0 * e / 4.0;
  }
  const std::vector<double> theta0 = pol.theta;
  const std::vector<double> w0 = val.w;
  const PpoStats st = ppo_update(pol, val, s, cfg, pa, va, rng);
  CHECK_FALSE(st.rolled_back);
  CHECK(st.minibatches == 1);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(pol.theta[j] - (theta0[j] - 1e-3 * gp[j] / (std::abs(gp[j]) + 1e-8))) < 1e-6);
    CHECK(std::abs(val.w[j] - (w0[j] - 1e-2 * gv[j] / (std::abs(gv[j]) + 1e-8))) < 1e-6);
  }
}

TEST_CASE("first minibatch sees unit ratios") {
  ToyPolicy pol;
  ToyValue val;
  const PpoSamples s = toy_samples(pol);
  PpoConfig cfg;
  cfg.epochs = 3;
  cfg.minibatch = 2;
  cfg.buffer_size = 4;
  AdamState<double> pa, va;
  Rng rng = make_rng(1);
  const PpoStats st = ppo_update(pol, val, s, cfg, pa, va, rng);
  CHECK(st.minibatches == 6);
  REQUIRE(!pol.seen_logp.empty());
  // Recompute which transitions the first minibatch held: log-probs equal the
  // stored old log-probs exactly.
  const auto& first = pol.seen_logp.front();
  for (double lp : first) {
    const bool match = std::any_of(s.old_log_prob.begin(), s.old_log_prob.end(),
                                   [&](double o) { return o == lp; });
    CHECK(match);
  }
  // d loss / d logp = -A * ratio / B with ratio exactly one.
  std::vector<double> adv = s.advantages;
  normalize_advantages(adv);
  for (double d : pol.seen_d_logp.front()) {
    const bool match = std::any_of(adv.begin(), adv.end(),
                                   [&](double a) { return std::abs(-a / 2.0 - d) < 1e-15; });
    CHECK(match);
  }
}

TEST_CASE("non-finite losses roll the update back") {
  ToyPolicy pol;
  ToyValue val;
  PpoSamples s = toy_samples(pol);
  s.returns[2] = std::numeric_limits<double>::infinity();
  PpoConfig cfg;
  cfg.minibatch = 4;
  cfg.buffer_size = 4;
  AdamState<double> pa, va;
  Rng rng = make_rng(2);
  const auto theta = pol.theta;
  const auto w = val.w;
  const PpoStats st = ppo_update(pol, val, s, cfg, pa, va, rng);
  CHECK(st.rolled_back);
  CHECK(pol.theta == theta);
  CHECK(val.w == w);
}

TEST_CASE("config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.clip = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("collector gathers a full deterministic buffer from all four envs") {
  EnvConfig base;
  const auto envs = training_envs(base);
  REQUIRE(envs.size() == 4);
  const nn::ConvNet<float> policy(policy_arch(ActionMode::discrete), 1);
  const nn::ConvNet<float> value(nn::NetArch::value(), 2);

  RolloutCollector a(envs, ActionMode::discrete, 77);
  const RolloutBuffer buf = a.collect(policy, value, 2048, 0.99, 0.95);
  CHECK(buf.size() == 2048);
  CHECK(buf.finished());
  std::map<int, int> per_env;
  for (int e : buf.env) ++per_env[e];
  CHECK(per_env.size() == 4);
  int lo = 1 << 30, hi = 0;
  for (const auto& [e, c] : per_env) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  // One environment step yields at most two robot transitions.
  CHECK(hi - lo <= 2);
  // Environment-major after finish().
  CHECK(std::is_sorted(buf.env.begin(), buf.env.end()));
  for (double x : buf.advantages) CHECK(std::isfinite(x));

  RolloutCollector b(envs, ActionMode::discrete, 77);
  const RolloutBuffer again = b.collect(policy, value, 2048, 0.99, 0.95);
  CHECK(again.log_prob == buf.log_prob);
  CHECK(again.reward == buf.reward);
  CHECK(again.maps == buf.maps);
  CHECK(again.advantages == buf.advantages);
}

TEST_CASE("rollout buffer requires bootstraps for open streams") {
  RolloutBuffer b(2);
  std::vector<float> maps(kObservationFloats, 0.5F);
  std::vector<float> goal(kGoalDim, 0.0F);
  RolloutBuffer::Entry e;
  e.maps = maps;
  e.goal = goal;
  e.reward = 1.0;
  e.stream = 4;
  b.add(e);
  e.reward = 2.0;
  b.add(e);
  CHECK(b.full());
  CHECK_THROWS(b.finish(0.9, 1.0));
  b.set_bootstrap(4, 10.0);
  b.finish(0.5, 1.0);
  CHECK(b.advantages[1] == 2.0 + 0.5 * 10.0);
  CHECK(b.advantages[0] == 1.0 + 0.5 * (2.0 + 0.5 * 10.0));
  const std::vector<std::size_t> idx{1};
  const nn::Batch<float> batch = b.gather(idx);
  CHECK(batch.n == 1);
  CHECK(batch.maps.size() == kObservationFloats);
}
