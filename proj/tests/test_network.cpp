#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdnav/env.hpp"
#include "crowdnav/network.hpp"
#include "crowdnav/policy.hpp"
#include "oracles.hpp"

using namespace crowdnav;
using nn::HeadKind;

TEST_CASE("gradients match central differences for every layer and head") {
  Rng rng = make_rng(2024);
  struct Case {
    HeadKind head;
    int outputs;
    nn::LogStdMode mode;
  };
  for (const Case c : {Case{HeadKind::categorical, 5, nn::LogStdMode::parameter},
                       Case{HeadKind::gaussian, 2, nn::LogStdMode::parameter},
                       Case{HeadKind::gaussian, 2, nn::LogStdMode::head},
                       Case{HeadKind::value, 1, nn::LogStdMode::parameter}}) {
    nn::ConvNet<double> net(oracle::small_arch(c.head, c.outputs, c.mode), 7);
    const auto batch = oracle::random_batch(net.arch(), 3, rng);
    for (const oracle::GradCheck& g : oracle::gradient_check(net, batch, rng, 8)) {
      INFO(g.slice, " #", g.index, " analytic ", g.analytic, " numeric ", g.numeric);
      CHECK(g.rel_error < 1e-3);
    }
  }
}

TEST_CASE("full size parameter counts") {
  CHECK(nn::NetArch::policy_discrete().parameter_count() == 1777992);
  CHECK(nn::NetArch::value().parameter_count() == 1764141);
  CHECK(nn::NetArch::policy_discrete().hash() != nn::NetArch::value().hash());
  CHECK(nn::NetArch::policy_continuous().hash() != nn::NetArch::policy_discrete().hash());
}

TEST_CASE("zero input rows give identical outputs") {
  nn::ConvNet<double> net(oracle::small_arch(HeadKind::categorical, 4), 3);
  nn::Batch<double> b;
  b.n = 3;
  b.maps.assign(3 * 4 * 12 * 12, 0.0);
  b.goals.assign(3 * 3, 0.0);
  const auto r = net.forward(b, false);
  for (long i = 1; i < 3; ++i) CHECK((r.out.row(i) - r.out.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero output weights cut every upstream gradient") {
  Rng rng = make_rng(4);
  nn::ConvNet<double> net(oracle::small_arch(HeadKind::categorical, 4), 5);
  const nn::ParamSlice head = net.layout().head_w;
  std::fill_n(net.params().begin() + static_cast<long>(head.offset), head.size(), 0.0);
  const auto b = oracle::random_batch(net.arch(), 2, rng);
  const auto r = net.forward(b, true);
  nn::Mat<double> d = nn::Mat<double>::Ones(2, 4);
  std::vector<double> g(net.params().size(), 0.0);
  net.backward(r.cache, d, {}, g);
  for (std::size_t i = 0; i < head.offset; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("gradients are linear in the loss") {
  Rng rng = make_rng(6);
  nn::ConvNet<double> net(oracle::small_arch(HeadKind::value, 1), 9);
  const auto b = oracle::random_batch(net.arch(), 2, rng);
  const auto r = net.forward(b, true);
  nn::Mat<double> d(2, 1);
  d << 0.7, -0.3;
  std::vector<double> g1(net.params().size(), 0.0);
  std::vector<double> g2(net.params().size(), 0.0);
  net.backward(r.cache, d, {}, g1);
  net.backward(r.cache, nn::Mat<double>(2.0 * d), {}, g2);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("non-finite input is rejected") {
  nn::ConvNet<double> net(oracle::small_arch(HeadKind::value, 1), 1);
  Rng rng = make_rng(1);
  auto b = oracle::random_batch(net.arch(), 1, rng);
  b.maps[5] = std::nan("");
  CHECK_THROWS_AS(net.forward(b, false), std::invalid_argument);
}

TEST_CASE("initialization is seeded") {
  nn::ConvNet<float> a(oracle::small_arch(HeadKind::categorical, 4), 11);
  nn::ConvNet<float> b(oracle::small_arch(HeadKind::categorical, 4), 11);
  nn::ConvNet<float> c(oracle::small_arch(HeadKind::categorical, 4), 12);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
}

TEST_CASE("softmax and categorical helpers") {
  const std::vector<double> logits{1.0, -2.0, 0.5, 3.0};
  const auto p = softmax(logits);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> big{1000.0, 999.0};
  const auto q = softmax(big);
  CHECK(std::isfinite(q[0]));
  CHECK(q[0] + q[1] == doctest::Approx(1.0));

  // Gradients against finite differences.
  std::vector<double> g(4);
  categorical_log_prob_grad(logits, 2, g);
  std::vector<double> e(4);
  categorical_entropy_grad(logits, e);
  for (std::size_t j = 0; j < 4; ++j) {
    auto up = logits;
    auto dn = logits;
    up[j] += 1e-6;
    dn[j] -= 1e-6;
    CHECK(g[j] == doctest::Approx((categorical_log_prob(up, 2) - categorical_log_prob(dn, 2)) / 2e-6).epsilon(1e-6));
    CHECK(e[j] == doctest::Approx((categorical_entropy(up) - categorical_entropy(dn)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("gaussian helpers") {
  const std::vector<double> mean{0.3, -0.1};
  const std::vector<double> ls{-0.5, 0.2};
  const std::vector<double> x{0.1, 0.4};
  std::vector<double> dm(2), dl(2);
  gaussian_log_prob_grad(mean, ls, x, dm, dl);
  for (std::size_t j = 0; j < 2; ++j) {
    auto mu = mean, md = mean, lu = ls, ld = ls;
    mu[j] += 1e-6;
    md[j] -= 1e-6;
    lu[j] += 1e-6;
    ld[j] -= 1e-6;
    CHECK(dm[j] == doctest::Approx((gaussian_log_prob(mu, ls, x) - gaussian_log_prob(md, ls, x)) / 2e-6).epsilon(1e-6));
    CHECK(dl[j] == doctest::Approx((gaussian_log_prob(mean, lu, x) - gaussian_log_prob(mean, ld, x)) / 2e-6).epsilon(1e-6));
  }
  const double h = gaussian_entropy(ls);
  CHECK(h == doctest::Approx(-0.3 + 1.0 + std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("one-hot categorical always returns its index") {
  std::vector<double> logits(kDiscreteActions, -1e9);
  logits[17] = 0.0;
  Rng rng = make_rng(3);
  for (int i = 0; i < 100; ++i) {
    const SampledAction s = sample_discrete(logits, rng);
    CHECK(s.index == 17);
    CHECK(s.log_prob == 0.0);
    CHECK(s.action == discrete_action(17));
  }
}

TEST_CASE("greedy discrete takes the first arg-max") {
  std::vector<double> logits(kDiscreteActions, 0.0);
  logits[4] = 2.0;
  logits[9] = 2.0;
  Rng rng = make_rng(1);
  CHECK(sample_discrete(logits, rng, true).index == 4);
}

TEST_CASE("discrete draws follow the distribution") {
  const std::vector<double> logits{0.0, 1.0, -0.5, 0.3, 2.0};
  const auto p = softmax(logits);
  Rng rng = make_rng(99);
  const int n = 1000000;
  std::vector<int> counts(p.size(), 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_discrete(logits, rng).index)];
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double sigma = std::sqrt(n * p[k] * (1 - p[k]));
    CHECK(std::abs(counts[k] - n * p[k]) <= 3.0 * sigma);
  }
}

TEST_CASE("near-zero variance gaussian is deterministic") {
  const std::vector<double> mean{0.3, -0.2};
  const std::vector<double> ls{-20.0, -20.0};
  Rng rng = make_rng(5);
  for (int i = 0; i < 10; ++i) {
    const SampledAction s = sample_continuous(mean, ls, rng);
    CHECK(s.action.v == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(s.action.w == doctest::Approx(-0.2).epsilon(1e-7));
  }
}

TEST_CASE("continuous samples are clipped but keep the raw log-prob") {
  const std::vector<double> mean{1.5, 2.0};
  const std::vector<double> ls{-3.0, -3.0};
  Rng rng = make_rng(8);
  const SampledAction s = sample_continuous(mean, ls, rng);
  CHECK(s.action.v == kMaxLinearSpeed);
  CHECK(s.action.w == kMaxAngularSpeed);
  const std::vector<double> raw{s.raw[0], s.raw[1]};
  CHECK(s.log_prob == doctest::Approx(gaussian_log_prob(mean, ls, raw)));
}

TEST_CASE("action mode names") {
  CHECK(parse_action_mode(to_string(ActionMode::continuous)) == ActionMode::continuous);
  CHECK_THROWS(parse_action_mode("analog"));
}
