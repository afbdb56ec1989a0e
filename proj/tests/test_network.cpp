#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "faircert/common.hpp"
#include "faircert/network.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace faircert;

namespace {

// 2-2-1 net with hand-checkable arithmetic.
NetworkSpec tiny_net() {
  Layer l1;
  l1.w = Mat(2, 2);
  l1.w << 1.0, -2.0, 0.5, 1.0;
  l1.b = Vec(2);
  l1.b << 0.0, -1.0;
  Layer l2;
  l2.w = Mat(1, 2);
  l2.w << 2.0, -1.0;
  l2.b = Vec(1);
  l2.b << 1.0;
  return NetworkSpec({l1, l2}, 0.5);
}

}  // namespace

TEST_CASE("forward matches hand computation") {
  const auto net = tiny_net();
  CHECK(net.input_dim() == 2);
  CHECK(net.depth() == 2);

  Vec x(2);
  x << 1.0, 0.5;
  // pre1 = (1*1 - 2*0.5, 0.5*1 + 1*0.5 - 1) = (0, 0); post1 = (0, 0)
  // pre2 = 2*0 - 1*0 + 1 = 1
  const auto t = forward(net, x);
  REQUIRE(t.pre.size() == 2);
  CHECK(t.pre[0](0) == doctest::Approx(0.0));
  CHECK(t.pre[0](1) == doctest::Approx(0.0));
  CHECK(t.logit() == doctest::Approx(1.0));
  CHECK(t.probability() == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(decide(net, x) == 1);

  x << -1.0, 0.0;
  // pre1 = (-1, -1.5) -> post1 = (0, 0) -> logit 1
  CHECK(forward(net, x).logit() == doctest::Approx(1.0));

  x << 3.0, 1.0;
  // pre1 = (1, 1.5), post1 = (1, 1.5), logit = 2 - 1.5 + 1 = 1.5
  CHECK(forward(net, x).logit() == doctest::Approx(1.5));
  CHECK(predict_probability(net, x) == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))));
}

TEST_CASE("decision threshold works in logit space") {
  const auto net = tiny_net();
  CHECK(net.threshold() == 0.5);
  CHECK(net.logit_threshold() == doctest::Approx(0.0));

  const NetworkSpec strict({net.layers()[0], net.layers()[1]}, 0.9);
  // sigma(logit) >= 0.9 <=> logit >= ln(9)
  CHECK(strict.logit_threshold() == doctest::Approx(std::log(9.0)).epsilon(1e-12));
  Vec x(2);
  x << 1.0, 0.5;  // logit 1 < ln 9
  CHECK(decide(strict, x) == 0);
}

TEST_CASE("bce loss clamps probabilities") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(bce_loss(0.5, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(bce_loss(0.7310585786300049, 1) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  // Clamp at 1e-12 keeps the loss finite.
  CHECK(bce_loss(0.0, 1) == doctest::Approx(27.631021115928547).epsilon(1e-12));
  CHECK(bce_loss(1.0, 0) == doctest::Approx(27.631021115928547).epsilon(1e-6));
}

TEST_CASE("backward matches finite differences away from kinks") {
  std::mt19937_64 rng(11);
  int checked = 0;
  while (checked < 8) {
    const auto net = testsupport::random_net(rng, 3, {4, 3}, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec x(3);
    for (int i = 0; i < 3; ++i) x(i) = u(rng);
    const int y = (rng() & 1) ? 1 : 0;

    // Skip points near a ReLU kink, where the loss is not differentiable.
    const auto trace = forward(net, x);
    bool near_kink = false;
    for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l) {
      near_kink = near_kink || (trace.pre[l].array().abs() < 1e-3).any();
    }
    if (near_kink) continue;
    ++checked;

    const auto analytic = backward(net, x, y);
    const auto numeric = testsupport::numeric_gradient(net, x, y);
    CHECK(analytic.loss == doctest::Approx(numeric.loss).epsilon(1e-12));
    for (std::size_t l = 0; l < analytic.dw.size(); ++l) {
      for (int i = 0; i < analytic.dw[l].rows(); ++i) {
        for (int j = 0; j < analytic.dw[l].cols(); ++j) {
          const double a = analytic.dw[l](i, j);
          const double n = numeric.dw[l](i, j);
          CHECK(std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0}) < 1e-4);
        }
        const double a = analytic.db[l](i);
        const double n = numeric.db[l](i);
        CHECK(std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0}) < 1e-4);
      }
    }
  }
}

TEST_CASE("gradients accumulate with add_scaled") {
  std::mt19937_64 rng(3);
  const auto net = testsupport::random_net(rng, 2, {3});
  Vec x1(2), x2(2);
  x1 << 0.2, 0.7;
  x2 << 0.9, 0.1;
  auto sum = Gradients::zeros_like(net);
  sum.add_scaled(backward(net, x1, 1), 0.5);
  sum.add_scaled(backward(net, x2, 0), 0.5);
  const auto g1 = backward(net, x1, 1);
  const auto g2 = backward(net, x2, 0);
  for (std::size_t l = 0; l < sum.dw.size(); ++l) {
    CHECK((sum.dw[l] - 0.5 * (g1.dw[l] + g2.dw[l])).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((sum.db[l] - 0.5 * (g1.db[l] + g2.db[l])).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("model json round-trips exactly") {
  std::mt19937_64 rng(5);
  const auto net = testsupport::random_net(rng, 4, {5, 3}, 2.0, 0.35);
  const auto copy = model_from_json(model_to_json(net));
  CHECK(copy.threshold() == net.threshold());
  REQUIRE(copy.layers().size() == net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    CHECK(copy.layers()[l].w == net.layers()[l].w);  // bitwise, shortest round-trip floats
    CHECK(copy.layers()[l].b == net.layers()[l].b);
  }

  const char* path = "model_under_test.json";
  save_model(net, path);
  const auto loaded = load_model(path);
  std::remove(path);
  CHECK(model_to_json(loaded) == model_to_json(net));

  CHECK_THROWS_AS(model_from_json("not json"), Error);
  CHECK_THROWS_AS(model_from_json("{}"), Error);
  CHECK_THROWS_AS(load_model("no_such_model.json"), Error);
}

TEST_CASE("network validates layer shapes") {
  Layer a;
  a.w = Mat::Ones(2, 3);
  a.b = Vec::Zero(2);
  Layer b;
  b.w = Mat::Ones(1, 4);  // expects 2 inputs
  b.b = Vec::Zero(1);
  CHECK_THROWS_AS(NetworkSpec({a, b}), Error);
  Layer out;
  out.w = Mat::Ones(2, 2);  // output layer must have one row
  out.b = Vec::Zero(2);
  CHECK_THROWS_AS(NetworkSpec({a, out}), Error);
  CHECK_THROWS_AS(NetworkSpec(std::vector<Layer>{}), Error);
  CHECK_THROWS_AS(NetworkSpec({a}, 1.5), Error);
}
