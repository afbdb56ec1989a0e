#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "faircert/fairness.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace faircert;

namespace {

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One real feature x plus one sensitive feature s in [0, 1] (integer grid
// {0, 1} in prediction mode), with logit = wx*x + ws*s + b.
struct LinearCase {
  FeatureSchema schema;
  NetworkSpec net;

  LinearCase(double wx, double ws, double b)
      : schema(FeatureSchema::create(
            {{"x", FeatureKind::Real, {}, 0.0, 1.0, false},
             {"s", FeatureKind::Integer, {}, 0, 1, true}},
            "label")),
        net(make_net(wx, ws, b)) {}

  static NetworkSpec make_net(double wx, double ws, double b) {
    Layer out;
    out.w = Mat(1, 2);
    out.w << wx, ws;
    out.b = Vec(1);
    out.b << b;
    return NetworkSpec({out});
  }

  Vec point(double x, double s) const {
    Vec p(2);
    p << x, s;
    return p;
  }
};

}  // namespace

TEST_CASE("verify flags a decisive sensitive weight") {
  // logit = 10s - 5: s=0 decides 0, s=1 decides 1.
  const LinearCase c(0.0, 10.0, -5.0);
  const Vec x = c.point(0.5, 0.0);
  REQUIRE(decide(c.net, x) == 0);

  const auto out = fairness::verify(c.net, c.schema, x);
  REQUIRE(out.verdict == fairness::Verdict::HasCE);
  REQUIRE(out.ce.has_value());
  CHECK(out.ce->point(1) == doctest::Approx(1.0));
  CHECK(out.ce->point(0) == doctest::Approx(0.5));  // nonsensitive column pinned
  CHECK(out.ce->logit == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(out.ce->probability == doctest::Approx(sigma(5.0)).epsilon(1e-7));
  CHECK(out.ce->violation == doctest::Approx(sigma(5.0) - sigma(-5.0)).epsilon(1e-6));
  REQUIRE(out.ce->sensitive_values.size() == 1);
  CHECK(out.ce->sensitive_values[0] == "1");

  // The flipped query yields the mirror counterexample.
  const auto back = fairness::verify(c.net, c.schema, c.point(0.5, 1.0));
  REQUIRE(back.verdict == fairness::Verdict::HasCE);
  CHECK(back.ce->point(1) == doctest::Approx(0.0));
}

TEST_CASE("verify proves fairness when the weight cannot flip anything") {
  // logit = 4s >= 0 = logit threshold for both grid points.
  const LinearCase c(0.0, 4.0, 0.0);
  for (double s : {0.0, 1.0}) {
    const auto out = fairness::verify(c.net, c.schema, c.point(0.25, s));
    CHECK(out.verdict == fairness::Verdict::Fair);
    CHECK_FALSE(out.ce.has_value());
  }
}

TEST_CASE("max violation over the continuous training box") {
  // logit = 8s - 4 from s=0: the worst assignment is s=1.
  const LinearCase c(0.0, 8.0, -4.0);
  const auto out = fairness::verify_max_violation(c.net, c.schema, c.point(0.1, 0.0));
  REQUIRE(out.verdict == fairness::Verdict::HasCE);
  CHECK(out.ce->violation == doctest::Approx(0.9640275800758169).epsilon(1e-9));
  CHECK(out.ce->logit == doctest::Approx(4.0).epsilon(1e-7));
}

TEST_CASE("training mode reaches fractional assignments the grid misses") {
  // logit = -1 + 4*relu(s) - 8*relu(s - 0.5) equals -1 at both grid points
  // but peaks at +1 for s = 0.5, so the verdicts diverge by mode.
  const auto schema = FeatureSchema::create(
      {{"x", FeatureKind::Real, {}, 0.0, 1.0, false},
       {"s", FeatureKind::Integer, {}, 0, 1, true}},
      "label");
  Layer l1;
  l1.w = Mat(2, 2);
  l1.w << 0.0, 1.0, 0.0, 1.0;
  l1.b = Vec(2);
  l1.b << 0.0, -0.5;
  Layer l2;
  l2.w = Mat(1, 2);
  l2.w << 4.0, -8.0;
  l2.b = Vec(1);
  l2.b << -1.0;
  const NetworkSpec net({l1, l2});

  Vec x(2);
  x << 0.3, 0.0;
  REQUIRE(decide(net, x) == 0);

  CHECK(fairness::verify(net, schema, x).verdict == fairness::Verdict::Fair);

  const auto out = fairness::verify_max_violation(net, schema, x);
  REQUIRE(out.verdict == fairness::Verdict::HasCE);
  CHECK(out.ce->point(1) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(out.ce->logit == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.ce->violation == doctest::Approx(sigma(1.0) - sigma(-1.0)).epsilon(1e-6));
}

TEST_CASE("prediction-mode max violation matches brute force") {
  std::mt19937_64 rng(61);
  fairness::VerifyOptions opts;
  opts.mode = SpaceMode::Prediction;
  int with_ce = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto schema = testsupport::random_discrete_schema(rng, 128);
    const auto net = testsupport::random_net(rng, schema.input_dim(), {4, 3}, 1.5);
    const Vec x = testsupport::random_point(rng, schema);
    const auto want = testsupport::brute_force(net, schema, x);
    const auto got = fairness::verify_max_violation(net, schema, x, opts);
    REQUIRE(got.verdict != fairness::Verdict::Unknown);
    if (want.has_ce) {
      ++with_ce;
      REQUIRE(got.verdict == fairness::Verdict::HasCE);
      CHECK(got.ce->violation == doctest::Approx(want.max_violation).epsilon(1e-6));
      // The witness really flips the decision.
      CHECK((got.ce->probability >= net.threshold()) != (decide(net, x) == 1));
    } else {
      CHECK(got.verdict == fairness::Verdict::Fair);
    }
  }
  CHECK(with_ce > 10);
}

TEST_CASE("verify agrees with enumeration on random discrete instances") {
  std::mt19937_64 rng(67);
  int with_ce = 0, fair = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto schema = testsupport::random_discrete_schema(rng, 256);
    const auto net = testsupport::random_net(rng, schema.input_dim(), {5, 3}, 1.5);
    const Vec x = testsupport::random_point(rng, schema);
    const auto want = testsupport::brute_force(net, schema, x);
    const auto got = fairness::verify(net, schema, x);
    REQUIRE(got.verdict != fairness::Verdict::Unknown);
    if (want.has_ce) {
      ++with_ce;
      REQUIRE(got.verdict == fairness::Verdict::HasCE);
      REQUIRE(got.ce.has_value());
      // Forward recheck of the returned witness.
      const int y0 = decide(net, x);
      CHECK(decide(net, got.ce->point) == 1 - y0);
      // Nonsensitive columns are untouched.
      for (int j = 0; j < schema.nonsensitive_dim(); ++j) {
        CHECK(got.ce->point(j) == doctest::Approx(x(j)).epsilon(1e-9));
      }
    } else {
      ++fair;
      CHECK(got.verdict == fairness::Verdict::Fair);
    }
  }
  CHECK(with_ce > 20);
  CHECK(fair > 20);
}

TEST_CASE("fair predict follows the majority and sends ties to 1") {
  // Two-member space with a symmetric logit: one member decides 1, the
  // other 0, so both queries must resolve to 1.
  std::vector<FeatureSpec> f;
  f.push_back({"x", FeatureKind::Real, {}, 0.0, 1.0, false});
  f.push_back({"g", FeatureKind::Categorical, {"a", "b"}, 0, 0, true});
  const auto schema = FeatureSchema::create(f, "label");
  Layer out;
  out.w = Mat(1, 3);
  out.w << 0.0, 2.0, -2.0;  // logit = 2*ga - 2*gb
  out.b = Vec(1);
  out.b << 0.0;
  const NetworkSpec net({out});

  Vec xa(3), xb(3);
  xa << 0.4, 1.0, 0.0;
  xb << 0.4, 0.0, 1.0;
  REQUIRE(decide(net, xa) == 1);
  REQUIRE(decide(net, xb) == 0);
  CHECK(fairness::fair_predict(net, schema, xa) == 1);
  CHECK(fairness::fair_predict(net, schema, xb) == 1);
  CHECK(fairness::enumerate_predict(net, schema, xa) == 1);
  CHECK(fairness::enumerate_predict(net, schema, xb) == 1);
}

TEST_CASE("fair predict equals enumeration on random instances") {
  std::mt19937_64 rng(71);
  int flipped = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const auto schema = testsupport::random_discrete_schema(rng, 200);
    const auto net = testsupport::random_net(rng, schema.input_dim(), {4}, 1.5);
    const Vec x = testsupport::random_point(rng, schema);
    const auto want = testsupport::brute_force(net, schema, x);
    const int got = fairness::fair_predict(net, schema, x);
    CHECK(got == want.majority);
    CHECK(got == fairness::enumerate_predict(net, schema, x));
    if (got != decide(net, x)) ++flipped;
  }
  CHECK(flipped > 5);
}

TEST_CASE("fair predict is constant across the assignment space") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    const auto schema = testsupport::random_discrete_schema(rng, 24);
    const auto net = testsupport::random_net(rng, schema.input_dim(), {4}, 1.5);
    const Vec x = testsupport::random_point(rng, schema);
    const int base = fairness::fair_predict(net, schema, x);
    for (const Vec& m : testsupport::assignment_members(schema, x)) {
      CHECK(fairness::fair_predict(net, schema, m) == base);
    }
  }
}

TEST_CASE("enumerate_predict refuses oversized spaces") {
  std::vector<FeatureSpec> f;
  f.push_back({"s", FeatureKind::Integer, {}, 0, 40, true});
  f.push_back({"t", FeatureKind::Integer, {}, 0, 40, true});
  const auto schema = FeatureSchema::create(f, "label");
  std::mt19937_64 rng(79);
  const auto net = testsupport::random_net(rng, 2, {3});
  const Vec x = testsupport::random_point(rng, schema);
  CHECK_THROWS_AS(fairness::enumerate_predict(net, schema, x, 1000), Error);
}

TEST_CASE("list_ces returns distinct rechecked counterexamples") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 25; ++trial) {
    const auto schema = testsupport::random_discrete_schema(rng, 64);
    const auto net = testsupport::random_net(rng, schema.input_dim(), {4}, 1.5);
    const Vec x = testsupport::random_point(rng, schema);
    const int y0 = decide(net, x);

    std::uint64_t want = 0;
    for (const Vec& m : testsupport::assignment_members(schema, x)) {
      if (decide(net, m) != y0) ++want;
    }

    const auto all = fairness::list_ces(net, schema, x, 100);
    CHECK(all.size() == want);
    std::set<std::vector<std::string>> keys;
    for (const auto& ce : all) {
      CHECK(decide(net, ce.point) == 1 - y0);
      keys.insert(ce.sensitive_values);
    }
    CHECK(keys.size() == all.size());

    if (want > 1) {
      CHECK(fairness::list_ces(net, schema, x, 1).size() == 1);
    }
  }
}

TEST_CASE("tight time limits surface as unknown or undecided") {
  // Big enough that a single relaxation cannot finish inside the budget.
  std::mt19937_64 rng(89);
  const auto schema = testsupport::random_discrete_schema(rng, 512);
  const auto net = testsupport::random_net(rng, schema.input_dim(), {24, 24, 24}, 2.0);
  const Vec x = testsupport::random_point(rng, schema);

  fairness::VerifyOptions vo;
  vo.time_limit_ms = 1;
  const auto out = fairness::verify(net, schema, x, vo);
  CHECK(out.verdict == fairness::Verdict::Unknown);

  fairness::PredictOptions po;
  po.time_limit_ms = 1;
  CHECK_THROWS_AS(fairness::fair_predict(net, schema, x, po), UndecidedError);
}

TEST_CASE("audit aggregates per-sample outcomes") {
  // logit = 2x + 10s - 6: s flips the decision iff 2x is within 10 of the
  // threshold, which holds for all x in [0, 1].
  const LinearCase c(2.0, 10.0, -6.0);
  Dataset data;
  for (int i = 0; i < 8; ++i) {
    const double x = i / 7.0;
    const double s = i % 2;
    data.points.push_back(c.point(x, s));
    data.labels.push_back(i < 4 ? 0 : 1);
  }

  fairness::AuditOptions opts;
  opts.max_violation = true;
  const auto report = fairness::audit(c.net, c.schema, data, opts);
  REQUIRE(report.samples.size() == 8);
  CHECK(report.decided_count == 8);
  CHECK(report.unknown_count == 0);

  int flips = 0, ces = 0, raw_hits = 0, fair_hits = 0;
  for (int i = 0; i < 8; ++i) {
    const auto& rec = report.samples[i];
    const Vec& x = data.points[i];
    const auto want = testsupport::brute_force(c.net, c.schema, x);
    CHECK(rec.sample_id == i);
    CHECK(rec.raw_label == decide(c.net, x));
    CHECK(rec.fair_label == want.majority);
    CHECK(rec.has_ce == want.has_ce);
    CHECK(rec.flipped == (rec.fair_label != rec.raw_label));
    CHECK(rec.status == (want.has_ce ? "ce" : "fair"));
    if (want.has_ce) CHECK(rec.violation == doctest::Approx(want.max_violation).epsilon(1e-6));
    flips += rec.flipped;
    ces += rec.has_ce;
    raw_hits += rec.raw_label == data.labels[i];
    fair_hits += rec.fair_label == data.labels[i];
  }
  CHECK(report.ce_rate == doctest::Approx(ces / 8.0));
  CHECK(report.flip_rate == doctest::Approx(flips / 8.0));
  CHECK(report.raw_accuracy == doctest::Approx(raw_hits / 8.0));
  CHECK(report.fair_accuracy == doctest::Approx(fair_hits / 8.0));
  CHECK(report.max_violation > 0.0);

  // fair = false short-circuits the vote and reuses the raw labels.
  fairness::AuditOptions raw_only;
  raw_only.fair = false;
  const auto quick = fairness::audit(c.net, c.schema, data, raw_only);
  for (const auto& rec : quick.samples) CHECK(rec.fair_label == rec.raw_label);
  CHECK(quick.flip_rate == 0.0);
  CHECK(quick.ce_rate == doctest::Approx(report.ce_rate));

  // Threaded audits reduce to the same report.
  fairness::AuditOptions threaded = opts;
  threaded.threads = 4;
  const auto par = fairness::audit(c.net, c.schema, data, threaded);
  REQUIRE(par.samples.size() == report.samples.size());
  for (std::size_t i = 0; i < par.samples.size(); ++i) {
    CHECK(par.samples[i].fair_label == report.samples[i].fair_label);
    CHECK(par.samples[i].status == report.samples[i].status);
    CHECK(par.samples[i].violation == doctest::Approx(report.samples[i].violation));
  }
  CHECK(par.ce_rate == doctest::Approx(report.ce_rate));
}
