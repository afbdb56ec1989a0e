#include <cmath>
#include <random>

#include "doctest.h"
#include "faircert/common.hpp"
#include "faircert/lp.hpp"
#include "support/oracles.hpp"

using namespace faircert;

TEST_CASE("simplex solves a one-variable program") {
  lp::Problem p;
  const int x = p.add_var(0.0, 10.0);
  p.add_constraint({{x, 1.0}}, lp::Sense::Le, 3.0);
  p.set_objective(lp::Direction::Maximize, {{x, 1.0}});
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(s.x[x] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("simplex detects infeasibility") {
  lp::Problem p;
  const int x = p.add_var(0.0, 10.0);
  p.add_constraint({{x, 1.0}}, lp::Sense::Ge, 2.0);
  p.add_constraint({{x, 1.0}}, lp::Sense::Le, 1.0);
  p.set_objective(lp::Direction::Maximize, {{x, 1.0}});
  const auto s = lp::solve(p);
  CHECK(s.status == lp::Status::Infeasible);
  CHECK(s.infeasibility > lp::kFeasTol);
}

TEST_CASE("simplex honors equality rows and minimization") {
  lp::Problem p;
  const int x = p.add_var(-5.0, 5.0);
  const int y = p.add_var(-5.0, 5.0);
  p.add_constraint({{x, 1.0}, {y, 1.0}}, lp::Sense::Eq, 1.0);
  p.add_constraint({{x, 1.0}, {y, -1.0}}, lp::Sense::Le, 0.5);
  p.set_objective(lp::Direction::Minimize, {{x, 3.0}, {y, 1.0}});
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  // Substituting y = 1 - x gives 2x + 1, so push x down until y hits its
  // upper bound: x = -4, y = 5.
  CHECK(s.x[x] == doctest::Approx(-4.0).epsilon(1e-7));
  CHECK(s.x[y] == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(s.objective == doctest::Approx(-7.0).epsilon(1e-7));
}

TEST_CASE("an optimum may sit strictly inside on unconstrained rows") {
  // Only bounds active: maximize -x over [-2, 4] picks the lower bound.
  lp::Problem p;
  const int x = p.add_var(-2.0, 4.0);
  p.set_objective(lp::Direction::Maximize, {{x, -1.0}});
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("duplicate and redundant rows do not stall") {
  lp::Problem p;
  const int x = p.add_var(0.0, 1.0);
  const int y = p.add_var(0.0, 1.0);
  for (int i = 0; i < 5; ++i) p.add_constraint({{x, 1.0}, {y, 1.0}}, lp::Sense::Le, 1.0);
  p.add_constraint({{x, 2.0}, {y, 2.0}}, lp::Sense::Le, 2.0);
  p.set_objective(lp::Direction::Maximize, {{x, 1.0}, {y, 2.0}});
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("bound overrides match solving the modified problem") {
  lp::Problem p;
  const int x = p.add_var(0.0, 4.0);
  const int y = p.add_var(0.0, 4.0);
  p.add_constraint({{x, 1.0}, {y, 1.0}}, lp::Sense::Le, 5.0);
  p.set_objective(lp::Direction::Maximize, {{x, 1.0}, {y, 1.0}});

  const auto narrowed = lp::solve(p, {1.0, 0.0}, {1.0, 2.0});  // pin x = 1
  REQUIRE(narrowed.status == lp::Status::Optimal);
  CHECK(narrowed.objective == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(narrowed.x[x] == doctest::Approx(1.0).epsilon(1e-9));

  lp::Problem q = p;
  q.lo = {1.0, 0.0};
  q.hi = {1.0, 2.0};
  CHECK(lp::solve(q).objective == doctest::Approx(narrowed.objective).epsilon(1e-9));
}

TEST_CASE("random programs agree with vertex enumeration") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_int_distribution<int> nvars(2, 4);
  std::uniform_int_distribution<int> nrows(1, 5);
  std::uniform_int_distribution<int> sense_pick(0, 2);

  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    lp::Problem p;
    const int n = nvars(rng);
    for (int j = 0; j < n; ++j) {
      const double a = coef(rng), b = coef(rng);
      p.add_var(std::min(a, b), std::max(a, b));
    }
    const int m = nrows(rng);
    for (int i = 0; i < m; ++i) {
      std::vector<std::pair<int, double>> terms;
      for (int j = 0; j < n; ++j) terms.push_back({j, coef(rng)});
      p.add_constraint(std::move(terms), static_cast<lp::Sense>(sense_pick(rng)), coef(rng));
    }
    std::vector<std::pair<int, double>> obj;
    for (int j = 0; j < n; ++j) obj.push_back({j, coef(rng)});
    p.set_objective((trial & 1) ? lp::Direction::Maximize : lp::Direction::Minimize, obj);

    const auto got = lp::solve(p);
    const auto want = testsupport::brute_force_lp(p);
    if (!want.has_value()) {
      // The oracle's feasibility tolerance is looser than the solver's, so
      // only a hard disagreement counts.
      CHECK(got.status == lp::Status::Infeasible);
      ++infeasible;
      continue;
    }
    if (got.status != lp::Status::Optimal) {
      // Borderline: the oracle accepted a vertex within its tolerance. The
      // solver must then be reporting a tiny residual, not a real gap.
      CHECK(got.infeasibility < 1e-5);
      continue;
    }
    ++feasible;
    CHECK(std::abs(got.objective - *want) < 1e-5);
  }
  // The generator should produce a healthy mix of both outcomes.
  CHECK(feasible > 50);
  CHECK(infeasible > 10);
}
