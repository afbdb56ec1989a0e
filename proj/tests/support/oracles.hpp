#pragma once

// Independent reference implementations the tests compare the library
// against. Deliberately naive: exhaustive enumeration and finite
// differences, no shared code with the solvers under test.

#include <cstdint>
#include <optional>
#include <vector>

#include "faircert/lp.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"

namespace testsupport {

using namespace faircert;

// Every member of the prediction-mode assignment space A(x), built by
// direct recursion over the sensitive features (not via AssignmentSpace).
std::vector<Vec> assignment_members(const FeatureSchema& schema, const Vec& x);

struct BruteForce {
  bool has_ce = false;         // some member decides differently from x
  std::uint64_t ones = 0;      // members deciding 1
  std::uint64_t zeros = 0;     // members deciding 0
  int majority = 0;            // ties go to 1
  double max_violation = 0.0;  // directed probability gap, see below
};

// Enumerates A(x). max_violation is max p(x') - p(x) when x decides 0 and
// max p(x) - p(x') when it decides 1.
BruteForce brute_force(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x);

// Central finite differences of the BCE loss at (x, y), step h.
Gradients numeric_gradient(const NetworkSpec& net, const Vec& x, int y, double h = 1e-5);

// Optimum by vertex enumeration: intersects every n-subset of the
// constraint/bound hyperplanes and keeps the best feasible point. Only
// for tiny instances (<= 6 variables). nullopt when infeasible.
std::optional<double> brute_force_lp(const lp::Problem& p);

}  // namespace testsupport
