#pragma once

#include <utility>
#include <vector>

#include "faircert/common.hpp"

namespace faircert::lp {

enum class Sense { Le, Ge, Eq };
enum class Direction { Minimize, Maximize };
enum class Status { Optimal, Infeasible };

struct Constraint {
  std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
  Sense sense = Sense::Le;
  double rhs = 0.0;
};

// Linear program over box-bounded variables. Every variable must carry
// finite bounds; rows may use <=, >= or =.
struct Problem {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> objective;  // dense, one entry per variable
  Direction direction = Direction::Minimize;
  std::vector<Constraint> rows;

  int num_vars() const { return static_cast<int>(lo.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_var(double lo_bound, double hi_bound);
  void add_constraint(std::vector<std::pair<int, double>> terms, Sense sense, double rhs);
  void set_objective(Direction dir, const std::vector<std::pair<int, double>>& terms);
};

struct Solution {
  Status status = Status::Infeasible;
  double objective = 0.0;
  std::vector<double> x;       // structural variables only
  double infeasibility = 0.0;  // phase-1 optimum when infeasible
  int iterations = 0;
};

inline constexpr double kFeasTol = 1e-7;

// Bounded-variable primal simplex on a dense tableau. Dantzig pricing with
// a switch to Bland's rule after 1000 degenerate pivots; the iteration cap
// throws "numerical stall". Deterministic for identical inputs.
Solution solve(const Problem& p);

// Same, with per-call overrides of the structural variable bounds (used by
// branch-and-bound nodes so the base problem is never copied).
Solution solve(const Problem& p, const std::vector<double>& lo_override,
               const std::vector<double>& hi_override);

}  // namespace faircert::lp
