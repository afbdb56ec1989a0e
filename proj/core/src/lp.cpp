#include "faircert/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace faircert::lp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kPriceTol = 1e-9;
constexpr double kDegenTol = 1e-9;
constexpr int kDegenLimit = 1000;
}  // namespace

int Problem::add_var(double lo_bound, double hi_bound) {
  if (!std::isfinite(lo_bound) || !std::isfinite(hi_bound) || lo_bound > hi_bound) {
    throw Error("lp: variable bounds must be finite with lo <= hi");
  }
  lo.push_back(lo_bound);
  hi.push_back(hi_bound);
  objective.push_back(0.0);
  return num_vars() - 1;
}

void Problem::add_constraint(std::vector<std::pair<int, double>> terms, Sense sense,
                             double rhs) {
  for (const auto& [v, c] : terms) {
    if (v < 0 || v >= num_vars()) throw Error("lp: constraint references unknown variable");
    if (!std::isfinite(c)) throw Error("lp: non-finite constraint coefficient");
  }
  if (!std::isfinite(rhs)) throw Error("lp: non-finite rhs");
  rows.push_back({std::move(terms), sense, rhs});
}

void Problem::set_objective(Direction dir, const std::vector<std::pair<int, double>>& terms) {
  direction = dir;
  std::fill(objective.begin(), objective.end(), 0.0);
  for (const auto& [v, c] : terms) {
    if (v < 0 || v >= num_vars()) throw Error("lp: objective references unknown variable");
    objective[v] += c;
  }
}

namespace {

class Simplex {
public:
  Simplex(const Problem& p, const std::vector<double>& slo, const std::vector<double>& shi)
      : p_(p), n_(p.num_vars()), m_(p.num_rows()), total_(n_ + m_) {
    lo_.resize(total_);
    hi_.resize(total_);
    for (int j = 0; j < n_; ++j) {
      if (!std::isfinite(slo[j]) || !std::isfinite(shi[j]) || slo[j] > shi[j]) {
        throw Error("lp: variable bounds must be finite with lo <= hi");
      }
      lo_[j] = slo[j];
      hi_[j] = shi[j];
    }
    t_ = Mat::Zero(m_, total_);
    Vec b = Vec::Zero(m_);
    for (int i = 0; i < m_; ++i) {
      const Constraint& row = p.rows[i];
      for (const auto& [v, c] : row.terms) t_(i, v) += c;
      t_(i, n_ + i) = 1.0;
      b(i) = row.rhs;
      switch (row.sense) {
        case Sense::Le: lo_[n_ + i] = 0.0; hi_[n_ + i] = kInf; break;
        case Sense::Ge: lo_[n_ + i] = -kInf; hi_[n_ + i] = 0.0; break;
        case Sense::Eq: lo_[n_ + i] = 0.0; hi_[n_ + i] = 0.0; break;
      }
    }

    basis_.resize(m_);
    pos_.assign(total_, -1);
    at_upper_.assign(total_, false);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      pos_[n_ + i] = i;
    }
    xb_ = b;
    for (int j = 0; j < n_; ++j) {
      if (lo_[j] != 0.0) xb_ -= t_.col(j) * lo_[j];
    }
  }

  Solution run() {
    const long cap = 50L * (m_ + total_) + 200;
    cost_ = Vec::Zero(total_);
    const double sign = p_.direction == Direction::Maximize ? -1.0 : 1.0;
    for (int j = 0; j < n_; ++j) cost_(j) = sign * p_.objective[j];

    Solution sol;
    bool phase1 = !basis_feasible();
    while (true) {
      if (++sol.iterations > cap) throw Error("lp: numerical stall (iteration cap)");
      if (phase1 && basis_feasible()) phase1 = false;
      const int step = iterate(phase1);
      if (step == kNoImproving) {
        if (phase1) {
          sol.status = Status::Infeasible;
          sol.infeasibility = infeasibility();
          return sol;
        }
        break;
      }
    }

    sol.status = Status::Optimal;
    sol.x.resize(n_);
    for (int j = 0; j < n_; ++j) {
      double v = pos_[j] >= 0 ? xb_(pos_[j]) : value(j);
      if (v < lo_[j] && v > lo_[j] - 10 * kFeasTol) v = lo_[j];
      if (v > hi_[j] && v < hi_[j] + 10 * kFeasTol) v = hi_[j];
      sol.x[j] = v;
      sol.objective += p_.objective[j] * v;
    }
    return sol;
  }

private:
  static constexpr int kNoImproving = 0;
  static constexpr int kStepped = 1;

  double value(int j) const { return at_upper_[j] ? hi_[j] : lo_[j]; }

  bool basis_feasible() const {
    for (int i = 0; i < m_; ++i) {
      const int v = basis_[i];
      if (xb_(i) < lo_[v] - kFeasTol || xb_(i) > hi_[v] + kFeasTol) return false;
    }
    return true;
  }

  double infeasibility() const {
    double f = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int v = basis_[i];
      f += std::max(0.0, lo_[v] - xb_(i)) + std::max(0.0, xb_(i) - hi_[v]);
    }
    return f;
  }

  // Reduced costs for the current phase, as a dense row over all variables.
  Vec reduced_costs(bool phase1) const {
    Vec cb = Vec::Zero(m_);
    if (phase1) {
      for (int i = 0; i < m_; ++i) {
        const int v = basis_[i];
        if (xb_(i) < lo_[v] - kFeasTol) cb(i) = -1.0;
        else if (xb_(i) > hi_[v] + kFeasTol) cb(i) = 1.0;
      }
      return -(t_.transpose() * cb);
    }
    for (int i = 0; i < m_; ++i) cb(i) = cost_(basis_[i]);
    return cost_ - t_.transpose() * cb;
  }

  int iterate(bool phase1) {
    const Vec d = reduced_costs(phase1);

    int q = -1;
    double best_score = kPriceTol;
    for (int j = 0; j < total_; ++j) {
      if (pos_[j] >= 0) continue;
      if (hi_[j] - lo_[j] <= 0.0) continue;  // fixed variable can never move
      const double score = at_upper_[j] ? d(j) : -d(j);
      if (score <= kPriceTol) continue;
      if (bland_) {
        q = j;
        break;
      }
      if (score > best_score) {
        best_score = score;
        q = j;
      }
    }
    if (q < 0) return kNoImproving;

    const double dir = at_upper_[q] ? -1.0 : 1.0;
    const double span = hi_[q] - lo_[q];

    double best_t = span;  // entering variable's own bound flip
    int block_row = -1;
    bool leave_at_upper = false;
    double block_pivot = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double a = t_(i, q);
      if (std::abs(a) <= kPivotTol) continue;
      const double rate = -dir * a;  // d(xb_i)/dt
      const int v = basis_[i];
      const double lb = lo_[v];
      const double ub = hi_[v];
      double ti;
      bool to_upper;
      if (xb_(i) < lb - kFeasTol) {
        if (rate <= 0.0) continue;  // already below and falling: no breakpoint
        ti = (lb - xb_(i)) / rate;
        to_upper = false;
      } else if (xb_(i) > ub + kFeasTol) {
        if (rate >= 0.0) continue;
        ti = (ub - xb_(i)) / rate;
        to_upper = true;
      } else if (rate < 0.0) {
        if (lb == -kInf) continue;
        ti = (lb - xb_(i)) / rate;
        to_upper = false;
      } else {
        if (ub == kInf) continue;
        ti = (ub - xb_(i)) / rate;
        to_upper = true;
      }
      if (ti < 0.0) ti = 0.0;
      bool better = false;
      if (block_row < 0) {
        better = ti <= best_t;
      } else if (ti < best_t - kDegenTol) {
        better = true;
      } else if (ti <= best_t + kDegenTol) {
        // Tied breakpoints: prefer the numerically stronger pivot, or the
        // lowest basis index once Bland's rule is active.
        better = bland_ ? basis_[i] < basis_[block_row]
                        : std::abs(a) > std::abs(block_pivot);
      }
      if (better) {
        best_t = std::min(best_t, ti);
        block_row = i;
        leave_at_upper = to_upper;
        block_pivot = a;
      }
    }

    if (block_row < 0) {
      if (!std::isfinite(best_t)) throw Error("lp: numerical stall (unbounded direction)");
      // Bound flip: the entering variable moves to its other bound.
      xb_ -= dir * best_t * t_.col(q);
      at_upper_[q] = !at_upper_[q];
      return kStepped;
    }

    const double t = best_t;
    const double enter_value = value(q) + dir * t;
    xb_ -= dir * t * t_.col(q);
    xb_(block_row) = enter_value;

    const int leaving = basis_[block_row];
    pos_[leaving] = -1;
    at_upper_[leaving] = leave_at_upper;

    const double piv = t_(block_row, q);
    t_.row(block_row) /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == block_row) continue;
      const double f = t_(i, q);
      if (f != 0.0) t_.row(i) -= f * t_.row(block_row);
    }
    basis_[block_row] = q;
    pos_[q] = block_row;

    if (t <= kDegenTol && ++degenerate_ > kDegenLimit) bland_ = true;
    return kStepped;
  }

  const Problem& p_;
  int n_;
  int m_;
  int total_;
  std::vector<double> lo_, hi_;
  Mat t_;
  Vec xb_;
  Vec cost_;
  std::vector<int> basis_;
  std::vector<int> pos_;
  std::vector<bool> at_upper_;
  bool bland_ = false;
  int degenerate_ = 0;
};

}  // namespace

Solution solve(const Problem& p, const std::vector<double>& lo_override,
               const std::vector<double>& hi_override) {
  if (static_cast<int>(lo_override.size()) != p.num_vars() ||
      static_cast<int>(hi_override.size()) != p.num_vars()) {
    throw Error("lp: bound override size mismatch");
  }
  Simplex s(p, lo_override, hi_override);
  return s.run();
}

Solution solve(const Problem& p) { return solve(p, p.lo, p.hi); }

}  // namespace faircert::lp
