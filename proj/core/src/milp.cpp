#include "faircert/milp.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace faircert::milp {

namespace {

constexpr double kBigMInflate = 1e-7;
constexpr double kIntTol = 1e-6;
constexpr double kPruneTol = 1e-9;
constexpr int kMaxIndicatorGrid = 64;

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

int add_var(Model& m, double lo, double hi, VarKind kind, std::string name) {
  const int v = m.lp.add_var(lo, hi);
  m.kind.push_back(kind);
  m.name.push_back(std::move(name));
  return v;
}

}  // namespace

Model encode_network(const NetworkSpec& net, const bounds::BoundsCache& cache,
                     const FeatureSchema& schema, SpaceMode mode) {
  if (net.input_dim() != schema.input_dim()) {
    throw Error("milp: network input width does not match schema");
  }
  if (cache.input_lo.size() != net.input_dim() ||
      static_cast<int>(cache.lo.size()) != net.depth()) {
    throw Error("milp: bounds cache does not match network");
  }
  for (int i = 0; i < net.depth(); ++i) {
    if (!cache.lo[i].allFinite() || !cache.hi[i].allFinite()) {
      throw Error("milp: non-finite neuron bound in layer " + std::to_string(i + 1));
    }
  }

  Model m;
  m.input_dim = schema.input_dim();
  m.logit_threshold = net.logit_threshold();

  std::vector<int> inputs;
  inputs.reserve(m.input_dim);
  for (int j = 0; j < m.input_dim; ++j) {
    inputs.push_back(add_var(m, cache.input_lo(j), cache.input_hi(j), VarKind::Continuous,
                             "x_" + std::to_string(j)));
  }

  for (int f : schema.sensitive_features()) {
    const FeatureSpec& spec = schema.features()[f];
    const FeatureSchema::ColumnRange r = schema.columns_of(f);
    if (spec.kind == FeatureKind::Categorical) {
      std::vector<std::pair<int, double>> sum;
      for (int c = 0; c < r.width; ++c) {
        const int col = inputs[r.offset + c];
        m.kind[col] = VarKind::Binary;
        m.sensitive_binaries.push_back(col);
        sum.push_back({col, 1.0});
      }
      m.lp.add_constraint(std::move(sum), lp::Sense::Eq, 1.0);
    } else if (mode == SpaceMode::Prediction) {
      const double glo = std::ceil(spec.lo);
      const double ghi = std::floor(spec.hi);
      if (glo > ghi) {
        throw Error("milp: feature '" + spec.name + "' has no integer grid points");
      }
      const int g = static_cast<int>(ghi - glo + 1);
      const int col = inputs[r.offset];
      if (g <= kMaxIndicatorGrid) {
        std::vector<std::pair<int, double>> sum;
        std::vector<std::pair<int, double>> tie{{col, 1.0}};
        for (int t = 0; t < g; ++t) {
          const int ind = add_var(m, 0.0, 1.0, VarKind::Binary,
                                  "s_" + std::to_string(f) + "_" + std::to_string(t));
          m.sensitive_binaries.push_back(ind);
          sum.push_back({ind, 1.0});
          const double scaled =
              spec.hi == spec.lo ? 0.0 : (glo + t - spec.lo) / (spec.hi - spec.lo);
          if (scaled != 0.0) tie.push_back({ind, -scaled});
        }
        m.lp.add_constraint(std::move(sum), lp::Sense::Eq, 1.0);
        m.lp.add_constraint(std::move(tie), lp::Sense::Eq, 0.0);
      } else {
        const int raw = add_var(m, glo, ghi, VarKind::Integer, "g_" + std::to_string(f));
        m.lp.add_constraint({{col, spec.hi - spec.lo}, {raw, -1.0}}, lp::Sense::Eq,
                            -spec.lo);
        m.cuts_supported = false;
      }
    }
    // Training mode numeric sensitive columns stay continuous.
  }

  const std::vector<int>* prev = &inputs;
  for (int i = 0; i < net.depth(); ++i) {
    const Layer& layer = net.layers()[i];
    const bool hidden = i + 1 < net.depth();
    std::vector<int> z(layer.w.rows());
    std::vector<int> zhat(hidden ? layer.w.rows() : 0);
    std::vector<int> delta(hidden ? layer.w.rows() : 0, -1);
    const std::string li = std::to_string(i + 1);
    for (int t = 0; t < layer.w.rows(); ++t) {
      const double lo = cache.lo[i](t);
      const double hi = cache.hi[i](t);
      const double lo_m = lo - kBigMInflate;
      const double hi_m = hi + kBigMInflate;
      const std::string ti = std::to_string(t);
      z[t] = add_var(m, lo_m, hi_m, VarKind::Continuous, "z_" + li + "_" + ti);
      std::vector<std::pair<int, double>> row{{z[t], 1.0}};
      for (int s = 0; s < layer.w.cols(); ++s) {
        if (layer.w(t, s) != 0.0) row.push_back({(*prev)[s], -layer.w(t, s)});
      }
      m.lp.add_constraint(std::move(row), lp::Sense::Eq, layer.b(t));
      if (!hidden) continue;

      if (hi <= 0.0) {
        // Never active: relu output pinned to zero.
        zhat[t] = add_var(m, 0.0, 0.0, VarKind::Continuous, "zhat_" + li + "_" + ti);
      } else if (lo >= 0.0) {
        // Always active: relu is the identity.
        zhat[t] = add_var(m, 0.0, hi_m, VarKind::Continuous, "zhat_" + li + "_" + ti);
        m.lp.add_constraint({{zhat[t], 1.0}, {z[t], -1.0}}, lp::Sense::Eq, 0.0);
      } else {
        zhat[t] = add_var(m, 0.0, hi_m, VarKind::Continuous, "zhat_" + li + "_" + ti);
        delta[t] = add_var(m, 0.0, 1.0, VarKind::Binary, "delta_" + li + "_" + ti);
        m.lp.add_constraint({{zhat[t], 1.0}, {delta[t], -hi_m}}, lp::Sense::Le, 0.0);
        m.lp.add_constraint({{zhat[t], 1.0}, {z[t], -1.0}}, lp::Sense::Ge, 0.0);
        // zhat <= z - lo * (1 - delta)
        m.lp.add_constraint({{zhat[t], 1.0}, {z[t], -1.0}, {delta[t], -lo_m}},
                            lp::Sense::Le, -lo_m);
      }
    }
    m.z.push_back(std::move(z));
    if (hidden) {
      m.zhat.push_back(std::move(zhat));
      m.delta.push_back(std::move(delta));
      prev = &m.zhat.back();
    }
  }
  m.output_var = m.z.back()[0];
  return m;
}

void fix_inputs(Model& m, const Vec& x) {
  if (x.size() != m.input_dim) throw Error("milp: fix_inputs dimension mismatch");
  for (int j = 0; j < m.input_dim; ++j) {
    m.lp.lo[j] = x(j);
    m.lp.hi[j] = x(j);
  }
}

void add_fairness_ce_constraints(Model& m, const FeatureSchema& schema, const Vec& x,
                                 int label, double eps, double margin) {
  if (x.size() != m.input_dim || schema.input_dim() != m.input_dim) {
    throw Error("milp: fairness constraint dimension mismatch");
  }
  // Equality on the nonsensitive prefix: pin those columns to x.
  for (int j = 0; j < schema.nonsensitive_dim(); ++j) {
    m.lp.lo[j] = x(j);
    m.lp.hi[j] = x(j);
  }
  if (label == 1) {
    m.lp.add_constraint({{m.output_var, 1.0}}, lp::Sense::Le,
                        m.logit_threshold - eps - margin);
  } else {
    m.lp.add_constraint({{m.output_var, 1.0}}, lp::Sense::Ge, m.logit_threshold + margin);
  }
}

void add_no_good_cut(Model& m, const std::vector<double>& prev) {
  if (prev.size() != m.sensitive_binaries.size()) {
    throw Error("milp: no-good cut length mismatch");
  }
  std::vector<std::pair<int, double>> terms;
  double rhs = 1.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    const double v = prev[i];
    if (std::abs(v - std::round(v)) > kIntTol || (std::round(v) != 0.0 && std::round(v) != 1.0)) {
      throw Error("milp: no-good cut over fractional binary entry");
    }
    if (std::round(v) == 1.0) {
      terms.push_back({m.sensitive_binaries[i], -1.0});
      rhs -= 1.0;
    } else {
      terms.push_back({m.sensitive_binaries[i], 1.0});
    }
  }
  m.lp.add_constraint(std::move(terms), lp::Sense::Ge, rhs);
}

std::string dump(const Model& m) {
  std::ostringstream out;
  bool any_obj = false;
  for (double c : m.lp.objective) any_obj = any_obj || c != 0.0;
  out << (m.lp.direction == lp::Direction::Maximize ? "maximize" : "minimize") << '\n';
  out << "  obj:";
  if (any_obj) {
    for (int j = 0; j < m.lp.num_vars(); ++j) {
      if (m.lp.objective[j] != 0.0) out << ' ' << num(m.lp.objective[j]) << ' ' << m.name[j];
    }
  } else {
    out << " 0";
  }
  out << "\nsubject to\n";
  for (int i = 0; i < m.lp.num_rows(); ++i) {
    const lp::Constraint& row = m.lp.rows[i];
    out << "  c" << i << ":";
    for (const auto& [v, c] : row.terms) out << ' ' << num(c) << ' ' << m.name[v];
    out << (row.sense == lp::Sense::Le ? " <= " : row.sense == lp::Sense::Ge ? " >= " : " = ")
        << num(row.rhs) << '\n';
  }
  out << "bounds\n";
  for (int j = 0; j < m.lp.num_vars(); ++j) {
    out << "  " << num(m.lp.lo[j]) << " <= " << m.name[j] << " <= " << num(m.lp.hi[j])
        << '\n';
  }
  out << "binary\n ";
  for (int j = 0; j < m.lp.num_vars(); ++j) {
    if (m.kind[j] == VarKind::Binary) out << ' ' << m.name[j];
  }
  out << "\ngeneral\n ";
  for (int j = 0; j < m.lp.num_vars(); ++j) {
    if (m.kind[j] == VarKind::Integer) out << ' ' << m.name[j];
  }
  out << '\n';
  return out.str();
}

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  std::vector<double> ilo;  // bounds of the integral variables only
  std::vector<double> ihi;
  double bound = 0.0;  // parent relaxation value, in "higher is better" scale
  std::int64_t seq = 0;
};

struct NodeWorse {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.seq > b.seq;  // FIFO among equal bounds
  }
};

class Tree {
public:
  Tree(const Model& m, bool optimize, const std::optional<Clock::time_point>& deadline,
       std::int64_t node_limit)
      : m_(m), optimize_(optimize), deadline_(deadline), node_limit_(node_limit) {
    for (int j = 0; j < m.lp.num_vars(); ++j) {
      if (m.kind[j] != VarKind::Continuous) ivars_.push_back(j);
    }
    sign_ = m.lp.direction == lp::Direction::Maximize ? 1.0 : -1.0;
  }

  BnbStatus run() {
    Node root;
    root.ilo.reserve(ivars_.size());
    root.ihi.reserve(ivars_.size());
    for (int j : ivars_) {
      root.ilo.push_back(m_.lp.lo[j]);
      root.ihi.push_back(m_.lp.hi[j]);
    }
    root.bound = std::numeric_limits<double>::infinity();
    root.seq = seq_++;
    queue_.push(std::move(root));

    std::vector<double> lo(m_.lp.lo.size());
    std::vector<double> hi(m_.lp.hi.size());
    while (!queue_.empty()) {
      if (deadline_ && Clock::now() > *deadline_) return BnbStatus::Timeout;
      if (node_limit_ >= 0 && nodes >= node_limit_) return BnbStatus::Timeout;
      Node node = queue_.top();
      queue_.pop();
      if (incumbent_ && node.bound <= incumbent_score_ + kPruneTol) {
        // Best-bound order: nothing left can beat the incumbent.
        break;
      }
      ++nodes;

      lo = m_.lp.lo;
      hi = m_.lp.hi;
      for (std::size_t i = 0; i < ivars_.size(); ++i) {
        lo[ivars_[i]] = node.ilo[i];
        hi[ivars_[i]] = node.ihi[i];
      }
      const lp::Solution sol = lp::solve(m_.lp, lo, hi);
      if (sol.status != lp::Status::Optimal) continue;
      const double score = sign_ * sol.objective;
      if (incumbent_ && score <= incumbent_score_ + kPruneTol) continue;

      const int branch = pick_branch_var(sol.x);
      if (branch < 0) {
        BnbSolution cand;
        cand.x = sol.x;
        for (int j : ivars_) cand.x[j] = std::round(cand.x[j]);
        cand.objective = sol.objective;
        if (!optimize_) {
          incumbent_ = std::move(cand);
          return BnbStatus::Feasible;
        }
        if (!incumbent_ || score > incumbent_score_) {
          incumbent_ = std::move(cand);
          incumbent_score_ = score;
        }
        continue;
      }

      const double v = sol.x[ivars_[branch]];
      Node down = node;
      Node up = std::move(node);
      down.ihi[branch] = std::floor(v);
      up.ilo[branch] = std::floor(v) + 1.0;
      if (m_.kind[ivars_[branch]] == VarKind::Binary) {
        down.ihi[branch] = 0.0;
        up.ilo[branch] = 1.0;
      }
      down.bound = up.bound = score;
      down.seq = seq_++;
      up.seq = seq_++;
      if (down.ilo[branch] <= down.ihi[branch]) queue_.push(std::move(down));
      if (up.ilo[branch] <= up.ihi[branch]) queue_.push(std::move(up));
    }
    if (incumbent_) return BnbStatus::Optimal;
    return BnbStatus::Infeasible;
  }

  std::optional<BnbSolution> incumbent() { return incumbent_; }
  std::int64_t nodes = 0;

private:
  // Most fractional binary (distance to 0.5), ties to the lowest variable
  // index; general integers only when every binary is integral.
  int pick_branch_var(const std::vector<double>& x) const {
    int best = -1;
    double best_dist = 0.5;
    for (std::size_t i = 0; i < ivars_.size(); ++i) {
      if (m_.kind[ivars_[i]] != VarKind::Binary) continue;
      const double v = x[ivars_[i]];
      if (std::abs(v - std::round(v)) <= kIntTol) continue;
      const double dist = std::abs(v - 0.5);
      if (dist < best_dist - 1e-12) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) return best;
    for (std::size_t i = 0; i < ivars_.size(); ++i) {
      if (m_.kind[ivars_[i]] != VarKind::Integer) continue;
      const double v = x[ivars_[i]];
      const double frac = v - std::floor(v);
      if (std::min(frac, 1.0 - frac) <= kIntTol) continue;
      const double dist = std::abs(frac - 0.5);
      if (best < 0 || dist < best_dist - 1e-12) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  const Model& m_;
  bool optimize_;
  std::optional<Clock::time_point> deadline_;
  std::int64_t node_limit_;
  std::vector<int> ivars_;
  double sign_ = 1.0;
  std::priority_queue<Node, std::vector<Node>, NodeWorse> queue_;
  std::optional<BnbSolution> incumbent_;
  double incumbent_score_ = -std::numeric_limits<double>::infinity();
  std::int64_t seq_ = 0;
};

}  // namespace

BnbResult bnb_solve(const Model& m, BnbMode mode, int pool_cap, const BnbLimits& limits) {
  std::optional<Clock::time_point> deadline;
  if (limits.time_limit_ms > 0) {
    deadline = Clock::now() + std::chrono::milliseconds(limits.time_limit_ms);
  }

  BnbResult result;
  if (mode != BnbMode::Pool) {
    Tree tree(m, mode == BnbMode::Optimize, deadline, limits.node_limit);
    result.status = tree.run();
    result.best = tree.incumbent();
    result.nodes = tree.nodes;
    return result;
  }

  if (!m.cuts_supported) {
    throw Error(
        "milp: pool mode needs binary sensitive encodings; an integer grid above 64 "
        "values has none");
  }
  if (pool_cap < 1) throw Error("milp: pool cap must be >= 1");

  Model work = m;
  while (static_cast<int>(result.pool.size()) < pool_cap) {
    Tree tree(work, false, deadline, limits.node_limit);
    const BnbStatus status = tree.run();
    result.nodes += tree.nodes;
    if (status == BnbStatus::Timeout) {
      result.status = BnbStatus::Timeout;
      return result;
    }
    if (status == BnbStatus::Infeasible) {
      result.exhausted = true;
      break;
    }
    BnbSolution sol = *tree.incumbent();
    std::vector<double> assignment;
    assignment.reserve(work.sensitive_binaries.size());
    for (int v : work.sensitive_binaries) assignment.push_back(sol.x[v]);
    result.pool.push_back(std::move(sol));
    add_no_good_cut(work, assignment);
  }
  result.status = BnbStatus::Pool;
  return result;
}

}  // namespace faircert::milp
