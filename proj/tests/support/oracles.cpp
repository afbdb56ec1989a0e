#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace testsupport {

namespace {

void expand(const FeatureSchema& schema, const std::vector<int>& sens,
            std::size_t pos, Vec& point, std::vector<Vec>& out) {
  if (pos == sens.size()) {
    out.push_back(point);
    return;
  }
  const FeatureSpec& f = schema.features()[sens[pos]];
  const auto r = schema.columns_of(sens[pos]);
  if (f.kind == FeatureKind::Categorical) {
    for (int c = 0; c < r.width; ++c) {
      for (int j = 0; j < r.width; ++j) point(r.offset + j) = j == c ? 1.0 : 0.0;
      expand(schema, sens, pos + 1, point, out);
    }
  } else {
    const double glo = std::ceil(f.lo);
    const double ghi = std::floor(f.hi);
    for (double v = glo; v <= ghi; v += 1.0) {
      point(r.offset) = f.hi == f.lo ? 0.0 : (v - f.lo) / (f.hi - f.lo);
      expand(schema, sens, pos + 1, point, out);
    }
  }
}

}  // namespace

std::vector<Vec> assignment_members(const FeatureSchema& schema, const Vec& x) {
  std::vector<Vec> out;
  Vec point = x;
  expand(schema, schema.sensitive_features(), 0, point, out);
  return out;
}

BruteForce brute_force(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x) {
  BruteForce r;
  const int y0 = decide(net, x);
  const double p0 = predict_probability(net, x);
  for (const Vec& m : assignment_members(schema, x)) {
    const double p = predict_probability(net, m);
    const int y = p >= net.threshold() ? 1 : 0;
    if (y == 1) {
      ++r.ones;
    } else {
      ++r.zeros;
    }
    if (y != y0) r.has_ce = true;
    const double gap = y0 == 0 ? p - p0 : p0 - p;
    r.max_violation = std::max(r.max_violation, gap);
  }
  r.majority = r.ones >= r.zeros ? 1 : 0;
  return r;
}

Gradients numeric_gradient(const NetworkSpec& net, const Vec& x, int y, double h) {
  Gradients g = Gradients::zeros_like(net);
  NetworkSpec probe = net;
  auto loss_at = [&] { return bce_loss(predict_probability(probe, x), y); };
  g.loss = bce_loss(predict_probability(net, x), y);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    Layer& layer = probe.mutable_layers()[l];
    for (int i = 0; i < layer.w.rows(); ++i) {
      for (int j = 0; j < layer.w.cols(); ++j) {
        const double saved = layer.w(i, j);
        layer.w(i, j) = saved + h;
        const double up = loss_at();
        layer.w(i, j) = saved - h;
        const double down = loss_at();
        layer.w(i, j) = saved;
        g.dw[l](i, j) = (up - down) / (2.0 * h);
      }
      const double saved = layer.b(i);
      layer.b(i) = saved + h;
      const double up = loss_at();
      layer.b(i) = saved - h;
      const double down = loss_at();
      layer.b(i) = saved;
      g.db[l](i) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

namespace {

constexpr double kVertexTol = 1e-6;

bool feasible(const lp::Problem& p, const Eigen::VectorXd& x) {
  for (int j = 0; j < p.num_vars(); ++j) {
    if (x(j) < p.lo[j] - kVertexTol || x(j) > p.hi[j] + kVertexTol) return false;
  }
  for (const auto& row : p.rows) {
    double lhs = 0.0;
    for (const auto& [j, c] : row.terms) lhs += c * x(j);
    switch (row.sense) {
      case lp::Sense::Le:
        if (lhs > row.rhs + kVertexTol) return false;
        break;
      case lp::Sense::Ge:
        if (lhs < row.rhs - kVertexTol) return false;
        break;
      case lp::Sense::Eq:
        if (std::abs(lhs - row.rhs) > kVertexTol) return false;
        break;
    }
  }
  return true;
}

}  // namespace

std::optional<double> brute_force_lp(const lp::Problem& p) {
  const int n = p.num_vars();
  struct Plane {
    Eigen::RowVectorXd a;
    double b;
  };
  std::vector<Plane> planes;
  for (const auto& row : p.rows) {
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(n);
    for (const auto& [j, c] : row.terms) a(j) += c;
    planes.push_back({a, row.rhs});
  }
  for (int j = 0; j < n; ++j) {
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(n);
    a(j) = 1.0;
    planes.push_back({a, p.lo[j]});
    planes.push_back({a, p.hi[j]});
  }

  std::optional<double> best;
  std::vector<int> pick(n);
  auto consider = [&](const Eigen::VectorXd& x) {
    if (!feasible(p, x)) return;
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += p.objective[j] * x(j);
    if (!best) {
      best = obj;
    } else if (p.direction == lp::Direction::Maximize) {
      best = std::max(*best, obj);
    } else {
      best = std::min(*best, obj);
    }
  };

  const int total = static_cast<int>(planes.size());
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == n) {
      Eigen::MatrixXd A(n, n);
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) {
        A.row(i) = planes[pick[i]].a;
        b(i) = planes[pick[i]].b;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (lu.rank() < n) return;
      consider(lu.solve(b));
      return;
    }
    for (int i = start; i < total; ++i) {
      pick[depth] = i;
      self(self, i + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace testsupport
