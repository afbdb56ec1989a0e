#include "faircert/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "faircert/lp.hpp"

namespace faircert::bounds {

BoundsCache interval_bounds(const NetworkSpec& net, const Vec& box_lo, const Vec& box_hi) {
  if (box_lo.size() != net.input_dim() || box_hi.size() != net.input_dim()) {
    throw Error("bounds: box dimension mismatch");
  }
  for (int j = 0; j < box_lo.size(); ++j) {
    if (!std::isfinite(box_lo(j)) || !std::isfinite(box_hi(j)) || box_lo(j) > box_hi(j)) {
      throw Error("bounds: input box must be finite with lo <= hi");
    }
  }
  BoundsCache c;
  c.input_lo = box_lo;
  c.input_hi = box_hi;
  Vec prev_lo = box_lo;
  Vec prev_hi = box_hi;
  for (int i = 0; i < net.depth(); ++i) {
    const Layer& l = net.layers()[i];
    const Mat wp = l.w.cwiseMax(0.0);
    const Mat wm = l.w.cwiseMin(0.0);
    c.lo.push_back(wp * prev_lo + wm * prev_hi + l.b);
    c.hi.push_back(wp * prev_hi + wm * prev_lo + l.b);
    prev_lo = c.lo.back().cwiseMax(0.0);
    prev_hi = c.hi.back().cwiseMax(0.0);
  }
  return c;
}

namespace {

// LP over the triangle relaxation of layers [0, depth): input variables,
// then per layer its pre- and post-activation variables.
struct RelaxationLp {
  lp::Problem problem;
  std::vector<int> input_vars;
  std::vector<std::vector<int>> post_vars;  // per relaxed layer

  RelaxationLp(const NetworkSpec& net, const BoundsCache& cache, int depth) {
    input_vars.reserve(cache.input_lo.size());
    for (int j = 0; j < cache.input_lo.size(); ++j) {
      input_vars.push_back(problem.add_var(cache.input_lo(j), cache.input_hi(j)));
    }
    const std::vector<int>* prev = &input_vars;
    for (int i = 0; i < depth; ++i) {
      const Layer& l = net.layers()[i];
      std::vector<int> z(l.w.rows());
      std::vector<int> zhat(l.w.rows());
      for (int t = 0; t < l.w.rows(); ++t) {
        const double lo = cache.lo[i](t);
        const double hi = cache.hi[i](t);
        z[t] = problem.add_var(lo, hi);
        std::vector<std::pair<int, double>> row{{z[t], 1.0}};
        for (int s = 0; s < l.w.cols(); ++s) {
          if (l.w(t, s) != 0.0) row.push_back({(*prev)[s], -l.w(t, s)});
        }
        problem.add_constraint(std::move(row), lp::Sense::Eq, l.b(t));

        if (hi <= 0.0) {
          zhat[t] = problem.add_var(0.0, 0.0);
        } else if (lo >= 0.0) {
          zhat[t] = problem.add_var(std::max(lo, 0.0), hi);
          problem.add_constraint({{zhat[t], 1.0}, {z[t], -1.0}}, lp::Sense::Eq, 0.0);
        } else {
          zhat[t] = problem.add_var(0.0, hi);
          problem.add_constraint({{zhat[t], 1.0}, {z[t], -1.0}}, lp::Sense::Ge, 0.0);
          // zhat <= hi * (z - lo) / (hi - lo)
          problem.add_constraint({{zhat[t], hi - lo}, {z[t], -hi}}, lp::Sense::Le,
                                 -hi * lo);
        }
      }
      post_vars.push_back(std::move(zhat));
      prev = &post_vars.back();
    }
  }
};

}  // namespace

BoundsCache tighten_bounds(const NetworkSpec& net, const BoundsCache& cache) {
  BoundsCache out = cache;
  out.tighten_fallbacks = 0;
  for (int i = 1; i < net.depth(); ++i) {
    const Layer& l = net.layers()[i];
    // Relaxation of everything before layer i, using already-tightened
    // bounds for those layers.
    RelaxationLp relax(net, out, i);
    const std::vector<int>& prev = relax.post_vars.back();
    for (int t = 0; t < l.w.rows(); ++t) {
      if (!(out.lo[i](t) < 0.0 && out.hi[i](t) > 0.0)) continue;  // stable neuron
      std::vector<std::pair<int, double>> obj;
      for (int s = 0; s < l.w.cols(); ++s) {
        if (l.w(t, s) != 0.0) obj.push_back({prev[s], l.w(t, s)});
      }
      try {
        relax.problem.set_objective(lp::Direction::Minimize, obj);
        const lp::Solution smin = lp::solve(relax.problem);
        relax.problem.set_objective(lp::Direction::Maximize, obj);
        const lp::Solution smax = lp::solve(relax.problem);
        if (smin.status != lp::Status::Optimal || smax.status != lp::Status::Optimal) {
          ++out.tighten_fallbacks;
          continue;
        }
        const double new_lo = std::max(out.lo[i](t), smin.objective + l.b(t));
        const double new_hi = std::min(out.hi[i](t), smax.objective + l.b(t));
        if (new_lo <= new_hi) {
          out.lo[i](t) = new_lo;
          out.hi[i](t) = new_hi;
        }
      } catch (const Error&) {
        ++out.tighten_fallbacks;
      }
    }
  }
  return out;
}

BoundsCache compute(const NetworkSpec& net, const Vec& box_lo, const Vec& box_hi,
                    bool tighten) {
  BoundsCache c = interval_bounds(net, box_lo, box_hi);
  return tighten ? tighten_bounds(net, c) : c;
}

}  // namespace faircert::bounds
