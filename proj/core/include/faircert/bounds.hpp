#pragma once

#include <vector>

#include "faircert/common.hpp"
#include "faircert/network.hpp"

namespace faircert::bounds {

// Per-layer pre-activation bounds over a box of inputs. Sound: for every x
// in the box, forward(net, x).pre[i] lies in [lo[i], hi[i]] elementwise.
struct BoundsCache {
  Vec input_lo;
  Vec input_hi;
  std::vector<Vec> lo;  // one entry per layer, including the output layer
  std::vector<Vec> hi;
  int tighten_fallbacks = 0;  // neurons whose tightening LP failed
};

// Plain interval arithmetic through the layers.
BoundsCache interval_bounds(const NetworkSpec& net, const Vec& box_lo, const Vec& box_hi);

// One tightening pass: for every unstable neuron (lo < 0 < hi) from the
// second layer on, minimize/maximize its pre-activation over the triangle
// relaxation of all preceding ReLUs. Never loosens a bound; an LP failure
// keeps the interval bound for that neuron and bumps tighten_fallbacks.
BoundsCache tighten_bounds(const NetworkSpec& net, const BoundsCache& cache);

BoundsCache compute(const NetworkSpec& net, const Vec& box_lo, const Vec& box_hi,
                    bool tighten);

}  // namespace faircert::bounds
