#pragma once

// Seeded random nets, schemas and points shared by the unit and acceptance
// tests. Everything is driven by a caller-owned mt19937_64 so trials are
// reproducible.

#include <cstdint>
#include <random>
#include <vector>

#include "faircert/network.hpp"
#include "faircert/schema.hpp"

namespace testsupport {

using namespace faircert;

// Dense ReLU net with uniform(-scale, scale) weights and biases.
NetworkSpec random_net(std::mt19937_64& rng, int input_dim,
                       const std::vector<int>& hidden, double scale = 1.0,
                       double threshold = 0.5);

// Schema with 1-3 nonsensitive real features and 1-3 sensitive features
// (categorical, integer or unit-grid real) whose prediction-mode assignment
// space has at most max_space members.
FeatureSchema random_discrete_schema(std::mt19937_64& rng, std::uint64_t max_space);

// A random encoded point: one-hot categoricals, grid-valued integers,
// uniform reals.
Vec random_point(std::mt19937_64& rng, const FeatureSchema& schema);

}  // namespace testsupport
