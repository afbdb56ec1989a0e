// Microbenchmarks for the solver stack: forward pass, LP solve, MILP
// encoding, single-sample verification, and fair prediction vs exhaustive
// enumeration.

#include <benchmark/benchmark.h>

#include <random>

#include "faircert/bounds.hpp"
#include "faircert/fairness.hpp"
#include "faircert/lp.hpp"
#include "faircert/milp.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"
#include "faircert/training.hpp"

using namespace faircert;

namespace {

// Two nonsensitive reals plus one sensitive categorical and one sensitive
// integer, giving a mid-sized discrete assignment space.
FeatureSchema bench_schema() {
  return FeatureSchema::create(
      {
          {"x0", FeatureKind::Real, {}, 0.0, 1.0, false},
          {"x1", FeatureKind::Real, {}, 0.0, 1.0, false},
          {"group", FeatureKind::Categorical, {"a", "b", "c", "d"}, 0.0, 0.0, true},
          {"age", FeatureKind::Integer, {}, 18.0, 65.0, true},
      },
      "label");
}

NetworkSpec bench_net(const FeatureSchema& schema, std::uint64_t seed) {
  return training::init_network(schema.input_dim(), {12, 8}, seed);
}

Vec bench_point(const FeatureSchema& schema, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x = Vec::Zero(schema.input_dim());
  x(0) = u(rng);
  x(1) = u(rng);
  x(2) = 1.0;  // group = a
  x(schema.input_dim() - 1) = 0.5;
  return x;
}

void bm_forward(benchmark::State& state) {
  const FeatureSchema schema = bench_schema();
  const NetworkSpec net = bench_net(schema, 1);
  const Vec x = bench_point(schema, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_probability(net, x));
  }
}
BENCHMARK(bm_forward);

void bm_lp_solve(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  lp::Problem p;
  const int n = 20;
  for (int i = 0; i < n; ++i) p.add_var(0.0, 1.0);
  std::vector<std::pair<int, double>> obj;
  for (int i = 0; i < n; ++i) obj.push_back({i, u(rng)});
  p.set_objective(lp::Direction::Maximize, obj);
  for (int r = 0; r < 12; ++r) {
    std::vector<std::pair<int, double>> terms;
    for (int i = 0; i < n; ++i) terms.push_back({i, u(rng)});
    p.add_constraint(terms, lp::Sense::Le, 2.0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(lp::solve(p));
  }
}
BENCHMARK(bm_lp_solve);

void bm_encode(benchmark::State& state) {
  const FeatureSchema schema = bench_schema();
  const NetworkSpec net = bench_net(schema, 4);
  const bounds::BoundsCache cache =
      bounds::compute(net, schema.lower(), schema.upper(), false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        milp::encode_network(net, cache, schema, SpaceMode::Prediction));
  }
}
BENCHMARK(bm_encode);

void bm_verify(benchmark::State& state) {
  const FeatureSchema schema = bench_schema();
  const NetworkSpec net = bench_net(schema, 5);
  const Vec x = bench_point(schema, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fairness::verify(net, schema, x));
  }
}
BENCHMARK(bm_verify);

void bm_fair_predict(benchmark::State& state) {
  const FeatureSchema schema = bench_schema();
  const NetworkSpec net = bench_net(schema, 5);
  const Vec x = bench_point(schema, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fairness::fair_predict(net, schema, x));
  }
}
BENCHMARK(bm_fair_predict);

void bm_enumerate_predict(benchmark::State& state) {
  const FeatureSchema schema = bench_schema();
  const NetworkSpec net = bench_net(schema, 5);
  const Vec x = bench_point(schema, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fairness::enumerate_predict(net, schema, x));
  }
}
BENCHMARK(bm_enumerate_predict);

}  // namespace

BENCHMARK_MAIN();
