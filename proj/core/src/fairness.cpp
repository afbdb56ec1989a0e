#include "faircert/fairness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "faircert/bounds.hpp"
#include "faircert/milp.hpp"

namespace faircert::fairness {

namespace {

using Clock = std::chrono::steady_clock;

// Query box: nonsensitive columns pinned to x, sensitive columns free.
void restricted_box(const FeatureSchema& schema, const Vec& x, Vec& lo, Vec& hi) {
  lo = x;
  hi = x;
  for (int c : schema.sensitive_columns()) {
    lo(c) = 0.0;
    hi(c) = 1.0;
  }
}

milp::Model build_ce_model(const NetworkSpec& net, const FeatureSchema& schema,
                           const Vec& x, int label, const VerifyOptions& options,
                           double margin) {
  Vec lo, hi;
  restricted_box(schema, x, lo, hi);
  const bounds::BoundsCache cache = bounds::compute(net, lo, hi, options.tighten);
  milp::Model m = milp::encode_network(net, cache, schema, options.mode);
  milp::add_fairness_ce_constraints(m, schema, x, label, 1e-6, margin);
  return m;
}

// Replaces x's sensitive columns with the solver's, snapping one-hot
// columns to exact 0/1 and, in prediction mode, numeric columns to their
// integer grid. The nonsensitive prefix is x's, bit for bit.
Vec solution_point(const FeatureSchema& schema, const Vec& x, SpaceMode mode,
                   const std::vector<double>& solution) {
  Vec p = x;
  for (int f : schema.sensitive_features()) {
    const FeatureSpec& spec = schema.features()[f];
    const FeatureSchema::ColumnRange r = schema.columns_of(f);
    if (spec.kind == FeatureKind::Categorical) {
      int best = 0;
      for (int c = 1; c < r.width; ++c) {
        if (solution[r.offset + c] > solution[r.offset + best]) best = c;
      }
      for (int c = 0; c < r.width; ++c) p(r.offset + c) = c == best ? 1.0 : 0.0;
    } else {
      double v = std::clamp(solution[r.offset], 0.0, 1.0);
      if (mode == SpaceMode::Prediction) {
        const double raw = spec.lo + v * (spec.hi - spec.lo);
        const double snapped =
            std::clamp(std::round(raw), std::ceil(spec.lo), std::floor(spec.hi));
        v = spec.hi == spec.lo ? 0.0 : (snapped - spec.lo) / (spec.hi - spec.lo);
      }
      p(r.offset) = v;
    }
  }
  return p;
}

Counterexample make_counterexample(const NetworkSpec& net, const FeatureSchema& schema,
                                   const Vec& point, double query_probability) {
  Counterexample ce;
  ce.point = point;
  ce.logit = forward(net, point).logit();
  ce.probability = sigmoid(ce.logit);
  ce.violation = std::abs(ce.probability - query_probability);
  const std::vector<std::string> raw = schema.decode_point(point);
  for (int f : schema.sensitive_features()) ce.sensitive_values.push_back(raw[f]);
  return ce;
}

VerificationOutcome search_ce(const NetworkSpec& net, const FeatureSchema& schema,
                              const Vec& x, const VerifyOptions& options, bool maximize) {
  const ForwardTrace trace = forward(net, x);
  const int y0 = trace.logit() >= net.logit_threshold() ? 1 : 0;
  const double p0 = trace.probability();
  const auto deadline = Clock::now() + std::chrono::milliseconds(
                                           options.time_limit_ms > 0
                                               ? options.time_limit_ms
                                               : std::numeric_limits<std::int64_t>::max() / 4);

  // One solve at the stated flip margin; a counterexample that fails the
  // forward recheck triggers one retry at a 10x margin.
  for (const double margin : {0.0, 1e-5}) {
    milp::Model m = build_ce_model(net, schema, x, y0, options, margin);
    if (maximize) {
      m.lp.set_objective(y0 == 0 ? lp::Direction::Maximize : lp::Direction::Minimize,
                         {{m.output_var, 1.0}});
    }
    milp::BnbLimits limits;
    limits.time_limit_ms = std::max<std::int64_t>(
        1, std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now())
               .count());
    const milp::BnbResult r =
        milp::bnb_solve(m, maximize ? milp::BnbMode::Optimize : milp::BnbMode::Feasibility,
                        0, limits);
    if (r.status == milp::BnbStatus::Timeout) return {Verdict::Unknown, std::nullopt};
    if (r.status == milp::BnbStatus::Infeasible) {
      // A margin strip was carved out of the feasible set on retry, so
      // exhaustion no longer proves fairness.
      if (margin > 0.0) return {Verdict::Unknown, std::nullopt};
      return {Verdict::Fair, std::nullopt};
    }
    const Vec point = solution_point(schema, x, options.mode, r.best->x);
    Counterexample ce = make_counterexample(net, schema, point, p0);
    const int y1 = ce.logit >= net.logit_threshold() ? 1 : 0;
    if (y1 != y0) return {Verdict::HasCE, std::move(ce)};
  }
  return {Verdict::Unknown, std::nullopt};
}

}  // namespace

VerificationOutcome verify(const NetworkSpec& net, const FeatureSchema& schema,
                           const Vec& x, const VerifyOptions& options) {
  return search_ce(net, schema, x, options, false);
}

VerificationOutcome verify_max_violation(const NetworkSpec& net,
                                         const FeatureSchema& schema, const Vec& x,
                                         const VerifyOptions& options) {
  return search_ce(net, schema, x, options, true);
}

int fair_predict(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x,
                 const PredictOptions& options) {
  const int y0 = decide(net, x);
  const AssignmentSpace space = AssignmentSpace::create(schema, SpaceMode::Prediction);
  const std::uint64_t a = space.size();
  // Opposite-label assignments needed to settle the majority. The
  // asymmetry implements the tie rule: an exact tie keeps/produces label 1.
  const std::uint64_t t = y0 == 1 ? a / 2 + 1 : (a + 1) / 2;
  if (t > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw Error("fair_predict: assignment space too large to count");
  }

  VerifyOptions vo;
  vo.time_limit_ms = options.time_limit_ms;
  vo.tighten = options.tighten;
  vo.mode = SpaceMode::Prediction;
  milp::Model m = build_ce_model(net, schema, x, y0, vo, 0.0);
  milp::BnbLimits limits;
  limits.time_limit_ms = options.time_limit_ms;
  const milp::BnbResult r =
      milp::bnb_solve(m, milp::BnbMode::Pool, static_cast<int>(t), limits);
  if (r.status == milp::BnbStatus::Timeout) {
    throw UndecidedError("fair_predict: undecided within the time limit");
  }
  const bool flip = r.pool.size() >= t;
  return flip ? 1 - y0 : y0;
}

int enumerate_predict(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x,
                      std::uint64_t cap) {
  const AssignmentSpace space = AssignmentSpace::create(schema, SpaceMode::Prediction);
  const std::uint64_t a = space.size();
  if (a > cap) {
    throw Error("enumerate_predict: |A(x)| = " + std::to_string(a) + " exceeds cap " +
                std::to_string(cap));
  }
  // Buffers reused across the whole sweep; only sensitive columns change.
  Vec point = x;
  std::vector<Vec> buf;
  for (const Layer& l : net.layers()) buf.emplace_back(l.w.rows());
  const double thr = net.logit_threshold();
  std::uint64_t ones = 0;
  for (std::uint64_t j = 0; j < a; ++j) {
    point = space.assign(x, j);
    const Vec* in = &point;
    for (int i = 0; i < net.depth(); ++i) {
      buf[i].noalias() = net.layers()[i].w * (*in) + net.layers()[i].b;
      if (i + 1 < net.depth()) {
        buf[i] = buf[i].cwiseMax(0.0);
        in = &buf[i];
      }
    }
    if (buf.back()(0) >= thr) ++ones;
  }
  return 2 * ones >= a ? 1 : 0;
}

std::vector<Counterexample> list_ces(const NetworkSpec& net, const FeatureSchema& schema,
                                     const Vec& x, int max_solutions,
                                     const VerifyOptions& options) {
  if (max_solutions < 1) throw Error("list_ces: max_solutions must be >= 1");
  const ForwardTrace trace = forward(net, x);
  const int y0 = trace.logit() >= net.logit_threshold() ? 1 : 0;
  VerifyOptions vo = options;
  vo.mode = SpaceMode::Prediction;
  milp::Model m = build_ce_model(net, schema, x, y0, vo, 0.0);
  milp::BnbLimits limits;
  limits.time_limit_ms = options.time_limit_ms;
  const milp::BnbResult r = milp::bnb_solve(m, milp::BnbMode::Pool, max_solutions, limits);
  std::vector<Counterexample> out;
  for (const milp::BnbSolution& s : r.pool) {
    const Vec point = solution_point(schema, x, SpaceMode::Prediction, s.x);
    Counterexample ce = make_counterexample(net, schema, point, trace.probability());
    if ((ce.logit >= net.logit_threshold() ? 1 : 0) != y0) out.push_back(std::move(ce));
  }
  return out;
}

FairnessReport audit(const NetworkSpec& net, const FeatureSchema& schema,
                     const Dataset& data, const AuditOptions& options) {
  FairnessReport report;
  report.samples.resize(data.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= data.size()) return;
      SampleRecord& rec = report.samples[i];
      rec.sample_id = static_cast<int>(i);
      try {
        const auto t0 = Clock::now();
        const Vec& x = data.points[i];
        rec.raw_label = decide(net, x);

        VerifyOptions vo;
        vo.time_limit_ms = options.time_limit_ms;
        vo.tighten = options.tighten;
        vo.mode = SpaceMode::Prediction;
        const VerificationOutcome outcome =
            options.max_violation ? verify_max_violation(net, schema, x, vo)
                                  : verify(net, schema, x, vo);

        rec.fair_label = rec.raw_label;
        if (outcome.verdict == Verdict::Unknown) {
          rec.status = "unknown";
        } else if (outcome.verdict == Verdict::Fair) {
          rec.status = "fair";
        } else {
          rec.status = "ce";
          rec.has_ce = true;
          rec.violation = outcome.ce->violation;
          if (options.fair) {
            PredictOptions po;
            po.time_limit_ms = options.time_limit_ms;
            po.tighten = options.tighten;
            rec.fair_label = fair_predict(net, schema, x, po);
            rec.flipped = rec.fair_label != rec.raw_label;
          }
        }
        rec.solve_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      } catch (const UndecidedError&) {
        rec.status = "undecided";
        rec.fair_label = rec.raw_label;
        rec.flipped = false;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  int decided = 0, ces = 0, flips = 0, raw_ok = 0, fair_ok = 0;
  double vsum = 0.0;
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const SampleRecord& rec = report.samples[i];
    if (rec.raw_label == data.labels[i]) ++raw_ok;
    if (rec.status == "unknown" || rec.status == "undecided") {
      ++report.unknown_count;
      continue;
    }
    ++decided;
    if (rec.has_ce) ++ces;
    if (rec.flipped) ++flips;
    if (rec.fair_label == data.labels[i]) ++fair_ok;
    vsum += rec.violation;
    report.max_violation = std::max(report.max_violation, rec.violation);
  }
  report.decided_count = decided;
  if (!report.samples.empty()) {
    report.raw_accuracy = static_cast<double>(raw_ok) / report.samples.size();
  }
  if (decided > 0) {
    report.ce_rate = static_cast<double>(ces) / decided;
    report.flip_rate = static_cast<double>(flips) / decided;
    report.fair_accuracy = static_cast<double>(fair_ok) / decided;
    report.avg_violation = vsum / decided;
  }
  return report;
}

}  // namespace faircert::fairness
