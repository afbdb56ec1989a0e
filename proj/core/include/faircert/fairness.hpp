#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faircert/common.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"

namespace faircert::fairness {

// A point agreeing with the query on every nonsensitive column but
// receiving the opposite decision.
struct Counterexample {
  Vec point;
  double logit = 0.0;
  double probability = 0.0;
  double violation = 0.0;  // |probability - probability(query)|
  std::vector<std::string> sensitive_values;  // decoded, one entry per sensitive feature
};

enum class Verdict { Fair, HasCE, Unknown };

struct VerificationOutcome {
  Verdict verdict = Verdict::Unknown;
  std::optional<Counterexample> ce;
};

struct VerifyOptions {
  std::int64_t time_limit_ms = 60'000;
  bool tighten = true;            // LP bound tightening before encoding
  SpaceMode mode = SpaceMode::Prediction;
};

// Decides whether any counterexample for x exists. Fair is only reported on
// an exhausted search; a solver counterexample is re-validated by a forward
// pass (a failed recheck retries with a 10x flip margin, then gives
// Unknown). Bounds are computed per query over the box with x's
// nonsensitive columns pinned.
VerificationOutcome verify(const NetworkSpec& net, const FeatureSchema& schema,
                           const Vec& x, const VerifyOptions& options = {});

// Among all counterexamples, finds one of maximal probability-space
// violation (the logit is maximized or minimized depending on the flip
// direction, which is equivalent). Defaults to training mode, where numeric
// sensitive features range over continuous boxes.
VerificationOutcome verify_max_violation(
    const NetworkSpec& net, const FeatureSchema& schema, const Vec& x,
    const VerifyOptions& options = {60'000, true, SpaceMode::Training});

struct PredictOptions {
  std::int64_t time_limit_ms = 60'000;
  bool tighten = true;
};

// The guaranteed-fair prediction: 1 iff at least half of the assignments in
// A(x) are decided 1 (exact ties go to 1). Counts opposite-label
// assignments with a no-good-cut solution pool, stopping as soon as the
// majority is settled either way. Throws UndecidedError if the solver times
// out before the majority is known.
int fair_predict(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x,
                 const PredictOptions& options = {});

// Literal majority vote by exhaustive forward passes over A(x); the
// correctness oracle for fair_predict.
int enumerate_predict(const NetworkSpec& net, const FeatureSchema& schema, const Vec& x,
                      std::uint64_t cap = 1'000'000);

// Up to max_solutions counterexamples with pairwise distinct sensitive
// assignments, in discovery order (always prediction mode, which the
// solution-pool cuts require). Candidates failing the forward flip recheck
// are dropped; a timeout returns the partial list.
std::vector<Counterexample> list_ces(const NetworkSpec& net, const FeatureSchema& schema,
                                     const Vec& x, int max_solutions,
                                     const VerifyOptions& options = {});

struct SampleRecord {
  int sample_id = 0;
  int raw_label = 0;
  int fair_label = 0;
  bool has_ce = false;
  bool flipped = false;
  double violation = 0.0;
  double solve_ms = 0.0;
  std::string status;  // fair | ce | unknown | undecided
};

struct FairnessReport {
  double ce_rate = 0.0;        // over decided samples
  double flip_rate = 0.0;      // over decided samples
  double raw_accuracy = 0.0;   // decide vs dataset labels, all samples
  double fair_accuracy = 0.0;  // fair_predict vs labels, decided samples
  double avg_violation = 0.0;  // only meaningful when max_violation was on
  double max_violation = 0.0;
  int unknown_count = 0;
  int decided_count = 0;
  std::vector<SampleRecord> samples;
};

struct AuditOptions {
  std::int64_t time_limit_ms = 60'000;
  bool tighten = true;
  int threads = 1;
  bool max_violation = false;  // use the optimizing verifier to fill `violation`
  bool fair = true;            // compute fair_predict labels (else fair = raw)
};

// Per-sample verification plus fair prediction over a dataset, reduced in
// stable sample order so the report is independent of the thread count.
FairnessReport audit(const NetworkSpec& net, const FeatureSchema& schema,
                     const Dataset& data, const AuditOptions& options = {});

}  // namespace faircert::fairness
