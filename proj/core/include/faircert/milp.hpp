#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faircert/bounds.hpp"
#include "faircert/lp.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"

namespace faircert::milp {

enum class VarKind { Continuous, Binary, Integer };

// Mixed-integer encoding of a ReLU network over a schema's input box:
// the layer recurrence as equality rows and, per unstable neuron, a binary
// indicator with the big-M constraints built from the bounds cache. In
// prediction mode the sensitive columns additionally carry one-hot / grid
// integrality; in training mode numeric sensitive columns stay continuous.
struct Model {
  lp::Problem lp;               // continuous relaxation; integrality tracked in `kind`
  std::vector<VarKind> kind;    // per variable
  std::vector<std::string> name;
  int input_dim = 0;            // variables [0, input_dim) are the input columns
  int output_var = -1;          // the output logit variable
  double logit_threshold = 0.0;

  // Binary variables encoding the sensitive assignment (one-hot columns and
  // integer-grid indicators); the domain of no-good cuts.
  std::vector<int> sensitive_binaries;
  // False when some sensitive feature required a general integer variable
  // (grid larger than 64); no-good cuts are unavailable then.
  bool cuts_supported = true;

  std::vector<std::vector<int>> z;      // per layer pre-activation variables
  std::vector<std::vector<int>> zhat;   // per hidden layer post-activation variables
  std::vector<std::vector<int>> delta;  // per hidden layer indicators, -1 when fixed
};

Model encode_network(const NetworkSpec& net, const bounds::BoundsCache& cache,
                     const FeatureSchema& schema, SpaceMode mode);

// Pins every input column to x (used by encoding tests and oracles).
void fix_inputs(Model& m, const Vec& x);

// Counterexample constraints for a query x with decide(net, x) == label:
// equality on the nonsensitive prefix, plus the flipped-decision row
// (label 1: z_n <= logit_threshold - eps; label 0: z_n >= logit_threshold).
// `margin` widens the strip around the threshold that is excluded on both
// sides; verification retries use it when a solver counterexample fails the
// forward recheck.
void add_fairness_ce_constraints(Model& m, const FeatureSchema& schema, const Vec& x,
                                 int label, double eps = 1e-6, double margin = 0.0);

// Excludes one previous assignment of the sensitive binaries: the next
// solution must differ in at least one entry. `prev` holds the values of
// m.sensitive_binaries in the excluded solution and must be 0/1 within 1e-6.
void add_no_good_cut(Model& m, const std::vector<double>& prev);

// Deterministic LP-format text dump (debugging aid).
std::string dump(const Model& m);

enum class BnbMode { Feasibility, Optimize, Pool };
enum class BnbStatus { Infeasible, Feasible, Optimal, Pool, Timeout };

struct BnbLimits {
  std::int64_t time_limit_ms = 60'000;  // <= 0: unlimited
  std::int64_t node_limit = -1;         // < 0: unlimited
};

struct BnbSolution {
  std::vector<double> x;  // all structural variables, integral entries snapped
  double objective = 0.0;
};

struct BnbResult {
  BnbStatus status = BnbStatus::Infeasible;
  std::optional<BnbSolution> best;  // Feasible / Optimal (and Timeout incumbent)
  std::vector<BnbSolution> pool;    // Pool mode, also partial on Timeout
  bool exhausted = false;           // Pool: fewer than `pool_cap` solutions exist
  std::int64_t nodes = 0;
};

// Deterministic branch and bound over the model's binary/integer variables:
// best-bound node selection with FIFO tie-break, branching on the most
// fractional binary (ties to the lowest index, 0-branch explored first).
// Pool mode repeats feasibility solves, excluding each solution with a
// no-good cut, until `pool_cap` solutions are found or the model is
// exhausted. Timeout is reported distinctly from Infeasible and carries
// whatever was found so far.
BnbResult bnb_solve(const Model& m, BnbMode mode, int pool_cap = 0,
                    const BnbLimits& limits = {});

}  // namespace faircert::milp
