#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "faircert/common.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"

namespace faircert::training {

enum class BatchStrategy { FullBatch, CeBatch };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  double rho = 1.0;  // fraction of each batch searched for counterexamples
  BatchStrategy strategy = BatchStrategy::FullBatch;
  std::uint64_t seed = 0;
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double validation_fraction = 0.2;
  int validation_ce_cap = 200;        // validation points verified per epoch
  std::int64_t ce_time_limit_ms = 10'000;  // per counterexample search
  bool tighten = false;               // LP bound tightening inside searches
  int threads = 1;                    // concurrent searches within a batch
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  double val_ce_rate = 0.0;
  double avg_violation = 0.0;
  double max_violation = 0.0;
  int ce_searches = 0;
  int ce_found = 0;
  int ce_unknown = 0;  // searches that timed out; those samples trained as-is
};

struct SelectionResult {
  int chosen_epoch = 0;  // 1-based
  double distance = 0.0;  // l2 distance to (accuracy 1, ce_rate 0)
  std::vector<EpochRecord> trajectory;
};

// Seeded He-initialized MLP (Xavier scale on the output layer), biases 0.
NetworkSpec init_network(int input_dim, const std::vector<int>& hidden_widths,
                         std::uint64_t seed, double threshold = 0.5);

using EpochCallback = std::function<void(const EpochRecord&, const NetworkSpec&)>;

struct PretrainResult {
  NetworkSpec net;  // weights of the best-validation-loss epoch
  std::vector<EpochRecord> trajectory;
  int best_epoch = 0;
};

// Minibatch Adam on the clamped BCE loss. Deterministic given the seed.
// epochs == 0 returns the initial weights unchanged. With an empty
// validation split the best epoch is chosen by training loss instead.
PretrainResult pretrain(const NetworkSpec& init, const Dataset& data,
                        const TrainConfig& config, const EpochCallback& on_epoch = {});

// One counterexample-guided epoch with fresh optimizer state: per batch, a
// rho-subsample is searched for maximum-violation counterexamples (training
// mode, current weights) and each one is appended with its source sample's
// original label. FullBatch keeps the whole batch plus the
// counterexamples; CeBatch keeps only the producing originals plus their
// counterexamples. The loss averages the original and counterexample terms
// separately.
std::pair<NetworkSpec, EpochRecord> ce_fair_epoch(const NetworkSpec& net,
                                                  const FeatureSchema& schema,
                                                  const Dataset& data,
                                                  const TrainConfig& config);

struct TrainOutcome {
  NetworkSpec net;  // snapshot of the selected epoch
  SelectionResult selection;
};

// Runs `epochs` counterexample-guided epochs and returns the snapshot
// minimizing the l2 distance between (validation accuracy, validation
// ce_rate) and the ideal (1, 0); ties go to the earliest epoch. Validation
// ce_rate and violations come from verifying a fixed subsample of at most
// validation_ce_cap points each epoch.
TrainOutcome ce_fair_train(const NetworkSpec& init, const FeatureSchema& schema,
                           const Dataset& data, const TrainConfig& config,
                           const EpochCallback& on_epoch = {});

// Pretrains with every sensitive column masked to zero (and the matching
// first-layer weight columns zeroed, so the result is constant in the
// sensitive features even on unmasked inputs). Fair by construction.
NetworkSpec train_blind(const NetworkSpec& init, const FeatureSchema& schema,
                        const Dataset& data, const TrainConfig& config);

}  // namespace faircert::training
