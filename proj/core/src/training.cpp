#include "faircert/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <thread>
#include <utility>

#include "faircert/fairness.hpp"

namespace faircert::training {

namespace {

struct AdamState {
  std::vector<Mat> mw, vw;
  std::vector<Vec> mb, vb;
  long step_count = 0;

  explicit AdamState(const NetworkSpec& net) {
    for (const Layer& l : net.layers()) {
      mw.push_back(Mat::Zero(l.w.rows(), l.w.cols()));
      vw.push_back(Mat::Zero(l.w.rows(), l.w.cols()));
      mb.push_back(Vec::Zero(l.b.size()));
      vb.push_back(Vec::Zero(l.b.size()));
    }
  }

  void step(NetworkSpec& net, const Gradients& g, const TrainConfig& c) {
    ++step_count;
    const double c1 = 1.0 - std::pow(c.beta1, step_count);
    const double c2 = 1.0 - std::pow(c.beta2, step_count);
    for (std::size_t i = 0; i < mw.size(); ++i) {
      Layer& l = net.mutable_layers()[i];
      mw[i] = c.beta1 * mw[i] + (1.0 - c.beta1) * g.dw[i];
      vw[i] = c.beta2 * vw[i] + (1.0 - c.beta2) * g.dw[i].cwiseProduct(g.dw[i]);
      mb[i] = c.beta1 * mb[i] + (1.0 - c.beta1) * g.db[i];
      vb[i] = c.beta2 * vb[i] + (1.0 - c.beta2) * g.db[i].cwiseProduct(g.db[i]);
      l.w.array() -= c.learning_rate * (mw[i].array() / c1) /
                     ((vw[i].array() / c2).sqrt() + c.adam_eps);
      l.b.array() -= c.learning_rate * (mb[i].array() / c1) /
                     ((vb[i].array() / c2).sqrt() + c.adam_eps);
    }
  }
};

void validate_common(const Dataset& data, const TrainConfig& c) {
  if (data.size() == 0) throw TrainingError("training: empty dataset");
  if (data.labels.size() != data.points.size()) {
    throw TrainingError("training: labels/points size mismatch");
  }
  for (int y : data.labels) {
    if (y != 0 && y != 1) throw TrainingError("training: labels must be 0/1");
  }
  if (c.batch_size < 1) throw TrainingError("training: batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw TrainingError("training: learning_rate must be > 0");
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

Split split_dataset(std::size_t n, double fraction, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t val_count = static_cast<std::size_t>(fraction * n);
  Split s;
  s.val.assign(idx.begin(), idx.begin() + val_count);
  s.train.assign(idx.begin() + val_count, idx.end());
  if (s.train.empty()) throw TrainingError("training: validation split leaves no training data");
  return s;
}

double subset_accuracy(const NetworkSpec& net, const Dataset& data,
                       const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  int ok = 0;
  for (std::size_t i : idx) {
    if (decide(net, data.points[i]) == data.labels[i]) ++ok;
  }
  return static_cast<double>(ok) / idx.size();
}

double subset_loss(const NetworkSpec& net, const Dataset& data,
                   const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : idx) {
    sum += bce_loss(predict_probability(net, data.points[i]), data.labels[i]);
  }
  return sum / idx.size();
}

// A training sample by reference: either a dataset row or a found
// counterexample paired with its source label.
struct Term {
  const Vec* x;
  int y;
};

Gradients combined_gradient(const NetworkSpec& net, const std::vector<Term>& originals,
                            const std::vector<Term>& ces) {
  Gradients total = Gradients::zeros_like(net);
  if (!originals.empty()) {
    const double w = 1.0 / originals.size();
    for (const Term& t : originals) total.add_scaled(backward(net, *t.x, t.y), w);
  }
  if (!ces.empty()) {
    const double w = 1.0 / ces.size();
    for (const Term& t : ces) total.add_scaled(backward(net, *t.x, t.y), w);
  }
  return total;
}

// Runs f(i) for i in [0, n) across the configured number of threads.
void parallel_for(int threads, std::size_t n, const std::function<void(std::size_t)>& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      f(i);
    }
  };
  std::vector<std::thread> pool;
  const int use = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(use);
  for (int t = 0; t < use; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

struct CeSearchStats {
  int searches = 0;
  int found = 0;
  int unknown = 0;
};

// Maximum-violation counterexamples for the given rows under the current
// weights, each carrying its source label. Searches run concurrently; the
// result order is the row order.
std::vector<std::optional<Term>> search_ces(const NetworkSpec& net,
                                            const FeatureSchema& schema,
                                            const Dataset& data,
                                            const std::vector<std::size_t>& rows,
                                            std::vector<Vec>& storage,
                                            const TrainConfig& c, CeSearchStats& stats) {
  std::vector<std::optional<Term>> out(rows.size());
  std::vector<std::optional<Vec>> points(rows.size());
  std::atomic<int> unknown{0};
  parallel_for(c.threads, rows.size(), [&](std::size_t i) {
    fairness::VerifyOptions vo;
    vo.time_limit_ms = c.ce_time_limit_ms;
    vo.tighten = c.tighten;
    vo.mode = SpaceMode::Training;
    const fairness::VerificationOutcome o =
        fairness::verify_max_violation(net, schema, data.points[rows[i]], vo);
    if (o.verdict == fairness::Verdict::HasCE) {
      points[i] = o.ce->point;
    } else if (o.verdict == fairness::Verdict::Unknown) {
      unknown.fetch_add(1);
    }
  });
  stats.searches += static_cast<int>(rows.size());
  stats.unknown += unknown.load();
  // storage must not reallocate while Terms point into it
  std::size_t found = 0;
  for (const auto& p : points) found += p.has_value() ? 1 : 0;
  storage.clear();
  storage.reserve(found);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!points[i]) continue;
    storage.push_back(std::move(*points[i]));
    out[i] = Term{&storage.back(), data.labels[rows[i]]};
    ++stats.found;
  }
  return out;
}

EpochRecord run_fair_epoch(NetworkSpec& net, AdamState& adam, const FeatureSchema& schema,
                           const Dataset& data, const std::vector<std::size_t>& order,
                           const TrainConfig& c, std::mt19937_64& rng, int epoch_no) {
  EpochRecord rec;
  rec.epoch = epoch_no;
  double loss_sum = 0.0;
  int steps = 0;
  std::vector<Vec> ce_storage;
  for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
    const std::size_t end = std::min(order.size(), start + c.batch_size);
    std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);

    std::vector<std::size_t> pool = batch;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t sample_count = static_cast<std::size_t>(
        std::ceil(c.rho * static_cast<double>(pool.size())));
    pool.resize(std::max<std::size_t>(1, sample_count));

    CeSearchStats stats;
    const std::vector<std::optional<Term>> ce_terms =
        search_ces(net, schema, data, pool, ce_storage, c, stats);
    rec.ce_searches += stats.searches;
    rec.ce_found += stats.found;
    rec.ce_unknown += stats.unknown;

    std::vector<Term> originals;
    std::vector<Term> ces;
    if (c.strategy == BatchStrategy::FullBatch) {
      originals.reserve(batch.size());
      for (std::size_t i : batch) originals.push_back({&data.points[i], data.labels[i]});
    } else {
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (ce_terms[i]) originals.push_back({&data.points[pool[i]], data.labels[pool[i]]});
      }
    }
    for (const auto& t : ce_terms) {
      if (t) ces.push_back(*t);
    }
    if (originals.empty() && ces.empty()) continue;

    const Gradients g = combined_gradient(net, originals, ces);
    if (!std::isfinite(g.loss)) {
      throw TrainingError("training: loss diverged in epoch " + std::to_string(epoch_no));
    }
    loss_sum += g.loss;
    ++steps;
    adam.step(net, g, c);
  }
  rec.loss = steps > 0 ? loss_sum / steps : 0.0;
  rec.train_accuracy = subset_accuracy(net, data, order);
  return rec;
}

// Prediction-mode maximum-violation verification over a fixed subsample;
// fills the epoch's validation fairness metrics (unknowns excluded from the
// rate).
void fill_validation_fairness(const NetworkSpec& net, const FeatureSchema& schema,
                              const Dataset& data, const std::vector<std::size_t>& idx,
                              const TrainConfig& c, EpochRecord& rec) {
  if (idx.empty()) return;
  std::vector<int> verdicts(idx.size(), 0);  // 0 fair, 1 ce, 2 unknown
  std::vector<double> violations(idx.size(), 0.0);
  parallel_for(c.threads, idx.size(), [&](std::size_t i) {
    fairness::VerifyOptions vo;
    vo.time_limit_ms = c.ce_time_limit_ms;
    vo.tighten = c.tighten;
    vo.mode = SpaceMode::Prediction;
    const fairness::VerificationOutcome o =
        fairness::verify_max_violation(net, schema, data.points[idx[i]], vo);
    if (o.verdict == fairness::Verdict::HasCE) {
      verdicts[i] = 1;
      violations[i] = o.ce->violation;
    } else if (o.verdict == fairness::Verdict::Unknown) {
      verdicts[i] = 2;
    }
  });
  int decided = 0, ces = 0;
  double vsum = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (verdicts[i] == 2) continue;
    ++decided;
    if (verdicts[i] == 1) ++ces;
    vsum += violations[i];
    rec.max_violation = std::max(rec.max_violation, violations[i]);
  }
  if (decided > 0) {
    rec.val_ce_rate = static_cast<double>(ces) / decided;
    rec.avg_violation = vsum / decided;
  }
}

}  // namespace

NetworkSpec init_network(int input_dim, const std::vector<int>& hidden_widths,
                         std::uint64_t seed, double threshold) {
  if (input_dim < 1) throw Error("training: input_dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> dims{input_dim};
  for (int w : hidden_widths) {
    if (w < 1) throw Error("training: hidden width must be >= 1");
    dims.push_back(w);
  }
  dims.push_back(1);
  std::vector<Layer> layers;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    const bool last = i + 1 == dims.size();
    const double scale = std::sqrt((last ? 1.0 : 2.0) / dims[i - 1]);
    Layer l;
    l.w = Mat(dims[i], dims[i - 1]);
    for (int r = 0; r < l.w.rows(); ++r) {
      for (int c = 0; c < l.w.cols(); ++c) l.w(r, c) = normal(rng) * scale;
    }
    l.b = Vec::Zero(dims[i]);
    layers.push_back(std::move(l));
  }
  return NetworkSpec(std::move(layers), threshold);
}

PretrainResult pretrain(const NetworkSpec& init, const Dataset& data,
                        const TrainConfig& config, const EpochCallback& on_epoch) {
  validate_common(data, config);
  if (config.epochs < 0) throw TrainingError("training: epochs must be >= 0");

  PretrainResult result;
  result.net = init;
  if (config.epochs == 0) return result;

  std::mt19937_64 rng(config.seed);
  Split split = split_dataset(data.size(), config.validation_fraction, rng);
  NetworkSpec net = init;
  AdamState adam(net);
  double best_score = std::numeric_limits<double>::infinity();

  for (int e = 1; e <= config.epochs; ++e) {
    std::shuffle(split.train.begin(), split.train.end(), rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < split.train.size(); start += config.batch_size) {
      const std::size_t end = std::min(split.train.size(), start + config.batch_size);
      Gradients g = Gradients::zeros_like(net);
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t row = split.train[i];
        g.add_scaled(backward(net, data.points[row], data.labels[row]), w);
      }
      if (!std::isfinite(g.loss)) {
        throw TrainingError("training: loss diverged in epoch " + std::to_string(e));
      }
      loss_sum += g.loss;
      ++steps;
      adam.step(net, g, config);
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.loss = steps > 0 ? loss_sum / steps : 0.0;
    rec.train_accuracy = subset_accuracy(net, data, split.train);
    rec.val_accuracy = subset_accuracy(net, data, split.val);
    rec.val_loss = subset_loss(net, data, split.val);
    const double score = split.val.empty() ? rec.loss : rec.val_loss;
    if (score < best_score) {
      best_score = score;
      result.net = net;
      result.best_epoch = e;
    }
    result.trajectory.push_back(rec);
    if (on_epoch) on_epoch(rec, net);
  }
  return result;
}

std::pair<NetworkSpec, EpochRecord> ce_fair_epoch(const NetworkSpec& net,
                                                  const FeatureSchema& schema,
                                                  const Dataset& data,
                                                  const TrainConfig& config) {
  validate_common(data, config);
  if (!(config.rho > 0.0 && config.rho <= 1.0)) {
    throw TrainingError("training: rho must lie in (0, 1]");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  NetworkSpec out = net;
  AdamState adam(out);
  EpochRecord rec = run_fair_epoch(out, adam, schema, data, order, config, rng, 1);
  return {std::move(out), rec};
}

TrainOutcome ce_fair_train(const NetworkSpec& init, const FeatureSchema& schema,
                           const Dataset& data, const TrainConfig& config,
                           const EpochCallback& on_epoch) {
  validate_common(data, config);
  if (config.epochs < 1) throw TrainingError("training: epochs must be >= 1");
  if (!(config.rho > 0.0 && config.rho <= 1.0)) {
    throw TrainingError("training: rho must lie in (0, 1]");
  }

  std::mt19937_64 rng(config.seed);
  Split split = split_dataset(data.size(), config.validation_fraction, rng);
  // Fixed fairness-validation subsample, shared by every epoch.
  const std::vector<std::size_t>& metric_source = split.val.empty() ? split.train : split.val;
  std::vector<std::size_t> metric_idx(
      metric_source.begin(),
      metric_source.begin() +
          std::min<std::size_t>(metric_source.size(), config.validation_ce_cap));

  NetworkSpec net = init;
  AdamState adam(net);
  TrainOutcome outcome;
  outcome.net = init;
  double best_distance = std::numeric_limits<double>::infinity();

  for (int e = 1; e <= config.epochs; ++e) {
    std::shuffle(split.train.begin(), split.train.end(), rng);
    EpochRecord rec =
        run_fair_epoch(net, adam, schema, data, split.train, config, rng, e);
    rec.val_accuracy = subset_accuracy(net, data, metric_idx);
    rec.val_loss = subset_loss(net, data, metric_idx);
    fill_validation_fairness(net, schema, data, metric_idx, config, rec);

    const double distance = std::hypot(1.0 - rec.val_accuracy, rec.val_ce_rate);
    if (distance < best_distance) {
      best_distance = distance;
      outcome.net = net;
      outcome.selection.chosen_epoch = e;
      outcome.selection.distance = distance;
    }
    outcome.selection.trajectory.push_back(rec);
    if (on_epoch) on_epoch(rec, net);
  }
  return outcome;
}

NetworkSpec train_blind(const NetworkSpec& init, const FeatureSchema& schema,
                        const Dataset& data, const TrainConfig& config) {
  if (init.input_dim() != schema.input_dim()) {
    throw TrainingError("training: network input width does not match schema");
  }
  NetworkSpec net = init;
  const std::vector<int> cols = schema.sensitive_columns();
  for (int c : cols) net.mutable_layers()[0].w.col(c).setZero();
  Dataset masked = data;
  for (Vec& p : masked.points) {
    for (int c : cols) p(c) = 0.0;
  }
  return pretrain(net, masked, config).net;
}

}  // namespace faircert::training
