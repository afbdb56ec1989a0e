// Command-line front end: baseline training, counterexample-guided
// retraining, per-sample fairness verification, guaranteed-fair prediction,
// and the four-row pipeline comparison.
//
// Exit codes: 0 success (verify: corpus certified fair), 1 verify found a
// counterexample, 2 configuration/input error, 3 training failure,
// 4 verify hit an undecided sample without --allow-unknown, 5 predict hit
// an undecided sample.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "faircert/fairness.hpp"
#include "faircert/network.hpp"
#include "faircert/schema.hpp"
#include "faircert/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace faircert;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitUnknown = 4;
constexpr int kExitUndecided = 5;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Shortest round-trip decimal form, locale independent.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Options {
  std::string schema_path;
  std::string model_path;
  std::string retrained_path;
  std::string data_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  double threshold = 0.5;
  bool threshold_set = false;
  double rho = 1.0;
  int epochs = 10;
  std::string batch_strategy = "full";
  std::int64_t time_limit_ms = 60'000;
  int threads = 1;
  int max_solutions = 0;
  bool oracle = false;
  bool allow_unknown = false;
  bool max_violation = false;
  bool stable_output = false;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::vector<int> hidden = {16, 8};
  double validation_fraction = 0.2;
};

struct Inputs {
  FeatureSchema schema;
  Dataset data;
};

Inputs load_inputs(const Options& opt) {
  fs::create_directories(opt.out_dir);
  FeatureSchema schema = load_schema(opt.schema_path);
  Dataset data = load_dataset(schema, opt.data_path);
  return {std::move(schema), std::move(data)};
}

NetworkSpec load_model_checked(const Options& opt, const std::string& path,
                               const FeatureSchema& schema) {
  NetworkSpec net = load_model(path);
  if (net.input_dim() != schema.input_dim()) {
    throw Error("model " + path + " expects input width " +
                std::to_string(net.input_dim()) + " but the schema encodes " +
                std::to_string(schema.input_dim()) + " columns");
  }
  if (opt.threshold_set) net = NetworkSpec(net.layers(), opt.threshold);
  return net;
}

void write_manifest(const Options& opt, const std::string& subcommand, json config,
                    const std::vector<std::pair<std::string, std::string>>& inputs) {
  json m;
  m["tool"] = "faircert";
  m["version"] = "0.1.0";
  m["subcommand"] = subcommand;
  config["seed"] = opt.seed;
  config["threads"] = opt.threads;
  config["out"] = opt.out_dir;
  m["config"] = std::move(config);
  json in = json::object();
  for (const auto& [name, path] : inputs) {
    in[name] = {{"path", path}, {"fnv1a64", fnv1a64_hex(read_file_bytes(path))}};
  }
  m["inputs"] = std::move(in);
  write_text(fs::path(opt.out_dir) / (subcommand + "_manifest.json"), m.dump(2) + "\n");
}

json epoch_to_json(const training::EpochRecord& r, bool fair) {
  json line;
  line["epoch"] = r.epoch;
  line["loss"] = r.loss;
  line["train_accuracy"] = r.train_accuracy;
  line["val_accuracy"] = r.val_accuracy;
  line["val_loss"] = r.val_loss;
  if (fair) {
    line["val_ce_rate"] = r.val_ce_rate;
    line["avg_violation"] = r.avg_violation;
    line["max_violation"] = r.max_violation;
    line["ce_searches"] = r.ce_searches;
    line["ce_found"] = r.ce_found;
    line["ce_unknown"] = r.ce_unknown;
  }
  return line;
}

// ---------------------------------------------------------------- pretrain

int cmd_pretrain(const Options& opt) {
  Inputs in = load_inputs(opt);
  const NetworkSpec init =
      training::init_network(in.schema.input_dim(), opt.hidden, opt.seed, opt.threshold);

  training::TrainConfig cfg;
  cfg.learning_rate = opt.learning_rate;
  cfg.batch_size = opt.batch_size;
  cfg.epochs = opt.epochs;
  cfg.seed = opt.seed;
  cfg.validation_fraction = opt.validation_fraction;

  std::ostringstream log;
  const training::PretrainResult result =
      training::pretrain(init, in.data, cfg, [&](const training::EpochRecord& r,
                                                 const NetworkSpec&) {
        log << epoch_to_json(r, false).dump() << "\n";
      });

  save_model(result.net, (fs::path(opt.out_dir) / "model.json").string());
  write_text(fs::path(opt.out_dir) / "pretrain_log.jsonl", log.str());

  json cfg_json = {{"epochs", opt.epochs},
                   {"learning_rate", opt.learning_rate},
                   {"batch_size", opt.batch_size},
                   {"hidden", opt.hidden},
                   {"threshold", opt.threshold},
                   {"validation_fraction", opt.validation_fraction},
                   {"best_epoch", result.best_epoch}};
  write_manifest(opt, "pretrain", std::move(cfg_json),
                 {{"schema", opt.schema_path}, {"data", opt.data_path}});
  std::cout << "pretrain: " << opt.epochs << " epochs, kept epoch " << result.best_epoch
            << ", model written to " << (fs::path(opt.out_dir) / "model.json").string()
            << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const Options& opt) {
  Inputs in = load_inputs(opt);
  const NetworkSpec init = load_model_checked(opt, opt.model_path, in.schema);

  training::TrainConfig cfg;
  cfg.learning_rate = opt.learning_rate;
  cfg.batch_size = opt.batch_size;
  cfg.epochs = opt.epochs;
  cfg.rho = opt.rho;
  cfg.strategy = opt.batch_strategy == "ce" ? training::BatchStrategy::CeBatch
                                            : training::BatchStrategy::FullBatch;
  cfg.seed = opt.seed;
  cfg.validation_fraction = opt.validation_fraction;
  cfg.ce_time_limit_ms = opt.time_limit_ms;
  cfg.threads = opt.threads;

  std::ostringstream log;
  const fs::path ckpt_dir = fs::path(opt.out_dir) / "checkpoints";
  const training::TrainOutcome outcome = training::ce_fair_train(
      init, in.schema, in.data, cfg,
      [&](const training::EpochRecord& r, const NetworkSpec& net) {
        log << epoch_to_json(r, true).dump() << "\n";
        fs::create_directories(ckpt_dir);
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.json", r.epoch);
        save_model(net, (ckpt_dir / name).string());
      });

  save_model(outcome.net, (fs::path(opt.out_dir) / "model.json").string());
  write_text(fs::path(opt.out_dir) / "train_log.jsonl", log.str());

  json selection;
  selection["chosen_epoch"] = outcome.selection.chosen_epoch;
  selection["distance"] = outcome.selection.distance;
  json per_epoch = json::array();
  for (const training::EpochRecord& r : outcome.selection.trajectory) {
    per_epoch.push_back({{"epoch", r.epoch},
                         {"val_accuracy", r.val_accuracy},
                         {"val_ce_rate", r.val_ce_rate},
                         {"distance", std::hypot(1.0 - r.val_accuracy, r.val_ce_rate)}});
  }
  selection["epochs"] = std::move(per_epoch);
  write_text(fs::path(opt.out_dir) / "selection.json", selection.dump(2) + "\n");

  json cfg_json = {{"epochs", opt.epochs},
                   {"rho", opt.rho},
                   {"batch_strategy", opt.batch_strategy},
                   {"learning_rate", opt.learning_rate},
                   {"batch_size", opt.batch_size},
                   {"validation_fraction", opt.validation_fraction},
                   {"time_limit_ms", opt.time_limit_ms}};
  write_manifest(opt, "train", std::move(cfg_json),
                 {{"schema", opt.schema_path},
                  {"model", opt.model_path},
                  {"data", opt.data_path}});
  std::cout << "train: kept epoch " << outcome.selection.chosen_epoch << " (distance "
            << fmt(outcome.selection.distance) << "), model written to "
            << (fs::path(opt.out_dir) / "model.json").string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ verify

int cmd_verify(const Options& opt) {
  Inputs in = load_inputs(opt);
  const NetworkSpec net = load_model_checked(opt, opt.model_path, in.schema);

  fairness::AuditOptions ao;
  ao.time_limit_ms = opt.time_limit_ms;
  ao.threads = opt.threads;
  ao.max_violation = opt.max_violation;
  ao.fair = false;
  const fairness::FairnessReport report = fairness::audit(net, in.schema, in.data, ao);

  std::ostringstream csv;
  csv << "sample_id,raw_label,fair_label,has_ce,flipped,violation,solve_ms,status\n";
  for (const fairness::SampleRecord& r : report.samples) {
    const bool decided = r.status == "fair" || r.status == "ce";
    csv << r.sample_id << ',' << r.raw_label << ',';
    // Without counting, the fair label is only known where no counterexample
    // exists (every assignment then agrees with the raw decision).
    if (r.status == "fair") csv << r.raw_label;
    csv << ',';
    if (decided) csv << (r.has_ce ? 1 : 0);
    csv << ',';
    if (r.status == "fair") csv << 0;
    csv << ',';
    if (decided && opt.max_violation) csv << fmt(r.violation);
    csv << ',' << fmt(opt.stable_output ? 0.0 : r.solve_ms) << ',' << r.status << "\n";
  }
  write_text(fs::path(opt.out_dir) / "report.csv", csv.str());

  json agg;
  agg["samples"] = report.samples.size();
  agg["decided"] = report.decided_count;
  agg["unknown"] = report.unknown_count;
  agg["ce_rate"] = report.ce_rate;
  agg["raw_accuracy"] = report.raw_accuracy;
  if (opt.max_violation) {
    agg["avg_violation"] = report.avg_violation;
    agg["max_violation"] = report.max_violation;
  }
  write_text(fs::path(opt.out_dir) / "report.json", agg.dump(2) + "\n");

  if (opt.max_solutions > 0) {
    std::ostringstream lines;
    fairness::VerifyOptions vo;
    vo.time_limit_ms = opt.time_limit_ms;
    for (const fairness::SampleRecord& r : report.samples) {
      if (!r.has_ce) continue;
      const std::vector<fairness::Counterexample> ces = fairness::list_ces(
          net, in.schema, in.data.points[r.sample_id], opt.max_solutions, vo);
      for (const fairness::Counterexample& ce : ces) {
        json line;
        line["sample_id"] = r.sample_id;
        json sens = json::object();
        const std::vector<int> feats = in.schema.sensitive_features();
        for (std::size_t f = 0; f < feats.size(); ++f) {
          sens[in.schema.features()[feats[f]].name] = ce.sensitive_values[f];
        }
        line["sensitive"] = std::move(sens);
        line["probability"] = ce.probability;
        line["violation"] = ce.violation;
        lines << line.dump() << "\n";
      }
    }
    write_text(fs::path(opt.out_dir) / "ces.jsonl", lines.str());
  }

  json cfg_json = {{"time_limit_ms", opt.time_limit_ms},
                   {"max_violation", opt.max_violation},
                   {"max_solutions", opt.max_solutions},
                   {"allow_unknown", opt.allow_unknown},
                   {"stable_output", opt.stable_output}};
  write_manifest(opt, "verify", std::move(cfg_json),
                 {{"schema", opt.schema_path},
                  {"model", opt.model_path},
                  {"data", opt.data_path}});

  const int ces = static_cast<int>(std::lround(report.ce_rate * report.decided_count));
  std::cout << "verify: " << report.samples.size() << " samples, " << ces
            << " with counterexamples, " << report.unknown_count << " unknown\n";
  if (ces > 0) return 1;
  if (report.unknown_count > 0 && !opt.allow_unknown) return kExitUnknown;
  return 0;
}

// ----------------------------------------------------------------- predict

struct PredictRow {
  int raw_label = 0;
  int fair_label = 0;
  bool undecided = false;
  double solve_ms = 0.0;
};

// Per-sample fair (or oracle) prediction over a dataset; row order is the
// dataset order regardless of the thread count.
std::vector<PredictRow> predict_rows(const NetworkSpec& net, const FeatureSchema& schema,
                                     const Dataset& data, const Options& opt) {
  std::vector<PredictRow> rows(data.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= data.size()) return;
      PredictRow& row = rows[i];
      try {
        const auto t0 = Clock::now();
        row.raw_label = decide(net, data.points[i]);
        if (opt.oracle) {
          row.fair_label = fairness::enumerate_predict(net, schema, data.points[i]);
        } else {
          fairness::PredictOptions po;
          po.time_limit_ms = opt.time_limit_ms;
          row.fair_label = fairness::fair_predict(net, schema, data.points[i], po);
        }
        row.solve_ms = elapsed_ms(t0);
      } catch (const UndecidedError&) {
        row.undecided = true;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::max(1, opt.threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

int cmd_predict(const Options& opt) {
  Inputs in = load_inputs(opt);
  const NetworkSpec net = load_model_checked(opt, opt.model_path, in.schema);
  const std::vector<PredictRow> rows = predict_rows(net, in.schema, in.data, opt);

  int decided = 0, correct = 0, flips = 0, undecided = 0;
  double total_ms = 0.0;
  std::ostringstream csv;
  csv << "sample_id,raw_label,fair_label,flipped,solve_ms\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const PredictRow& r = rows[i];
    csv << i << ',' << r.raw_label << ',';
    if (r.undecided) {
      ++undecided;
      csv << ",," << fmt(opt.stable_output ? 0.0 : r.solve_ms) << "\n";
      continue;
    }
    ++decided;
    total_ms += r.solve_ms;
    if (r.fair_label == in.data.labels[i]) ++correct;
    const bool flipped = r.fair_label != r.raw_label;
    if (flipped) ++flips;
    csv << r.fair_label << ',' << (flipped ? 1 : 0) << ','
        << fmt(opt.stable_output ? 0.0 : r.solve_ms) << "\n";
  }
  const double accuracy = decided > 0 ? static_cast<double>(correct) / decided : 0.0;
  const double flip_rate = decided > 0 ? static_cast<double>(flips) / decided : 0.0;
  csv << "# accuracy," << fmt(accuracy) << "\n";
  csv << "# flip_rate," << fmt(flip_rate) << "\n";
  write_text(fs::path(opt.out_dir) / "predictions.csv", csv.str());

  json agg;
  agg["samples"] = rows.size();
  agg["undecided"] = undecided;
  agg["accuracy"] = accuracy;
  agg["flip_rate"] = flip_rate;
  agg["total_ms"] = opt.stable_output ? 0.0 : total_ms;
  agg["oracle"] = opt.oracle;
  write_text(fs::path(opt.out_dir) / "predictions.json", agg.dump(2) + "\n");

  json cfg_json = {{"time_limit_ms", opt.time_limit_ms},
                   {"oracle", opt.oracle},
                   {"stable_output", opt.stable_output}};
  write_manifest(opt, "predict", std::move(cfg_json),
                 {{"schema", opt.schema_path},
                  {"model", opt.model_path},
                  {"data", opt.data_path}});

  std::cout << "predict: " << rows.size() << " samples, " << flips << " flipped, "
            << undecided << " undecided\n";
  return undecided > 0 ? kExitUndecided : 0;
}

// ------------------------------------------------------------------- audit

struct AuditRow {
  std::string row;
  std::string model;
  std::string predictor;
  double accuracy = 0.0;
  double ce_rate = 0.0;
  double flip_rate = 0.0;
  int unknown = 0;
  int undecided = 0;
  double runtime_ms = 0.0;
};

AuditRow verification_row(const std::string& id, const std::string& model,
                          const NetworkSpec& net, const Inputs& in, const Options& opt) {
  fairness::AuditOptions ao;
  ao.time_limit_ms = opt.time_limit_ms;
  ao.threads = opt.threads;
  ao.fair = false;
  const auto t0 = Clock::now();
  const fairness::FairnessReport rep = fairness::audit(net, in.schema, in.data, ao);
  AuditRow row{id, model, "raw"};
  row.accuracy = rep.raw_accuracy;
  row.ce_rate = rep.ce_rate;
  row.unknown = rep.unknown_count;
  row.runtime_ms = elapsed_ms(t0);
  return row;
}

AuditRow fair_prediction_row(const std::string& id, const std::string& model,
                             const NetworkSpec& net, const Inputs& in, const Options& opt) {
  const auto t0 = Clock::now();
  const std::vector<PredictRow> rows = predict_rows(net, in.schema, in.data, opt);
  AuditRow row{id, model, "fair"};
  row.runtime_ms = elapsed_ms(t0);
  int decided = 0, correct = 0, flips = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].undecided) {
      ++row.undecided;
      continue;
    }
    ++decided;
    if (rows[i].fair_label == in.data.labels[i]) ++correct;
    if (rows[i].fair_label != rows[i].raw_label) ++flips;
  }
  if (decided > 0) {
    row.accuracy = static_cast<double>(correct) / decided;
    row.flip_rate = static_cast<double>(flips) / decided;
  }
  // The majority vote is constant across A(x) by construction, so the fair
  // predictor has no counterexamples.
  row.ce_rate = 0.0;
  return row;
}

int cmd_audit(const Options& opt) {
  Inputs in = load_inputs(opt);
  const NetworkSpec raw = load_model_checked(opt, opt.model_path, in.schema);
  const NetworkSpec retrained = load_model_checked(opt, opt.retrained_path, in.schema);

  std::vector<AuditRow> rows;
  rows.push_back(verification_row("a", "raw", raw, in, opt));
  rows.push_back(fair_prediction_row("b", "raw", raw, in, opt));
  rows.push_back(verification_row("c", "retrained", retrained, in, opt));
  rows.push_back(fair_prediction_row("d", "retrained", retrained, in, opt));

  std::ostringstream csv;
  csv << "row,model,predictor,accuracy,ce_rate,flip_rate,unknown,undecided,runtime_ms\n";
  json rows_json = json::array();
  for (const AuditRow& r : rows) {
    const double runtime = opt.stable_output ? 0.0 : r.runtime_ms;
    csv << r.row << ',' << r.model << ',' << r.predictor << ',' << fmt(r.accuracy) << ','
        << fmt(r.ce_rate) << ',' << fmt(r.flip_rate) << ',' << r.unknown << ','
        << r.undecided << ',' << fmt(runtime) << "\n";
    rows_json.push_back({{"row", r.row},
                         {"model", r.model},
                         {"predictor", r.predictor},
                         {"accuracy", r.accuracy},
                         {"ce_rate", r.ce_rate},
                         {"flip_rate", r.flip_rate},
                         {"unknown", r.unknown},
                         {"undecided", r.undecided},
                         {"runtime_ms", runtime}});
  }
  write_text(fs::path(opt.out_dir) / "audit.csv", csv.str());
  write_text(fs::path(opt.out_dir) / "audit.json",
             json{{"rows", rows_json}}.dump(2) + "\n");

  json cfg_json = {{"time_limit_ms", opt.time_limit_ms},
                   {"stable_output", opt.stable_output}};
  write_manifest(opt, "audit", std::move(cfg_json),
                 {{"schema", opt.schema_path},
                  {"model", opt.model_path},
                  {"retrained", opt.retrained_path},
                  {"data", opt.data_path}});

  std::cout << "audit: ce_rate raw " << fmt(rows[0].ce_rate) << " -> retrained "
            << fmt(rows[2].ce_rate) << ", fair flip_rate raw " << fmt(rows[1].flip_rate)
            << " -> retrained " << fmt(rows[3].flip_rate) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Individual fairness for ReLU binary classifiers: exact verification, "
      "guaranteed-fair prediction, and counterexample-guided retraining"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool needs_model) {
    sub->add_option("--schema", opt.schema_path, "Feature schema JSON")->required();
    sub->add_option("--data", opt.data_path, "Labeled CSV dataset")->required();
    if (needs_model) {
      sub->add_option("--model", opt.model_path, "Model JSON")->required();
    }
    sub->add_option("--out", opt.out_dir, "Output directory (default: .)");
    sub->add_option("--seed", opt.seed, "Seed for all randomness (default: 0)");
    sub->add_option("--threads", opt.threads, "Worker threads (default: 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--time-limit-ms", opt.time_limit_ms,
                    "Per-solve time limit in milliseconds (default: 60000)");
    sub->add_option("--threshold", opt.threshold,
                    "Decision threshold in (0,1); overrides the model file")
        ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
        ->trigger_on_parse()
        ->each([&](const std::string&) { opt.threshold_set = true; });
  };

  CLI::App* pre = app.add_subcommand("pretrain", "Train a baseline classifier");
  add_common(pre, false);
  pre->add_option("--epochs", opt.epochs, "Training epochs (default: 10)");
  pre->add_option("--lr", opt.learning_rate, "Adam learning rate (default: 1e-3)");
  pre->add_option("--batch-size", opt.batch_size, "Minibatch size (default: 32)")
      ->check(CLI::PositiveNumber);
  pre->add_option("--hidden", opt.hidden, "Hidden layer widths (default: 16 8)")
      ->delimiter(',');
  pre->add_option("--val-fraction", opt.validation_fraction,
                  "Validation fraction (default: 0.2)");

  CLI::App* trn = app.add_subcommand(
      "train", "Retrain with per-batch maximum-violation counterexamples");
  add_common(trn, true);
  trn->add_option("--epochs", opt.epochs, "Retraining epochs (default: 10)");
  trn->add_option("--rho", opt.rho,
                  "Fraction of each batch searched for counterexamples (default: 1)");
  trn->add_option("--batch-strategy", opt.batch_strategy,
                  "full: batch + counterexamples; ce: producing samples + "
                  "counterexamples (default: full)")
      ->check(CLI::IsMember({"full", "ce"}));
  trn->add_option("--lr", opt.learning_rate, "Adam learning rate (default: 1e-3)");
  trn->add_option("--batch-size", opt.batch_size, "Minibatch size (default: 32)")
      ->check(CLI::PositiveNumber);
  trn->add_option("--val-fraction", opt.validation_fraction,
                  "Validation fraction (default: 0.2)");

  CLI::App* ver = app.add_subcommand(
      "verify", "Verify each sample; exit 0 only if no counterexample exists");
  add_common(ver, true);
  ver->add_flag("--max-violation", opt.max_violation,
                "Also maximize the probability gap of each counterexample");
  ver->add_flag("--allow-unknown", opt.allow_unknown,
                "Do not fail (exit 4) on undecided samples");
  ver->add_option("--max-solutions", opt.max_solutions,
                  "List up to N counterexamples per sample to ces.jsonl");
  ver->add_flag("--stable-output", opt.stable_output,
                "Zero timing columns for reproducible reports");

  CLI::App* prd = app.add_subcommand(
      "predict", "Predict with the counterexample-counting fair majority vote");
  add_common(prd, true);
  prd->add_flag("--oracle", opt.oracle,
                "Use exhaustive enumeration instead of counting");
  prd->add_flag("--stable-output", opt.stable_output,
                "Zero timing columns for reproducible reports");

  CLI::App* aud = app.add_subcommand(
      "audit", "Compare raw/retrained models under raw/fair prediction");
  add_common(aud, true);
  aud->add_option("--retrained", opt.retrained_path, "Retrained model JSON")->required();
  aud->add_flag("--stable-output", opt.stable_output,
                "Zero timing columns for reproducible reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(opt);
    if (trn->parsed()) return cmd_train(opt);
    if (ver->parsed()) return cmd_verify(opt);
    if (prd->parsed()) return cmd_predict(opt);
    if (aud->parsed()) return cmd_audit(opt);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const UndecidedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUndecided;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
