#pragma once

#include <map>
#include <string>
#include <vector>

#include "veritab/gvat.hpp"
#include "veritab/select.hpp"

namespace veritab {

struct TrainConfig {
  int seed = 0;
  int epochs = 200;
  double lr = 1e-3;
  int batch_size = 8;
  int dim = 64;            // F
  int att_dim = 16;        // L
  int layers = 1;
  long freeze_steps = 0;   // statement-table encoder frozen for this many steps
  int patience = 0;        // early stop on stale val accuracy; 0 disables
  double val_fraction = 0.2;
  bool no_graph = false;
  bool gate_updated = false;
  int min_token_freq = 2;
  // Stop once train accuracy reaches this level (0 disables); keeps the
  // desk-scale runs short without changing what is measured.
  double stop_at_train_accuracy = 0.0;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::string& path);
};

// One verification example: statement, its table and the program evidence.
struct VerifyExample {
  const Table* table = nullptr;
  Statement stmt;
  Program prog;
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
};

struct TrainMetrics {
  std::vector<EpochRow> rows;
  double best_val_accuracy = 0;
  int best_epoch = -1;
  double final_train_accuracy = 0;
  int train_count = 0, val_count = 0;

  void write_csv(const std::string& path) const;
  void write_jsonl(const std::string& path) const;
};

struct VerifierModel {
  ParamStore store;
  Vocab vocab;
  GvatConfig gvat;

  void save(const std::string& dir) const;
  static VerifierModel load(const std::string& dir);
};

// Verification probability of one example under the model.
double predict_probability(VerifierModel& model, const VerifyExample& ex);

TrainMetrics train_verifier(const std::vector<VerifyExample>& examples, const TrainConfig& cfg,
                            VerifierModel& model_out);

struct EvalResult {
  double accuracy = 0;
  int count = 0;
  std::map<std::string, std::pair<double, int>> by_tag;  // tag -> (accuracy, n)

  std::string to_json() const;
};

// Predictions are independent; jobs > 1 maps them over a thread pool with
// deterministic aggregation.
EvalResult evaluate(VerifierModel& model, const std::vector<VerifyExample>& examples,
                    int jobs = 1);

// Markdown rendering of an EvalResult json document (the `report` command).
std::string render_report(const std::string& metrics_json);

}  // namespace veritab
