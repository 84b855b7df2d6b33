#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skeltk/matrix.hpp"
#include "skeltk/models.hpp"
#include "skeltk/train.hpp"

namespace skeltk {

struct EvalReport {
  int num_classes = 0;
  double top1 = 0.0;   // percent
  double top5 = 0.0;   // percent; k is capped at num_classes
  std::vector<double> per_class_acc;              // percents, one per class
  std::vector<std::vector<std::int64_t>> confusion;  // rows = true class
  std::int64_t sample_count = 0;
  std::string tag;
};

// Top-k counts a sample as correct when the true label ranks among the k
// largest logits; ties resolve in favor of the lower class index. The
// confusion matrix uses the top-1 prediction under the same rule.
EvalReport evaluate(const Matrix& logits, const std::vector<int>& labels,
                    const std::string& tag = "");

// Batched eval-mode logits, one row per sample. Samples may be sharded
// across `threads` workers; eval mode has no cross-sample coupling, so the
// result is independent of both batching and thread count.
Matrix eval_logits(Model& model, const Dataset& data, int batch_size,
                   int threads = 1);

EvalReport evaluate_model(Model& model, const Dataset& data, int batch_size,
                          int threads = 1, const std::string& tag = "");

struct DeltaRow {
  int class_id = 0;  // zero-based index into per_class_acc
  std::string name;
  double acc_a = 0.0;
  double acc_b = 0.0;
  double delta = 0.0;  // acc_b - acc_a
};

// Largest per-class movements between two runs: `gains` holds the k largest
// deltas (descending), `losses` the k smallest (ascending); ties fall back
// to class index. No sign filter is applied, so a zero delta can appear in
// either list when fewer than k classes moved in that direction.
struct DeltaTable {
  std::vector<DeltaRow> gains;
  std::vector<DeltaRow> losses;
};

DeltaTable delta_table(const EvalReport& a, const EvalReport& b, int k = 10,
                       const std::vector<std::string>& names = {});

DeltaTable delta_table_from_accs(const std::vector<double>& acc_a,
                                 const std::vector<double>& acc_b, int k = 10,
                                 const std::vector<std::string>& names = {});

// Row-normalizes the confusion matrix to percents and zeroes entries
// strictly below the threshold. Rendering helper only; metrics never use it.
Matrix filter_confusion(const EvalReport& report, double threshold_percent = 5.0);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

void write_confusion_csv(const EvalReport& report, const std::string& path);
std::string delta_table_text(const DeltaTable& table);
void write_delta_csv(const DeltaTable& table, const std::string& path);

}  // namespace skeltk
