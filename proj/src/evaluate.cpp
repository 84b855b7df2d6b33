#include "skeltk/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "skeltk/error.hpp"
#include "skeltk/nn/tensor.hpp"

namespace skeltk {

using nlohmann::json;

namespace {

// Rank of the true class under lower-index-wins tie-breaking: the number of
// classes that beat it outright plus the equal-valued ones with lower index.
int true_class_rank(const Matrix& logits, int row, int label) {
  const double ref = logits.at(row, label);
  int rank = 0;
  for (int k = 0; k < logits.cols; ++k) {
    double v = logits.at(row, k);
    if (v > ref || (v == ref && k < label)) ++rank;
  }
  return rank;
}

int predict_row(const Matrix& logits, int row) {
  int best = 0;
  double best_v = logits.at(row, 0);
  for (int k = 1; k < logits.cols; ++k) {
    if (logits.at(row, k) > best_v) {
      best_v = logits.at(row, k);
      best = k;
    }
  }
  return best;
}

}  // namespace

EvalReport evaluate(const Matrix& logits, const std::vector<int>& labels,
                    const std::string& tag) {
  if (logits.rows < 1) throw ValidationError("evaluate: no samples");
  if (static_cast<size_t>(logits.rows) != labels.size())
    throw DimensionError("evaluate: " + std::to_string(logits.rows) +
                         " logit rows but " + std::to_string(labels.size()) +
                         " labels");
  const int classes = logits.cols;
  if (classes < 1) throw ValidationError("evaluate: no classes");

  EvalReport report;
  report.num_classes = classes;
  report.sample_count = logits.rows;
  report.tag = tag;
  report.confusion.assign(classes, std::vector<std::int64_t>(classes, 0));

  const int k5 = std::min(5, classes);
  std::int64_t hit1 = 0, hit5 = 0;
  for (int i = 0; i < logits.rows; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= classes)
      throw ValidationError("evaluate: label " + std::to_string(label) +
                            " at sample " + std::to_string(i) +
                            " outside [0, " + std::to_string(classes) + ")");
    const int rank = true_class_rank(logits, i, label);
    if (rank < 1) ++hit1;
    if (rank < k5) ++hit5;
    report.confusion[label][predict_row(logits, i)] += 1;
  }
  report.top1 = 100.0 * static_cast<double>(hit1) / logits.rows;
  report.top5 = 100.0 * static_cast<double>(hit5) / logits.rows;

  report.per_class_acc.assign(classes, 0.0);
  for (int c = 0; c < classes; ++c) {
    std::int64_t row_sum = 0;
    for (std::int64_t n : report.confusion[c]) row_sum += n;
    if (row_sum > 0)
      report.per_class_acc[c] =
          100.0 * static_cast<double>(report.confusion[c][c]) / row_sum;
  }
  return report;
}

Matrix eval_logits(Model& model, const Dataset& data, int batch_size,
                   int threads) {
  if (data.size() == 0) throw ValidationError("eval: dataset is empty");
  if (batch_size < 1) throw ValidationError("eval: batch_size must be >= 1");
  if (threads < 1) threads = 1;
  const int n = static_cast<int>(data.size());
  threads = std::min(threads, n);
  Matrix logits(n, model.num_classes());

  auto run_range = [&](int lo, int hi) {
    nn::NoGradGuard guard;
    for (int start = lo; start < hi; start += batch_size) {
      const int stop = std::min(hi, start + batch_size);
      std::vector<int> batch(stop - start);
      std::iota(batch.begin(), batch.end(), start);
      nn::Tensor input = make_batch(data, batch);
      ForwardOptions opts;
      nn::Tensor out = model.forward(input, opts);
      for (int i = 0; i < stop - start; ++i)
        for (int k = 0; k < logits.cols; ++k)
          logits.at(start + i, k) = out.values()[static_cast<size_t>(i) * logits.cols + k];
    }
  };

  if (threads == 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (std::thread& t : pool) t.join();
  }
  return logits;
}

EvalReport evaluate_model(Model& model, const Dataset& data, int batch_size,
                          int threads, const std::string& tag) {
  Matrix logits = eval_logits(model, data, batch_size, threads);
  return evaluate(logits, data.labels, tag);
}

// ---------------------------------------------------------------------------

DeltaTable delta_table_from_accs(const std::vector<double>& acc_a,
                                 const std::vector<double>& acc_b, int k,
                                 const std::vector<std::string>& names) {
  if (acc_a.size() != acc_b.size())
    throw DimensionError("delta_table: runs have " + std::to_string(acc_a.size()) +
                         " and " + std::to_string(acc_b.size()) + " classes");
  if (k < 0) throw ValidationError("delta_table: k must be >= 0");
  if (!names.empty() && names.size() != acc_a.size())
    throw DimensionError("delta_table: " + std::to_string(names.size()) +
                         " names for " + std::to_string(acc_a.size()) +
                         " classes");

  std::vector<DeltaRow> rows(acc_a.size());
  for (size_t c = 0; c < acc_a.size(); ++c) {
    rows[c].class_id = static_cast<int>(c);
    rows[c].name = names.empty() ? "class " + std::to_string(c) : names[c];
    rows[c].acc_a = acc_a[c];
    rows[c].acc_b = acc_b[c];
    rows[c].delta = acc_b[c] - acc_a[c];
  }

  const size_t take = std::min<size_t>(k, rows.size());
  DeltaTable table;
  std::vector<DeltaRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const DeltaRow& x, const DeltaRow& y) {
    if (x.delta != y.delta) return x.delta > y.delta;
    return x.class_id < y.class_id;
  });
  table.gains.assign(sorted.begin(), sorted.begin() + take);
  std::sort(sorted.begin(), sorted.end(), [](const DeltaRow& x, const DeltaRow& y) {
    if (x.delta != y.delta) return x.delta < y.delta;
    return x.class_id < y.class_id;
  });
  table.losses.assign(sorted.begin(), sorted.begin() + take);
  return table;
}

DeltaTable delta_table(const EvalReport& a, const EvalReport& b, int k,
                       const std::vector<std::string>& names) {
  if (a.num_classes != b.num_classes)
    throw DimensionError("delta_table: reports have " +
                         std::to_string(a.num_classes) + " and " +
                         std::to_string(b.num_classes) + " classes");
  return delta_table_from_accs(a.per_class_acc, b.per_class_acc, k, names);
}

Matrix filter_confusion(const EvalReport& report, double threshold_percent) {
  if (threshold_percent < 0.0 || threshold_percent > 100.0)
    throw ValidationError("filter_confusion: threshold must be in [0, 100]");
  const int classes = report.num_classes;
  Matrix out(classes, classes);
  for (int r = 0; r < classes; ++r) {
    std::int64_t row_sum = 0;
    for (std::int64_t n : report.confusion[r]) row_sum += n;
    if (row_sum == 0) continue;
    for (int c = 0; c < classes; ++c) {
      double pct = 100.0 * static_cast<double>(report.confusion[r][c]) / row_sum;
      out.at(r, c) = pct < threshold_percent ? 0.0 : pct;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string report_to_json(const EvalReport& report) {
  json confusion = json::array();
  for (const auto& row : report.confusion) confusion.push_back(row);
  json doc = {
      {"format", "skeltk-report"},
      {"version", 1},
      {"tag", report.tag},
      {"num_classes", report.num_classes},
      {"sample_count", report.sample_count},
      {"top1", report.top1},
      {"top5", report.top5},
      {"per_class_acc", report.per_class_acc},
      {"confusion", confusion},
  };
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  try {
    if (!doc.contains("format") || doc.at("format") != "skeltk-report")
      throw ParseError("report: missing or wrong \"format\" marker");
    if (doc.at("version").get<int>() != 1)
      throw ParseError("report: unsupported version");
    EvalReport report;
    report.tag = doc.value("tag", std::string());
    report.num_classes = doc.at("num_classes").get<int>();
    report.sample_count = doc.at("sample_count").get<std::int64_t>();
    report.top1 = doc.at("top1").get<double>();
    report.top5 = doc.at("top5").get<double>();
    report.per_class_acc = doc.at("per_class_acc").get<std::vector<double>>();
    for (const json& row : doc.at("confusion"))
      report.confusion.push_back(row.get<std::vector<std::int64_t>>());
    if (static_cast<int>(report.per_class_acc.size()) != report.num_classes ||
        static_cast<int>(report.confusion.size()) != report.num_classes)
      throw ParseError("report: class count does not match table sizes");
    for (const auto& row : report.confusion)
      if (static_cast<int>(row.size()) != report.num_classes)
        throw ParseError("report: ragged confusion matrix");
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write report to \"" + path + "\"");
  out << report_to_json(report) << '\n';
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report \"" + path + "\"");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return report_from_json(text);
}

void write_confusion_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write confusion to \"" + path + "\"");
  out << "true_class";
  for (int c = 0; c < report.num_classes; ++c) out << ",pred_" << c;
  out << '\n';
  for (int r = 0; r < report.num_classes; ++r) {
    out << r;
    for (int c = 0; c < report.num_classes; ++c) out << ',' << report.confusion[r][c];
    out << '\n';
  }
}

namespace {

void append_rows(std::ostringstream& out, const std::vector<DeltaRow>& rows) {
  for (size_t i = 0; i < rows.size(); ++i) {
    const DeltaRow& r = rows[i];
    out << "  " << std::setw(2) << (i + 1) << ". " << std::left << std::setw(44)
        << r.name << std::right << std::fixed << std::setprecision(1)
        << std::setw(6) << r.acc_a << " -> " << std::setw(6) << r.acc_b
        << "  (" << std::showpos << r.delta << std::noshowpos << ")\n";
  }
}

}  // namespace

std::string delta_table_text(const DeltaTable& table) {
  std::ostringstream out;
  out << "top gains (acc_a -> acc_b):\n";
  append_rows(out, table.gains);
  out << "top losses (acc_a -> acc_b):\n";
  append_rows(out, table.losses);
  return out.str();
}

void write_delta_csv(const DeltaTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write delta table to \"" + path + "\"");
  out << "section,rank,class_id,name,acc_a,acc_b,delta\n";
  auto write_rows = [&](const char* section, const std::vector<DeltaRow>& rows) {
    for (size_t i = 0; i < rows.size(); ++i) {
      const DeltaRow& r = rows[i];
      out << section << ',' << (i + 1) << ',' << r.class_id << ",\"" << r.name
          << "\"," << r.acc_a << ',' << r.acc_b << ',' << r.delta << '\n';
    }
  };
  write_rows("gain", table.gains);
  write_rows("loss", table.losses);
}

}  // namespace skeltk
