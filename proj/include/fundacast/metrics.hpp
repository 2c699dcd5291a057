#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fundacast/error.hpp"

namespace fundacast {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> targets) {
  if (predictions.size() != targets.size()) {
    throw LengthMismatchError("predictions and targets differ in length: " + std::to_string(predictions.size()) +
                              " vs " + std::to_string(targets.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], t = targets[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw ValueError("labels must be 0 or 1");
    if (p == 1) {
      (t == 1 ? c.tp : c.fp)++;
    } else {
      (t == 0 ? c.tn : c.fn)++;
    }
  }
  return c;
}

/// Precision, recall and F1 fall back to 0 when their denominator is zero;
/// the flags record when that happened.
struct Scores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;

  std::array<double, 4> values() const { return {accuracy, precision, recall, f1}; }
};

inline Scores scores(const ConfusionCounts& c) {
  const std::size_t total = c.total();
  if (total == 0) throw EmptyEvaluationError("no samples to score");
  Scores s;
  s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  if (c.tp + c.fp > 0) {
    s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    s.precision_undefined = true;
  }
  if (c.tp + c.fn > 0) {
    s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    s.recall_undefined = true;
  }
  // 2PR/(P+R) == 2tp/(2tp+fp+fn), which avoids a 0/0 when tp == 0.
  if (c.tp > 0) s.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  return s;
}

// ---------------------------------------------------------------------------
// Report

enum class Task { Aspd, Dcspiv };
enum class ModelKind { Lstm, Cnn, Lr };

inline constexpr std::array<Task, 2> kTasks = {Task::Aspd, Task::Dcspiv};
inline constexpr std::array<ModelKind, 3> kModelKinds = {ModelKind::Lstm, ModelKind::Cnn, ModelKind::Lr};

inline std::string_view task_name(Task t) { return t == Task::Aspd ? "ASPD" : "DCSPIV"; }

inline std::string_view model_kind_name(ModelKind m) {
  switch (m) {
    case ModelKind::Lstm: return "LSTM";
    case ModelKind::Cnn: return "CNN";
    case ModelKind::Lr: return "LR";
  }
  return "?";
}

inline Task parse_task(std::string_view s) {
  if (s == "ASPD" || s == "aspd") return Task::Aspd;
  if (s == "DCSPIV" || s == "dcspiv") return Task::Dcspiv;
  throw ConfigError("unknown task '" + std::string(s) + "'");
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "LSTM" || s == "lstm") return ModelKind::Lstm;
  if (s == "CNN" || s == "cnn") return ModelKind::Cnn;
  if (s == "LR" || s == "lr") return ModelKind::Lr;
  throw ConfigError("unknown model '" + std::string(s) + "'");
}

/// Train and test scores of one seeded run.
struct RunScores {
  std::uint64_t seed = 0;
  Scores train;
  Scores test;
};

inline constexpr std::array<std::string_view, 8> kReportRows = {
    "Average Training Accuracy", "Average Train Precision", "Average Training Recall",
    "Average Training F1-Score", "Average Test Accuracy",   "Average Test Precision",
    "Average Test Recall",       "Average Test F1-Score",
};

/// Averaged cell: the 8 report rows for one (task, model).
struct ReportCell {
  std::array<double, 8> mean{};
  std::size_t runs = 0;
};

inline ReportCell aggregate(std::span<const RunScores> runs) {
  if (runs.empty()) throw EmptyEvaluationError("aggregate needs at least one run");
  ReportCell cell;
  for (const auto& r : runs) {
    const auto tr = r.train.values();
    const auto te = r.test.values();
    for (std::size_t i = 0; i < 4; ++i) {
      cell.mean[i] += tr[i];
      cell.mean[4 + i] += te[i];
    }
  }
  for (auto& v : cell.mean) v /= static_cast<double>(runs.size());
  cell.runs = runs.size();
  return cell;
}

/// Per-run scores and averages for every (task, model) that was evaluated.
struct MetricReport {
  std::map<std::pair<Task, ModelKind>, std::vector<RunScores>> runs;

  std::map<std::pair<Task, ModelKind>, ReportCell> averaged() const {
    std::map<std::pair<Task, ModelKind>, ReportCell> out;
    for (const auto& [key, rs] : runs) out[key] = aggregate(rs);
    return out;
  }
};

namespace detail {
inline std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}
}  // namespace detail

/// 8 rows x 6 columns: (ASPD: LSTM, CNN, LR), (DCSPIV: LSTM, CNN, LR).
/// Cells that were not evaluated are left empty.
inline std::string report_csv(const MetricReport& report) {
  const auto cells = report.averaged();
  std::string out = "metric";
  for (Task t : kTasks) {
    for (ModelKind m : kModelKinds) out += "," + std::string(task_name(t)) + " " + std::string(model_kind_name(m));
  }
  out += '\n';
  for (std::size_t row = 0; row < kReportRows.size(); ++row) {
    out += kReportRows[row];
    for (Task t : kTasks) {
      for (ModelKind m : kModelKinds) {
        out += ',';
        if (auto it = cells.find({t, m}); it != cells.end()) out += detail::fixed(it->second.mean[row], 6);
      }
    }
    out += '\n';
  }
  return out;
}

inline std::string report_markdown(const MetricReport& report) {
  const auto cells = report.averaged();
  std::string out = "| | ASPD LSTM | ASPD CNN | ASPD LR | DCSPIV LSTM | DCSPIV CNN | DCSPIV LR |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (std::size_t row = 0; row < kReportRows.size(); ++row) {
    out += "| " + std::string(kReportRows[row]) + " |";
    for (Task t : kTasks) {
      for (ModelKind m : kModelKinds) {
        auto it = cells.find({t, m});
        out += " " + (it != cells.end() ? detail::fixed(it->second.mean[row], 4) : std::string("-")) + " |";
      }
    }
    out += '\n';
  }
  std::size_t runs = 0;
  for (const auto& [_, c] : cells) runs = std::max(runs, c.runs);
  out += "\nAveraged over " + std::to_string(runs) + " seeded run(s) per cell.\n";
  return out;
}

}  // namespace fundacast
