#pragma once

// Feature assembly (44 raw statement lines, 11 ratios, 18 DCF attributes),
// train-fitted median fill and z-score scaling, sequence shaping, and the
// stratified train/test split.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fundacast/error.hpp"
#include "fundacast/ingest.hpp"
#include "fundacast/random.hpp"
#include "fundacast/ratios.hpp"
#include "fundacast/schema.hpp"
#include "fundacast/tensor.hpp"
#include "fundacast/valuation.hpp"

namespace fundacast {

inline constexpr std::size_t kRatioFeatureOffset = kRawFeatureCount;
inline constexpr std::size_t kDcfFeatureOffset = kRatioFeatureOffset + RatioSet::size();
inline constexpr std::size_t kFeatureCount = kDcfFeatureOffset + kDcfAttributeNames.size();
static_assert(kFeatureCount == 73);

/// Fill sentinel for MISSING line items and UNDEFINED ratios.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Canonical feature order: income, balance, cash-flow lines in schema
/// order, then ratios, then DCF attributes.
inline std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  names.reserve(kFeatureCount);
  for (auto k : kIncomeKeys) names.push_back("income/" + std::string(k));
  for (auto k : kBalanceKeys) names.push_back("balance/" + std::string(k));
  for (auto k : kCashflowKeys) names.push_back("cashflow/" + std::string(k));
  for (auto k : kRatioNames) names.push_back("ratio/" + std::string(k));
  for (auto k : kDcfAttributeNames) names.push_back("dcf/" + std::string(k));
  return names;
}

/// Ratios and valuation of one company-year. The valuation is absent when
/// the statements cannot support one; `valuation_error` then says why.
struct CompanyYearAnalysis {
  std::string ticker;
  int year = 0;
  RatioSet ratios;
  std::optional<DcfValuation> valuation;
  std::string valuation_error;
};

inline CompanyYearAnalysis analyze_company_year(const CompanyRecord& company, int year,
                                                const ValuationContext& context) {
  const AnnualStatement* stmt = company.statement_for(year);
  if (!stmt) throw NoDataError(company.ticker + " has no statement for " + std::to_string(year));
  CompanyYearAnalysis a;
  a.ticker = company.ticker;
  a.year = year;
  a.ratios = compute_ratio_set(*stmt);
  try {
    a.valuation = context.value(company, year);
  } catch (const Error& e) {
    a.valuation_error = e.what();
  }
  return a;
}

struct FeatureVector {
  std::string ticker;
  int year = 0;
  std::vector<double> values;  // kFeatureCount entries, kMissing where unknown
};

inline FeatureVector assemble_features(const CompanyRecord& company, int year, const CompanyYearAnalysis& analysis) {
  if (analysis.ticker != company.ticker || analysis.year != year) {
    throw AlignmentError("analysis for " + analysis.ticker + " " + std::to_string(analysis.year) +
                         " does not match " + company.ticker + " " + std::to_string(year));
  }
  const AnnualStatement* stmt = company.statement_for(year);
  if (!stmt) throw AlignmentError(company.ticker + " has no statement for " + std::to_string(year));
  FeatureVector fv{company.ticker, year, {}};
  fv.values.reserve(kFeatureCount);
  auto push = [&](const std::optional<double>& v) { fv.values.push_back(v ? *v : kMissing); };
  for (const auto& v : stmt->income) push(v);
  for (const auto& v : stmt->balance) push(v);
  for (const auto& v : stmt->cashflow) push(v);
  for (const auto& v : analysis.ratios.values()) push(v);
  if (analysis.valuation) {
    for (const auto& v : dcf_attributes(*analysis.valuation)) push(v);
  } else {
    fv.values.resize(kFeatureCount, kMissing);
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Missing-value fill

using FeatureRows = std::vector<std::vector<double>>;

/// Per-feature median of the non-missing training values; 0 for a column
/// with no values at all.
inline std::vector<double> fit_fill_medians(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return {};
  const std::size_t width = rows.front().size();
  std::vector<double> medians(width, 0.0);
  std::vector<double> column;
  for (std::size_t j = 0; j < width; ++j) {
    column.clear();
    for (const auto& r : rows) {
      if (!is_missing(r[j])) column.push_back(r[j]);
    }
    if (column.empty()) continue;
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    medians[j] = n % 2 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return medians;
}

inline std::vector<double> fill_row(std::span<const double> row, std::span<const double> medians) {
  if (row.size() != medians.size()) throw ShapeError("fill: row width does not match medians");
  std::vector<double> out(row.begin(), row.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (is_missing(out[j])) out[j] = medians[j];
  }
  return out;
}

inline FeatureRows fill_missing(std::span<const std::vector<double>> rows, std::span<const double> medians) {
  FeatureRows out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(fill_row(r, medians));
  return out;
}

/// Fits medians on `rows` themselves and fills them.
inline FeatureRows fill_missing(std::span<const std::vector<double>> rows) {
  return fill_missing(rows, fit_fill_medians(rows));
}

// ---------------------------------------------------------------------------
// Standard scaling

struct ScalerState {
  std::vector<double> mean;
  std::vector<double> stddev;  // population

  friend bool operator==(const ScalerState&, const ScalerState&) = default;
};

inline ScalerState fit_scaler(std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) throw InsufficientDataError("scaler needs at least two training rows");
  const std::size_t width = rows.front().size();
  ScalerState s{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != width) throw ShapeError("scaler: ragged rows");
    for (std::size_t j = 0; j < width; ++j) {
      if (!std::isfinite(r[j])) throw PreconditionError("scaler: fill missing values before fitting");
      s.mean[j] += r[j];
    }
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < width; ++j) s.stddev[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  }
  for (auto& v : s.stddev) v = std::sqrt(v / n);
  return s;
}

/// Zero-variance columns map to 0.
inline std::vector<double> apply_scaler(const ScalerState& s, std::span<const double> row) {
  if (row.size() != s.mean.size()) throw ShapeError("scaler: row width mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = s.stddev[j] > 0.0 ? (row[j] - s.mean[j]) / s.stddev[j] : 0.0;
  }
  return out;
}

inline std::vector<double> unscale(const ScalerState& s, std::span<const double> row) {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * s.stddev[j] + s.mean[j];
  return out;
}

// ---------------------------------------------------------------------------
// Sequence shaping

/// One feature vector as a (L x 1) sequence along the feature axis.
inline Tensor reshape_sequence(std::span<const double> row) {
  return Tensor({row.size(), 1}, std::vector<double>(row.begin(), row.end()));
}

/// Stacks rows into an (N x L x 1) batch.
inline Tensor sequence_batch(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw ShapeError("empty batch");
  const std::size_t len = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * len);
  for (const auto& r : rows) {
    if (r.size() != len) throw ShapeError("ragged batch rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), len, 1}, std::move(data));
}

// ---------------------------------------------------------------------------
// Split

struct DatasetSplit {
  std::vector<std::size_t> train;  // ascending positions into the sample list
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Stratified by label. The test set holds round(N * fraction) samples,
/// apportioned between classes by largest remainder; samples within a class
/// are drawn by a seeded shuffle.
inline DatasetSplit stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw PreconditionError("split fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValueError("split labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  if (by_class[0].size() < 2 || by_class[1].size() < 2) {
    throw InsufficientDataError("split needs at least two samples of each class");
  }
  const std::size_t total_test = static_cast<std::size_t>(std::llround(labels.size() * test_fraction));
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(by_class[c].size()) * test_fraction;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < total_test) {
    const std::size_t c = remainder[1] > remainder[0] ? 1 : 0;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  for (std::size_t c = 0; c < 2; ++c) {
    quota[c] = std::clamp<std::size_t>(quota[c], 1, by_class[c].size() - 1);
  }

  Rng rng(seed);
  DatasetSplit split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& members = by_class[c];
    rng.shuffle(std::span<std::size_t>(members));
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Samples and per-run preparation

struct Sample {
  std::string ticker;
  int year = 0;
  std::vector<double> features;  // raw, unscaled, kMissing where unknown
  int aspd = 0;
  std::optional<int> dcspiv;
  std::optional<double> intrinsic;
};

/// Scaled train/test matrices for one seeded split, with the statistics
/// that produced them. Every statistic is fitted on training rows only.
struct PreparedRun {
  DatasetSplit split;
  std::vector<double> fill_medians;
  ScalerState scaler;
  double target_mean = 0.0;
  double target_stddev = 0.0;
  FeatureRows train_rows;
  FeatureRows test_rows;
  std::vector<double> train_labels;
  std::vector<double> test_labels;
  std::vector<double> train_targets;
  std::vector<double> test_targets;
};

inline double scale_target(double v, double mean, double stddev) { return stddev > 0.0 ? (v - mean) / stddev : 0.0; }

/// `rows`, `labels` and optional `targets` are aligned; `split` indexes them.
inline PreparedRun prepare_run(std::span<const std::vector<double>> rows, std::span<const int> labels,
                               std::span<const double> targets, const DatasetSplit& split) {
  PreparedRun run;
  run.split = split;
  FeatureRows train_raw, test_raw;
  for (auto i : split.train) train_raw.push_back(rows[i]);
  for (auto i : split.test) test_raw.push_back(rows[i]);
  run.fill_medians = fit_fill_medians(train_raw);
  const auto train_filled = fill_missing(train_raw, run.fill_medians);
  run.scaler = fit_scaler(train_filled);
  for (const auto& r : train_filled) run.train_rows.push_back(apply_scaler(run.scaler, r));
  for (const auto& r : test_raw) run.test_rows.push_back(apply_scaler(run.scaler, fill_row(r, run.fill_medians)));
  for (auto i : split.train) run.train_labels.push_back(labels[i]);
  for (auto i : split.test) run.test_labels.push_back(labels[i]);
  if (!targets.empty()) {
    double sum = 0.0, sq = 0.0;
    for (auto i : split.train) sum += targets[i];
    run.target_mean = sum / static_cast<double>(split.train.size());
    for (auto i : split.train) sq += (targets[i] - run.target_mean) * (targets[i] - run.target_mean);
    run.target_stddev = std::sqrt(sq / static_cast<double>(split.train.size()));
    for (auto i : split.train) run.train_targets.push_back(scale_target(targets[i], run.target_mean, run.target_stddev));
    for (auto i : split.test) run.test_targets.push_back(scale_target(targets[i], run.target_mean, run.target_stddev));
  }
  return run;
}

}  // namespace fundacast
