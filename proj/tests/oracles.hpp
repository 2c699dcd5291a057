#pragma once

// Independent reference implementations the library is checked against.
// They are written straight from the textbook definitions and share no code
// with the library beyond plain data types.

#include <cmath>
#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fundacast/models.hpp"
#include "support.hpp"

namespace oracle {

using Lines = std::map<std::string, std::optional<double>>;
using Opt = std::optional<double>;

inline Opt div(Opt a, Opt b) {
  if (!a || !b || *b == 0.0) return std::nullopt;
  return *a / *b;
}
inline Opt sub(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

/// The eleven ratios, in RatioSet order.
inline std::vector<Opt> ratios(const Lines& l) {
  auto at = [&](const char* k) { return l.at(k); };
  const Opt rev = at("income/Total Revenue");
  const Opt gross = sub(rev, at("income/Cost of Revenue"));
  const Opt operating = sub(sub(rev, at("income/Cost of Revenue")), at("income/Operating Expenses"));
  return {
      div(at("balance/Current Assets"), at("balance/Current Liabilities")),
      div(at("balance/Cash & Cash Equiv"), at("balance/Current Liabilities")),
      div(sub(at("balance/Current Assets"), at("balance/Inventory")), at("balance/Current Liabilities")),
      div(at("balance/Total Debt"), at("balance/Total Asset")),
      div(at("balance/Total Debt"), at("balance/Stockholders Equity")),
      div(gross, rev),
      div(operating, rev),
      div(at("income/EBITDA"), rev),
      div(at("income/Net Income"), rev),
      div(at("income/EBIT"), at("income/Net Interest Income")),
      div(at("cashflow/Free Cash Flow"), rev),
  };
}

inline int aspd(double p_ab, double p_ae) { return p_ae >= p_ab ? 1 : 0; }
inline int dcspiv(double intrinsic, double p_cur) { return intrinsic >= p_cur ? 1 : 0; }

struct Counts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Counts recount(const std::vector<int>& pred, const std::vector<int>& truth) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++c.tp;
    if (pred[i] == 1 && truth[i] == 0) ++c.fp;
    if (pred[i] == 0 && truth[i] == 0) ++c.tn;
    if (pred[i] == 0 && truth[i] == 1) ++c.fn;
  }
  return c;
}

struct Metrics {
  double accuracy, precision, recall, f1;
};

inline Metrics metrics(const Counts& c) {
  const double total = static_cast<double>(c.tp + c.fp + c.tn + c.fn);
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / total;
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  // harmonic mean written in counts, which is exact where P and R are
  m.f1 = c.tp == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  return m;
}

/// Sum of forecast free cash flows with no discounting: the value of the
/// firm at r = 0 and a zero terminal multiple.
inline double undiscounted_fcf_sum(double base_revenue, double base_ebitda, double base_fcf, double growth,
                                   int horizon) {
  double sum = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const double revenue = base_revenue * std::pow(1.0 + growth, t);
    const double ebitda = revenue * base_ebitda / base_revenue;
    sum += ebitda * base_fcf / base_ebitda;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Finite differences

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-4;
/// Below this magnitude a gradient entry is compared absolutely; central
/// differences at step 1e-5 cannot resolve smaller values.
inline constexpr double kGradientFloor = 1e-6;

inline double gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradientFloor});
}

struct GradientReport {
  double worst = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares every entry of every parameter gradient with a central
/// difference of the total loss.
inline GradientReport check_gradients(const fundacast::ModelConfig& config, fundacast::ParameterMap params,
                                      const fundacast::Batch& batch) {
  const auto analytic = fundacast::loss_and_gradients(config, params, batch).gradients;
  GradientReport r;
  for (auto& [name, tensor] : params) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + kFiniteDifferenceStep;
      const double up = fundacast::evaluate_loss(config, params, batch);
      tensor[i] = saved - kFiniteDifferenceStep;
      const double down = fundacast::evaluate_loss(config, params, batch);
      tensor[i] = saved;
      const double numeric = (up - down) / (2.0 * kFiniteDifferenceStep);
      const double err = gradient_error(analytic.at(name)[i], numeric);
      ++r.checked;
      if (err > r.worst) {
        r.worst = err;
        r.worst_parameter = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

/// Small versions of each architecture so every parameter entry can be
/// checked by finite differences in well under a second.
inline fundacast::ModelConfig toy_config(fundacast::Architecture a, std::uint64_t seed) {
  auto c = fundacast::default_config(a);
  c.seed = seed;
  switch (a) {
    case fundacast::Architecture::Lr:
      c.input_length = 6;
      break;
    case fundacast::Architecture::LstmAspd:
      c.input_length = 4;
      c.lstm_hidden = 3;
      c.lstm_layers = 2;
      break;
    case fundacast::Architecture::LstmDcspiv:
      c.input_length = 4;
      c.lstm_hidden = 4;
      c.lstm_layers = 1;
      c.dense_hidden = 5;
      break;
    case fundacast::Architecture::CnnAspd:
    case fundacast::Architecture::CnnDcspiv:
      c.input_length = 8;
      c.conv1_channels = 2;
      c.conv2_channels = 3;
      c.dense_hidden = 4;
      break;
  }
  return c;
}

inline fundacast::Batch random_batch(const fundacast::ModelConfig& c, fundacast::Rng& rng, std::size_t rows) {
  fundacast::Batch b;
  b.inputs = fundacast::Tensor({rows, c.input_length, 1});
  for (auto& v : b.inputs.values()) v = rng.normal();
  for (std::size_t i = 0; i < rows; ++i) {
    b.labels.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
    if (fundacast::has_regression_head(c.architecture)) b.targets.push_back(rng.normal());
  }
  return b;
}

/// Smallest distance from any ReLU input to zero, or from a max-pool winner
/// to its runner-up. A central difference is only a derivative estimate when
/// its whole stencil stays on one side of these corners.
inline double kink_distance(const fundacast::ModelConfig& c, const fundacast::ParameterMap& params,
                            const fundacast::Batch& batch) {
  namespace ad = fundacast::ad;
  using fundacast::Architecture;
  double d = std::numeric_limits<double>::infinity();
  auto relu_inputs = [&](const fundacast::Tensor& t) {
    for (double v : t.values()) d = std::min(d, std::abs(v));
  };
  auto pool_gaps = [&](const fundacast::Tensor& t, std::size_t w) {
    const std::size_t rows = t.dim(0) * t.dim(1), len = t.dim(2);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t p = 0; p + w <= len; p += w) {
        std::vector<double> win(t.values().begin() + static_cast<std::ptrdiff_t>(r * len + p),
                                t.values().begin() + static_cast<std::ptrdiff_t>(r * len + p + w));
        std::sort(win.rbegin(), win.rend());
        if (win[0] > 0.0) d = std::min(d, win[0] - win[1]);
      }
    }
  };
  if (c.architecture == Architecture::Lr || c.architecture == Architecture::LstmAspd) return d;

  ad::Graph g;
  const auto v = fundacast::bind_parameters(g, params);
  ad::Var trunk;
  if (c.architecture == Architecture::LstmDcspiv) {
    trunk = fundacast::detail::lstm_stack(g, c, v, batch.inputs);
  } else {
    const std::size_t n = batch.inputs.dim(0), len = batch.inputs.dim(1);
    ad::Var x = g.constant(batch.inputs.reshaped({n, 1, len}));
    for (const char* layer : {"conv1", "conv2"}) {
      const std::string name = layer;
      ad::Var a = ad::conv1d_same(x, v.at(name + ".weight"), v.at(name + ".bias"));
      relu_inputs(a.value());
      ad::Var r = ad::relu(a);
      pool_gaps(r.value(), c.pool_window);
      x = ad::max_pool1d(r, c.pool_window);
    }
    trunk = ad::reshape(x, {n, x.value().dim(1) * x.value().dim(2)});
  }
  relu_inputs(fundacast::detail::dense_layer(v, "dense", trunk).value());
  return d;
}

/// Draws must keep every corner at least this far away; parameter steps of
/// 1e-5 on O(1) inputs move activations by far less.
inline constexpr double kKinkMargin = 1e-3;

struct GradientCase {
  fundacast::ModelConfig config;
  fundacast::ParameterMap params;
  fundacast::Batch batch;
  std::size_t rejected = 0;  // draws discarded for sitting near a corner
};

/// A random toy model and batch on which the loss is smooth around the draw.
inline GradientCase smooth_case(fundacast::Architecture a, fundacast::Rng& rng, std::size_t rows) {
  GradientCase gc;
  for (;;) {
    gc.config = toy_config(a, rng.below(1u << 30));
    gc.params = fundacast::init_parameters(gc.config);
    gc.batch = random_batch(gc.config, rng, rows);
    if (kink_distance(gc.config, gc.params, gc.batch) >= kKinkMargin) return gc;
    ++gc.rejected;
  }
}

inline constexpr std::array<fundacast::Architecture, 5> kArchitectures = {
    fundacast::Architecture::Lr, fundacast::Architecture::LstmAspd, fundacast::Architecture::CnnAspd,
    fundacast::Architecture::LstmDcspiv, fundacast::Architecture::CnnDcspiv};

}  // namespace oracle
