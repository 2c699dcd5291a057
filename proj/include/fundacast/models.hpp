#pragma once

// Logistic regression, stacked LSTM and 1D CNN classifiers, plus the
// two-headed (classification + intrinsic-value regression) variants.
// Training is full-batch Adam on the autodiff graph.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fundacast/autodiff.hpp"
#include "fundacast/error.hpp"
#include "fundacast/io.hpp"
#include "fundacast/metrics.hpp"
#include "fundacast/random.hpp"
#include "fundacast/tensor.hpp"

namespace fundacast {

enum class Architecture { Lr, LstmAspd, CnnAspd, LstmDcspiv, CnnDcspiv };

inline std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::Lr: return "LR";
    case Architecture::LstmAspd: return "LSTM_ASPD";
    case Architecture::CnnAspd: return "CNN_ASPD";
    case Architecture::LstmDcspiv: return "LSTM_DCSPIV";
    case Architecture::CnnDcspiv: return "CNN_DCSPIV";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  for (auto a : {Architecture::Lr, Architecture::LstmAspd, Architecture::CnnAspd, Architecture::LstmDcspiv,
                 Architecture::CnnDcspiv}) {
    if (architecture_name(a) == s) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

inline Architecture architecture_for(Task task, ModelKind kind) {
  switch (kind) {
    case ModelKind::Lr: return Architecture::Lr;
    case ModelKind::Lstm: return task == Task::Aspd ? Architecture::LstmAspd : Architecture::LstmDcspiv;
    case ModelKind::Cnn: return task == Task::Aspd ? Architecture::CnnAspd : Architecture::CnnDcspiv;
  }
  throw ConfigError("unknown model kind");
}

inline bool has_regression_head(Architecture a) {
  return a == Architecture::LstmDcspiv || a == Architecture::CnnDcspiv;
}

/// Logit heads train with BCE-with-logits; the others emit a sigmoid
/// probability and train with plain BCE.
inline bool has_logit_head(Architecture a) { return a == Architecture::Lr || a == Architecture::LstmAspd; }

struct ModelConfig {
  Architecture architecture = Architecture::Lr;
  std::size_t input_length = 73;
  std::size_t lstm_hidden = 32;
  std::size_t lstm_layers = 2;
  std::size_t dense_hidden = 64;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t kernel_size = 3;
  std::size_t pool_window = 2;
  double learning_rate = 1e-3;
  int epochs = 5000;
  std::uint64_t seed = 0;
  double classification_weight = 1.0;
  double regression_weight = 1.0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (input_length < 1 || lstm_hidden < 1 || lstm_layers < 1 || dense_hidden < 1) {
      throw ConfigError("layer sizes must be positive");
    }
    if (kernel_size % 2 == 0) throw ConfigError("kernel size must be odd");
    const bool cnn = architecture == Architecture::CnnAspd || architecture == Architecture::CnnDcspiv;
    if (cnn && (pool_window < 1 || input_length / pool_window / pool_window < 1)) {
      throw ConfigError("input too short for two pooling stages");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline ModelConfig default_config(Architecture a) {
  ModelConfig c;
  c.architecture = a;
  if (a == Architecture::LstmDcspiv) {
    c.lstm_hidden = 50;
    c.lstm_layers = 1;
  }
  return c;
}

using ParameterMap = std::map<std::string, Tensor>;

/// Model inputs: one row of scaled features per sample, plus labels and
/// (for two-headed models) scaled regression targets.
struct Batch {
  Tensor inputs;  // (N x L) or (N x L x 1)
  std::vector<double> labels;
  std::vector<double> targets;

  std::size_t rows() const { return inputs.rank() ? inputs.dim(0) : 0; }
};

// ---------------------------------------------------------------------------
// Parameters

namespace detail {

inline void uniform_init(Tensor& t, Rng& rng, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
}

inline std::size_t conv_output_length(const ModelConfig& c) { return c.input_length / c.pool_window / c.pool_window; }

}  // namespace detail

/// Seeded uniform initialization in +-1/sqrt(fan_in), layer by layer.
inline ParameterMap init_parameters(const ModelConfig& c) {
  c.validate();
  Rng rng(c.seed);
  ParameterMap p;
  auto make = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    detail::uniform_init(t, rng, fan_in);
    p.emplace(name, std::move(t));
  };
  auto make_dense = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    make(prefix + ".weight", {in, out}, in);
    make(prefix + ".bias", {out}, in);
  };
  const std::size_t h = c.lstm_hidden;
  switch (c.architecture) {
    case Architecture::Lr:
      make_dense("linear", c.input_length, 1);
      break;
    case Architecture::LstmAspd:
    case Architecture::LstmDcspiv:
      for (std::size_t l = 0; l < c.lstm_layers; ++l) {
        const std::size_t in = l == 0 ? 1 : h;
        const std::string prefix = "lstm" + std::to_string(l);
        make(prefix + ".w_input", {in, 4 * h}, in + h);
        make(prefix + ".w_hidden", {h, 4 * h}, in + h);
        make(prefix + ".bias", {4 * h}, in + h);
      }
      if (c.architecture == Architecture::LstmAspd) {
        make_dense("head", h, 1);
      } else {
        make_dense("dense", h, c.dense_hidden);
        make_dense("classifier", c.dense_hidden, 1);
        make_dense("regressor", c.dense_hidden, 1);
      }
      break;
    case Architecture::CnnAspd:
    case Architecture::CnnDcspiv: {
      const std::size_t k = c.kernel_size;
      make("conv1.weight", {c.conv1_channels, 1, k}, k);
      make("conv1.bias", {c.conv1_channels}, k);
      make("conv2.weight", {c.conv2_channels, c.conv1_channels, k}, c.conv1_channels * k);
      make("conv2.bias", {c.conv2_channels}, c.conv1_channels * k);
      const std::size_t flat = c.conv2_channels * detail::conv_output_length(c);
      make_dense("dense", flat, c.dense_hidden);
      make_dense("classifier", c.dense_hidden, 1);
      if (c.architecture == Architecture::CnnDcspiv) make_dense("regressor", c.dense_hidden, 1);
      break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass

struct ForwardResult {
  ad::Var classification;  // logit or probability, (N x 1)
  std::optional<ad::Var> regression;
  bool logit = false;
};

using ParameterVars = std::map<std::string, ad::Var>;

namespace detail {

inline const ad::Var& param(const ParameterVars& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw FormatError("missing parameter '" + name + "'");
  return it->second;
}

inline ad::Var dense_layer(const ParameterVars& v, const std::string& prefix, ad::Var x) {
  return ad::dense(x, param(v, prefix + ".weight"), param(v, prefix + ".bias"));
}

/// Final hidden state of the top layer of a stacked LSTM over (N x L x 1).
inline ad::Var lstm_stack(ad::Graph& g, const ModelConfig& c, const ParameterVars& v, const Tensor& inputs) {
  const std::size_t n = inputs.dim(0), len = inputs.dim(1);
  ad::Var seq = g.constant(inputs.reshaped({n, len, 1}));
  for (std::size_t l = 0; l < c.lstm_layers; ++l) {
    const std::string prefix = "lstm" + std::to_string(l);
    seq = ad::lstm_sequence(seq, param(v, prefix + ".w_input"), param(v, prefix + ".w_hidden"),
                            param(v, prefix + ".bias"));
  }
  return ad::sequence_step(seq, len - 1);
}

/// conv -> relu -> pool, twice, then flatten to (N x C2*L/4).
inline ad::Var cnn_trunk(ad::Graph& g, const ModelConfig& c, const ParameterVars& v, const Tensor& inputs) {
  const std::size_t n = inputs.dim(0), len = inputs.dim(1);
  ad::Var x = g.constant(inputs.reshaped({n, 1, len}));
  x = ad::max_pool1d(ad::relu(ad::conv1d_same(x, param(v, "conv1.weight"), param(v, "conv1.bias"))), c.pool_window);
  x = ad::max_pool1d(ad::relu(ad::conv1d_same(x, param(v, "conv2.weight"), param(v, "conv2.bias"))), c.pool_window);
  return ad::reshape(x, {n, x.value().dim(1) * x.value().dim(2)});
}

}  // namespace detail

inline void check_inputs(const ModelConfig& c, const Tensor& inputs) {
  const bool ok = (inputs.rank() == 2 || (inputs.rank() == 3 && inputs.dim(2) == 1)) && inputs.dim(0) > 0 &&
                  inputs.dim(1) == c.input_length;
  if (!ok) {
    throw ShapeError("expected inputs (N, " + std::to_string(c.input_length) + "[, 1]), got " +
                     shape_string(inputs.shape()));
  }
}

inline ForwardResult forward(ad::Graph& g, const ModelConfig& c, const ParameterVars& v, const Tensor& inputs) {
  check_inputs(c, inputs);
  const std::size_t n = inputs.dim(0);
  ForwardResult r;
  r.logit = has_logit_head(c.architecture);
  switch (c.architecture) {
    case Architecture::Lr:
      r.classification = detail::dense_layer(v, "linear", g.constant(inputs.reshaped({n, c.input_length})));
      break;
    case Architecture::LstmAspd:
      r.classification = detail::dense_layer(v, "head", detail::lstm_stack(g, c, v, inputs));
      break;
    case Architecture::CnnAspd: {
      ad::Var hidden = ad::relu(detail::dense_layer(v, "dense", detail::cnn_trunk(g, c, v, inputs)));
      r.classification = ad::sigmoid(detail::dense_layer(v, "classifier", hidden));
      break;
    }
    case Architecture::LstmDcspiv:
    case Architecture::CnnDcspiv: {
      ad::Var trunk = c.architecture == Architecture::LstmDcspiv ? detail::lstm_stack(g, c, v, inputs)
                                                                 : detail::cnn_trunk(g, c, v, inputs);
      ad::Var hidden = ad::relu(detail::dense_layer(v, "dense", trunk));
      r.classification = ad::sigmoid(detail::dense_layer(v, "classifier", hidden));
      r.regression = detail::dense_layer(v, "regressor", hidden);
      break;
    }
  }
  return r;
}

/// Total training loss: BCE (logit or probability space) plus, for
/// two-headed models, the weighted MSE of the regression head.
inline ad::Var loss(const ModelConfig& c, const ForwardResult& out, const Batch& batch) {
  ad::Var cls = out.logit ? ad::bce_with_logits(out.classification, batch.labels)
                          : ad::bce(out.classification, batch.labels);
  if (!out.regression) return cls;
  if (batch.targets.size() != batch.labels.size()) {
    throw ShapeError("two-headed model needs one regression target per row");
  }
  return ad::weighted_sum(cls, c.classification_weight, ad::mse(*out.regression, batch.targets),
                          c.regression_weight);
}

inline ParameterVars bind_parameters(ad::Graph& g, const ParameterMap& params) {
  ParameterVars vars;
  for (const auto& [name, t] : params) vars.emplace(name, g.leaf(t));
  return vars;
}

struct LossAndGradients {
  double loss = 0.0;
  ParameterMap gradients;
  std::vector<double> probabilities;
};

inline std::vector<double> to_probabilities(const ForwardResult& out) {
  const Tensor& v = out.classification.value();
  std::vector<double> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = out.logit ? ad::detail::stable_sigmoid(v[i]) : v[i];
  return p;
}

inline LossAndGradients loss_and_gradients(const ModelConfig& c, const ParameterMap& params, const Batch& batch) {
  ad::Graph g;
  const auto vars = bind_parameters(g, params);
  const auto out = forward(g, c, vars, batch.inputs);
  ad::Var total = loss(c, out, batch);
  g.backward(total);
  LossAndGradients r;
  r.loss = total.value()[0];
  r.probabilities = to_probabilities(out);
  for (const auto& [name, var] : vars) {
    r.gradients.emplace(name, g.has_grad(var.id) ? g.grad(var.id) : Tensor(params.at(name).shape()));
  }
  return r;
}

inline double evaluate_loss(const ModelConfig& c, const ParameterMap& params, const Batch& batch) {
  ad::Graph g;
  const auto vars = bind_parameters(g, params);
  return loss(c, forward(g, c, vars, batch.inputs), batch).value()[0];
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}

  void step(ParameterMap& params, const ParameterMap& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
      const Tensor& g = grads.at(name);
      auto [mit, _] = m_.try_emplace(name, p.shape());
      auto [vit, __] = v_.try_emplace(name, p.shape());
      Tensor& m = mit->second;
      Tensor& v = vit->second;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
        v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
        p[i] -= options_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  ParameterMap m_;
  ParameterMap v_;
};

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedModel {
  ModelConfig config;
  ParameterMap parameters;
  std::vector<EpochRecord> history;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Probability >= 0.5 is class 1.
inline int threshold_label(double probability) { return probability >= 0.5 ? 1 : 0; }

inline std::vector<int> threshold_labels(std::span<const double> probabilities) {
  std::vector<int> out(probabilities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = threshold_label(probabilities[i]);
  return out;
}

inline std::vector<int> as_int_labels(std::span<const double> labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i] >= 0.5 ? 1 : 0;
  return out;
}

namespace detail {

inline std::string first_non_finite(const ParameterMap& m) {
  for (const auto& [name, t] : m) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return name;
    }
  }
  return {};
}

}  // namespace detail

/// Full-batch Adam for config.epochs. History entry e holds the loss and
/// train metrics measured before update e.
inline TrainedModel train(const ModelConfig& config, const Batch& batch) {
  config.validate();
  if (batch.rows() == 0) throw InsufficientDataError("empty training batch");
  check_inputs(config, batch.inputs);
  if (batch.labels.size() != batch.rows()) throw ShapeError("one label per row required");

  TrainedModel model;
  model.config = config;
  model.parameters = init_parameters(config);
  model.history.reserve(static_cast<std::size_t>(config.epochs));
  Adam adam(AdamOptions{.learning_rate = config.learning_rate});
  const auto targets = as_int_labels(batch.labels);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto step = loss_and_gradients(config, model.parameters, batch);
    if (!std::isfinite(step.loss)) {
      throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                            " (parameter '" + detail::first_non_finite(model.parameters) + "')");
    }
    if (auto bad = detail::first_non_finite(step.gradients); !bad.empty()) {
      throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) + " for parameter '" + bad + "'");
    }
    const auto s = scores(confusion(threshold_labels(step.probabilities), targets));
    model.history.push_back({epoch, step.loss, s.accuracy, s.precision, s.recall, s.f1});
    adam.step(model.parameters, step.gradients);
    if (auto bad = detail::first_non_finite(model.parameters); !bad.empty()) {
      throw DivergenceError("parameter '" + bad + "' became non-finite at epoch " + std::to_string(epoch));
    }
  }
  return model;
}

struct Predictions {
  std::vector<double> probabilities;
  std::vector<int> labels;
  std::vector<double> values;  // regression head, two-headed models only
};

inline Predictions predict(const TrainedModel& model, const Tensor& inputs) {
  ad::Graph g;
  const auto vars = bind_parameters(g, model.parameters);
  const auto out = forward(g, model.config, vars, inputs);
  Predictions p;
  p.probabilities = to_probabilities(out);
  p.labels = threshold_labels(p.probabilities);
  if (out.regression) p.values = out.regression->value().values();
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["architecture"] = architecture_name(c.architecture);
  j["input_length"] = c.input_length;
  j["lstm_hidden"] = c.lstm_hidden;
  j["lstm_layers"] = c.lstm_layers;
  j["dense_hidden"] = c.dense_hidden;
  j["conv1_channels"] = c.conv1_channels;
  j["conv2_channels"] = c.conv2_channels;
  j["kernel_size"] = c.kernel_size;
  j["pool_window"] = c.pool_window;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["classification_weight"] = c.classification_weight;
  j["regression_weight"] = c.regression_weight;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  c.input_length = j.at("input_length").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.dense_hidden = j.at("dense_hidden").get<std::size_t>();
  c.conv1_channels = j.at("conv1_channels").get<std::size_t>();
  c.conv2_channels = j.at("conv2_channels").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.pool_window = j.at("pool_window").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.classification_weight = j.at("classification_weight").get<double>();
  c.regression_weight = j.at("regression_weight").get<double>();
  return c;
}

inline nlohmann::ordered_json model_to_json(const TrainedModel& m) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_to_json(m.config);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [name, t] : m.parameters) {
    params[name] = {{"shape", t.shape()}, {"values", t.values()}};
  }
  j["parameters"] = std::move(params);
  auto history = nlohmann::ordered_json::array();
  for (const auto& e : m.history) {
    history.push_back({{"epoch", e.epoch},
                       {"loss", e.loss},
                       {"accuracy", e.accuracy},
                       {"precision", e.precision},
                       {"recall", e.recall},
                       {"f1", e.f1}});
  }
  j["history"] = std::move(history);
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("format_version")) throw FormatError("checkpoint has no format_version");
    const int version = j.at("format_version").get<int>();
    if (version > kCheckpointFormatVersion) {
      throw VersionError("checkpoint format " + std::to_string(version) + " is newer than supported " +
                         std::to_string(kCheckpointFormatVersion));
    }
    if (version < 1) throw FormatError("invalid checkpoint format version");
    TrainedModel m;
    m.config = config_from_json(j.at("config"));
    for (const auto& [name, entry] : j.at("parameters").items()) {
      m.parameters.emplace(name, Tensor(entry.at("shape").get<Shape>(), entry.at("values").get<std::vector<double>>()));
    }
    const auto expected = init_parameters(m.config);
    for (const auto& [name, t] : expected) {
      auto it = m.parameters.find(name);
      if (it == m.parameters.end() || it->second.shape() != t.shape()) {
        throw FormatError("checkpoint parameter '" + name + "' missing or misshapen");
      }
    }
    if (m.parameters.size() != expected.size()) throw FormatError("checkpoint has unexpected parameters");
    for (const auto& e : j.at("history")) {
      m.history.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(), e.at("accuracy").get<double>(),
                           e.at("precision").get<double>(), e.at("recall").get<double>(), e.at("f1").get<double>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model).dump());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace fundacast
