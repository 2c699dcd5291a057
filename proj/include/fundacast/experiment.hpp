#pragma once

// End-to-end pipeline: ingest -> ratios/valuation -> labels -> features ->
// train -> evaluate -> report. Every stage reads and writes a re-loadable
// artifact, so running the stages one by one gives the same bytes as `run`.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fundacast/dataset.hpp"
#include "fundacast/error.hpp"
#include "fundacast/ingest.hpp"
#include "fundacast/io.hpp"
#include "fundacast/labeling.hpp"
#include "fundacast/metrics.hpp"
#include "fundacast/models.hpp"
#include "fundacast/valuation.hpp"

namespace fundacast {

/// Exit codes of the CLI.
enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  Config = 2,
  Ingest = 3,
  Valuation = 4,
  Label = 5,
  Features = 6,
  Train = 7,
  Evaluate = 8,
  Report = 9,
};

/// An error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, ExitCode code, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)), code_(code) {}
  const std::string& stage() const { return stage_; }
  ExitCode code() const { return code_; }

 private:
  std::string stage_;
  ExitCode code_;
};

template <typename F>
auto in_stage(const char* stage, ExitCode code, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, code, e.what());
  }
}

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "out";
  std::vector<Task> tasks = {Task::Aspd, Task::Dcspiv};
  std::vector<ModelKind> models = {ModelKind::Lstm, ModelKind::Cnn, ModelKind::Lr};
  double test_fraction = 0.2;
  std::vector<std::uint64_t> seeds;
  int horizon_years = kDefaultHorizonYears;
  std::optional<Date> as_of;
  std::map<Architecture, ModelConfig> model_configs;
  std::size_t workers = 1;

  std::size_t runs() const { return seeds.size(); }
};

inline constexpr std::uint64_t kDefaultBaseSeed = 42;
inline constexpr std::size_t kDefaultRuns = 10;

inline std::vector<std::uint64_t> consecutive_seeds(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t k = 0; k < count; ++k) s[k] = base + k;
  return s;
}

namespace detail {

inline void apply_hyperparameters(ModelConfig& c, const nlohmann::json& j, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    auto size = [&] {
      if (!value.is_number_integer() || value.get<long long>() < 1) {
        throw ConfigError(where + "." + key + " must be a positive integer");
      }
      return value.get<std::size_t>();
    };
    auto real = [&] {
      if (!value.is_number()) throw ConfigError(where + "." + key + " must be a number");
      return value.get<double>();
    };
    if (key == "lstm_hidden") c.lstm_hidden = size();
    else if (key == "lstm_layers") c.lstm_layers = size();
    else if (key == "dense_hidden") c.dense_hidden = size();
    else if (key == "conv1_channels") c.conv1_channels = size();
    else if (key == "conv2_channels") c.conv2_channels = size();
    else if (key == "kernel_size") c.kernel_size = size();
    else if (key == "pool_window") c.pool_window = size();
    else if (key == "epochs") c.epochs = static_cast<int>(size());
    else if (key == "learning_rate") c.learning_rate = real();
    else if (key == "classification_weight") c.classification_weight = real();
    else if (key == "regression_weight") c.regression_weight = real();
    else throw ConfigError("unknown hyperparameter " + where + "." + key);
  }
}

}  // namespace detail

/// Relative paths resolve against `base_dir` (the config file's directory).
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {"data_dir", "output_dir",    "task",  "models",
                                                 "test_fraction", "runs",     "seed",  "seeds",
                                                 "epochs",   "learning_rate", "horizon_years", "as_of",
                                                 "hyperparameters", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };
  try {
    if (!j.contains("data_dir")) throw ConfigError("config needs data_dir");
    c.data_dir = resolve(j.at("data_dir").get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("task")) {
      const auto t = j.at("task").get<std::string>();
      if (t == "both" || t == "BOTH") c.tasks = {Task::Aspd, Task::Dcspiv};
      else c.tasks = {parse_task(t)};
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) {
        const auto kind = parse_model_kind(m.get<std::string>());
        if (std::find(c.models.begin(), c.models.end(), kind) == c.models.end()) c.models.push_back(kind);
      }
      if (c.models.empty()) throw ConfigError("models must not be empty");
      std::sort(c.models.begin(), c.models.end());
    }
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
    std::size_t runs = j.contains("runs") ? j.at("runs").get<std::size_t>() : kDefaultRuns;
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (j.contains("seeds")) {
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (c.seeds.size() != runs) throw ConfigError("seeds list length must equal runs");
    } else {
      c.seeds = consecutive_seeds(j.contains("seed") ? j.at("seed").get<std::uint64_t>() : kDefaultBaseSeed, runs);
    }
    if (j.contains("horizon_years")) c.horizon_years = j.at("horizon_years").get<int>();
    if (c.horizon_years < 1) throw ConfigError("horizon_years must be at least 1");
    if (j.contains("as_of") && !j.at("as_of").is_null()) c.as_of = parse_date(j.at("as_of").get<std::string>());
    if (j.contains("workers")) c.workers = std::max<std::size_t>(1, j.at("workers").get<std::size_t>());

    for (auto a : {Architecture::Lr, Architecture::LstmAspd, Architecture::CnnAspd, Architecture::LstmDcspiv,
                   Architecture::CnnDcspiv}) {
      ModelConfig mc = default_config(a);
      mc.input_length = kFeatureCount;
      if (j.contains("epochs")) mc.epochs = j.at("epochs").get<int>();
      if (j.contains("learning_rate")) mc.learning_rate = j.at("learning_rate").get<double>();
      c.model_configs[a] = mc;
    }
    if (j.contains("hyperparameters")) {
      for (const auto& [name, overrides] : j.at("hyperparameters").items()) {
        const auto a = parse_architecture(name);
        detail::apply_hyperparameters(c.model_configs[a], overrides, name);
      }
    }
    for (const auto& [_, mc] : c.model_configs) mc.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

/// Checks that referenced paths exist.
inline void validate_paths(const ExperimentConfig& c) {
  if (!std::filesystem::is_directory(c.data_dir)) throw ConfigError("data_dir does not exist: " + c.data_dir.string());
}

/// FUNDACAST_WORKERS, when set, caps the number of concurrent training runs.
inline std::size_t worker_count(std::size_t requested) {
  if (const char* env = std::getenv("FUNDACAST_WORKERS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) requested = std::min<std::size_t>(requested, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, requested);
}

/// Runs fn(0..count-1) on up to `workers` threads. Results must be written
/// to per-index slots; the first failing index's exception is rethrown.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < std::min(workers, count); ++w) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Stages

struct LoadedUniverse {
  std::vector<CompanyRecord> companies;
  UniverseManifest manifest;
};

inline LoadedUniverse stage_ingest(const std::filesystem::path& data_dir) {
  return in_stage("ingest", ExitCode::Ingest, [&] {
    LoadedUniverse u;
    u.companies = load_universe(data_dir);
    u.manifest = load_manifest(data_dir);
    for (const auto& c : u.companies) {
      if (!u.manifest.find(c.ticker)) throw SchemaError("universe.json has no entry for " + c.ticker);
    }
    return u;
  });
}

inline nlohmann::ordered_json ingest_summary(const LoadedUniverse& u) {
  nlohmann::ordered_json j;
  auto companies = nlohmann::ordered_json::array();
  std::size_t years = 0;
  for (const auto& c : u.companies) {
    std::vector<int> fy;
    for (const auto& s : c.statements) fy.push_back(s.fiscal_year);
    years += fy.size();
    companies.push_back({{"ticker", c.ticker},
                         {"sector", c.sector},
                         {"fiscal_years", fy},
                         {"price_observations", c.prices.observations.size()}});
  }
  j["companies"] = std::move(companies);
  j["company_count"] = u.companies.size();
  j["company_years"] = years;
  return j;
}

inline std::vector<CompanyYearAnalysis> stage_analyze(const LoadedUniverse& u, int horizon_years) {
  return in_stage("valuation", ExitCode::Valuation, [&] {
    ValuationContext ctx(u.companies, u.manifest, horizon_years);
    std::vector<CompanyYearAnalysis> out;
    for (const auto& c : u.companies) {
      for (const auto& s : c.statements) out.push_back(analyze_company_year(c, s.fiscal_year, ctx));
    }
    return out;
  });
}

/// One label row per company-year that has prices in its fiscal year.
inline std::vector<LabelRecord> stage_label(const LoadedUniverse& u, const std::vector<CompanyYearAnalysis>& analyses,
                                            const std::optional<Date>& as_of) {
  return in_stage("label", ExitCode::Label, [&] {
    std::vector<LabelRecord> out;
    for (const auto& a : analyses) {
      const CompanyRecord* company = nullptr;
      for (const auto& c : u.companies) {
        if (c.ticker == a.ticker) company = &c;
      }
      try {
        out.push_back(label_company_year(*company, a.year, a.valuation, as_of));
      } catch (const NoDataError&) {
        // no prices for that fiscal year: the company-year cannot be labeled
      }
    }
    return out;
  });
}

struct TaskRunMeta {
  DatasetSplit split;
  std::vector<double> fill_medians;
  ScalerState scaler;
  double target_mean = 0.0;
  double target_stddev = 0.0;
};

struct TaskDataset {
  std::vector<std::size_t> sample_indices;  // positions into DatasetArtifact::samples
  std::vector<TaskRunMeta> runs;
};

struct DatasetArtifact {
  std::vector<std::string> feature_order;
  std::vector<Sample> samples;
  double test_fraction = 0.2;
  std::map<Task, TaskDataset> tasks;
};

struct TaskView {
  FeatureRows rows;
  std::vector<int> labels;
  std::vector<double> targets;
};

inline TaskView task_view(const DatasetArtifact& d, Task task) {
  TaskView v;
  for (auto i : d.tasks.at(task).sample_indices) {
    const Sample& s = d.samples[i];
    v.rows.push_back(s.features);
    if (task == Task::Aspd) {
      v.labels.push_back(s.aspd);
    } else {
      v.labels.push_back(*s.dcspiv);
      v.targets.push_back(*s.intrinsic);
    }
  }
  return v;
}

inline DatasetArtifact stage_features(const LoadedUniverse& u, const std::vector<CompanyYearAnalysis>& analyses,
                                      const std::vector<LabelRecord>& labels, const ExperimentConfig& cfg) {
  return in_stage("features", ExitCode::Features, [&] {
    DatasetArtifact d;
    d.feature_order = feature_names();
    d.test_fraction = cfg.test_fraction;
    for (const auto& l : labels) {
      const CompanyRecord* company = nullptr;
      for (const auto& c : u.companies) {
        if (c.ticker == l.ticker) company = &c;
      }
      const CompanyYearAnalysis* analysis = nullptr;
      for (const auto& a : analyses) {
        if (a.ticker == l.ticker && a.year == l.year) analysis = &a;
      }
      if (!company || !analysis) throw AlignmentError("label without analysis: " + l.ticker + " " + std::to_string(l.year));
      auto fv = assemble_features(*company, l.year, *analysis);
      d.samples.push_back({l.ticker, l.year, std::move(fv.values), l.aspd, l.dcspiv, l.intrinsic});
    }
    for (Task task : cfg.tasks) {
      TaskDataset td;
      for (std::size_t i = 0; i < d.samples.size(); ++i) {
        if (task == Task::Aspd || d.samples[i].dcspiv) td.sample_indices.push_back(i);
      }
      d.tasks[task] = std::move(td);
      const auto view = task_view(d, task);
      for (auto seed : cfg.seeds) {
        const auto split = stratified_split(view.labels, cfg.test_fraction, seed);
        const auto prepared = prepare_run(view.rows, view.labels, view.targets, split);
        d.tasks[task].runs.push_back(
            {split, prepared.fill_medians, prepared.scaler, prepared.target_mean, prepared.target_stddev});
      }
    }
    return d;
  });
}

/// Rebuilds the scaled matrices of one run and checks them against the
/// stored statistics.
inline PreparedRun prepared_run(const DatasetArtifact& d, Task task, std::size_t run) {
  const auto view = task_view(d, task);
  const auto& meta = d.tasks.at(task).runs.at(run);
  auto prepared = prepare_run(view.rows, view.labels, view.targets, meta.split);
  if (prepared.scaler != meta.scaler || prepared.fill_medians != meta.fill_medians) {
    throw FormatError("dataset artifact statistics do not match its samples");
  }
  return prepared;
}

inline Batch make_batch(const FeatureRows& rows, const std::vector<double>& labels, const std::vector<double>& targets) {
  return Batch{sequence_batch(rows), labels, targets};
}

struct Job {
  Task task;
  ModelKind model;
  std::size_t run;
};

inline std::vector<Job> jobs_for(const ExperimentConfig& cfg, const DatasetArtifact& d) {
  std::vector<Job> jobs;
  for (Task t : kTasks) {
    if (!d.tasks.contains(t) || std::find(cfg.tasks.begin(), cfg.tasks.end(), t) == cfg.tasks.end()) continue;
    for (ModelKind m : kModelKinds) {
      if (std::find(cfg.models.begin(), cfg.models.end(), m) == cfg.models.end()) continue;
      for (std::size_t k = 0; k < d.tasks.at(t).runs.size(); ++k) jobs.push_back({t, m, k});
    }
  }
  return jobs;
}

inline std::string checkpoint_name(const Job& j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02zu", j.run);
  return std::string(task_name(j.task)) + "_" + std::string(model_kind_name(j.model)) + "_run" + buf + ".json";
}

inline ModelConfig job_config(const ExperimentConfig& cfg, const DatasetArtifact& d, const Job& j) {
  ModelConfig mc = cfg.model_configs.at(architecture_for(j.task, j.model));
  mc.seed = d.tasks.at(j.task).runs.at(j.run).split.seed;
  return mc;
}

inline void stage_train(const ExperimentConfig& cfg, const DatasetArtifact& d) {
  in_stage("train", ExitCode::Train, [&] {
    const auto jobs = jobs_for(cfg, d);
    const auto dir = cfg.output_dir / "checkpoints";
    parallel_for(jobs.size(), worker_count(cfg.workers), [&](std::size_t i) {
      const Job& j = jobs[i];
      const auto prepared = prepared_run(d, j.task, j.run);
      const auto model = train(job_config(cfg, d, j),
                               make_batch(prepared.train_rows, prepared.train_labels, prepared.train_targets));
      save_model(model, dir / checkpoint_name(j));
    });
  });
}

inline Scores score_rows(const TrainedModel& model, const FeatureRows& rows, const std::vector<double>& labels) {
  const auto p = predict(model, sequence_batch(rows));
  return scores(confusion(p.labels, as_int_labels(labels)));
}

inline MetricReport stage_evaluate(const ExperimentConfig& cfg, const DatasetArtifact& d) {
  return in_stage("evaluate", ExitCode::Evaluate, [&] {
    const auto jobs = jobs_for(cfg, d);
    std::vector<RunScores> results(jobs.size());
    parallel_for(jobs.size(), worker_count(cfg.workers), [&](std::size_t i) {
      const Job& j = jobs[i];
      const auto model = load_model(cfg.output_dir / "checkpoints" / checkpoint_name(j));
      const auto prepared = prepared_run(d, j.task, j.run);
      results[i] = {prepared.split.seed, score_rows(model, prepared.train_rows, prepared.train_labels),
                    score_rows(model, prepared.test_rows, prepared.test_labels)};
    });
    MetricReport report;
    for (std::size_t i = 0; i < jobs.size(); ++i) report.runs[{jobs[i].task, jobs[i].model}].push_back(results[i]);
    return report;
  });
}

// ---------------------------------------------------------------------------
// Artifact (de)serialization

namespace detail {

inline nlohmann::ordered_json nullable(double v) {
  return is_missing(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}

inline nlohmann::ordered_json scores_json(const Scores& s) {
  return {{"accuracy", s.accuracy},
          {"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"precision_undefined", s.precision_undefined},
          {"recall_undefined", s.recall_undefined}};
}

inline Scores scores_from_json(const nlohmann::json& j) {
  Scores s;
  s.accuracy = j.at("accuracy").get<double>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  s.precision_undefined = j.at("precision_undefined").get<bool>();
  s.recall_undefined = j.at("recall_undefined").get<bool>();
  return s;
}

}  // namespace detail

inline constexpr int kDatasetFormatVersion = 1;

inline nlohmann::ordered_json dataset_to_json(const DatasetArtifact& d) {
  nlohmann::ordered_json j;
  j["format_version"] = kDatasetFormatVersion;
  j["feature_order"] = d.feature_order;
  j["test_fraction"] = d.test_fraction;
  auto samples = nlohmann::ordered_json::array();
  for (const auto& s : d.samples) {
    auto features = nlohmann::ordered_json::array();
    for (double v : s.features) features.push_back(detail::nullable(v));
    samples.push_back({{"ticker", s.ticker},
                       {"year", s.year},
                       {"aspd", s.aspd},
                       {"dcspiv", s.dcspiv ? nlohmann::ordered_json(*s.dcspiv) : nlohmann::ordered_json(nullptr)},
                       {"intrinsic", s.intrinsic ? nlohmann::ordered_json(*s.intrinsic) : nlohmann::ordered_json(nullptr)},
                       {"features", std::move(features)}});
  }
  j["samples"] = std::move(samples);
  nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
  for (const auto& [task, td] : d.tasks) {
    auto runs = nlohmann::ordered_json::array();
    for (const auto& r : td.runs) {
      runs.push_back({{"seed", r.split.seed},
                      {"train", r.split.train},
                      {"test", r.split.test},
                      {"fill_medians", r.fill_medians},
                      {"scaler", {{"mean", r.scaler.mean}, {"stddev", r.scaler.stddev}}},
                      {"target_mean", r.target_mean},
                      {"target_stddev", r.target_stddev}});
    }
    tasks[std::string(task_name(task))] = {{"sample_indices", td.sample_indices}, {"runs", std::move(runs)}};
  }
  j["tasks"] = std::move(tasks);
  return j;
}

inline DatasetArtifact dataset_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() > kDatasetFormatVersion) throw VersionError("dataset.json is too new");
    DatasetArtifact d;
    d.feature_order = j.at("feature_order").get<std::vector<std::string>>();
    if (d.feature_order != feature_names()) throw FormatError("dataset.json feature order differs from this build");
    d.test_fraction = j.at("test_fraction").get<double>();
    for (const auto& s : j.at("samples")) {
      Sample sample;
      sample.ticker = s.at("ticker").get<std::string>();
      sample.year = s.at("year").get<int>();
      sample.aspd = s.at("aspd").get<int>();
      if (!s.at("dcspiv").is_null()) sample.dcspiv = s.at("dcspiv").get<int>();
      if (!s.at("intrinsic").is_null()) sample.intrinsic = s.at("intrinsic").get<double>();
      for (const auto& v : s.at("features")) sample.features.push_back(v.is_null() ? kMissing : v.get<double>());
      if (sample.features.size() != kFeatureCount) throw FormatError("sample with wrong feature count");
      d.samples.push_back(std::move(sample));
    }
    for (const auto& [name, td] : j.at("tasks").items()) {
      TaskDataset t;
      t.sample_indices = td.at("sample_indices").get<std::vector<std::size_t>>();
      for (const auto& r : td.at("runs")) {
        TaskRunMeta m;
        m.split.seed = r.at("seed").get<std::uint64_t>();
        m.split.train = r.at("train").get<std::vector<std::size_t>>();
        m.split.test = r.at("test").get<std::vector<std::size_t>>();
        m.split.test_fraction = d.test_fraction;
        m.fill_medians = r.at("fill_medians").get<std::vector<double>>();
        m.scaler.mean = r.at("scaler").at("mean").get<std::vector<double>>();
        m.scaler.stddev = r.at("scaler").at("stddev").get<std::vector<double>>();
        m.target_mean = r.at("target_mean").get<double>();
        m.target_stddev = r.at("target_stddev").get<double>();
        t.runs.push_back(std::move(m));
      }
      d.tasks[parse_task(name)] = std::move(t);
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset.json: ") + e.what());
  }
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  auto runs = nlohmann::ordered_json::array();
  for (const auto& [key, rs] : r.runs) {
    for (std::size_t k = 0; k < rs.size(); ++k) {
      runs.push_back({{"task", task_name(key.first)},
                      {"model", model_kind_name(key.second)},
                      {"run", k},
                      {"seed", rs[k].seed},
                      {"train", detail::scores_json(rs[k].train)},
                      {"test", detail::scores_json(rs[k].test)}});
    }
  }
  return {{"runs", std::move(runs)}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    for (const auto& e : j.at("runs")) {
      const auto key = std::pair{parse_task(e.at("task").get<std::string>()),
                                 parse_model_kind(e.at("model").get<std::string>())};
      r.runs[key].push_back({e.at("seed").get<std::uint64_t>(), detail::scores_from_json(e.at("train")),
                             detail::scores_from_json(e.at("test"))});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed runs.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Artifact files

namespace artifacts {
inline std::filesystem::path ingest(const ExperimentConfig& c) { return c.output_dir / "ingest.json"; }
inline std::filesystem::path labels(const ExperimentConfig& c) { return c.output_dir / "labels.csv"; }
inline std::filesystem::path dataset(const ExperimentConfig& c) { return c.output_dir / "dataset.json"; }
inline std::filesystem::path runs(const ExperimentConfig& c) { return c.output_dir / "runs.json"; }
inline std::filesystem::path report_csv(const ExperimentConfig& c) { return c.output_dir / "report.csv"; }
inline std::filesystem::path report_md(const ExperimentConfig& c) { return c.output_dir / "report.md"; }
}  // namespace artifacts

inline DatasetArtifact load_dataset_artifact(const std::filesystem::path& path) {
  try {
    return dataset_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline MetricReport load_runs_artifact(const std::filesystem::path& path) {
  try {
    return report_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_report(const ExperimentConfig& cfg, const MetricReport& report) {
  in_stage("report", ExitCode::Report, [&] {
    write_file_atomic(artifacts::report_csv(cfg), report_csv(report));
    write_file_atomic(artifacts::report_md(cfg), report_markdown(report));
  });
}

/// Runs every stage and writes ingest.json, labels.csv, dataset.json,
/// checkpoints/, runs.json, report.csv and report.md under output_dir.
inline MetricReport run_experiment(const ExperimentConfig& cfg) {
  validate_paths(cfg);
  const auto universe = stage_ingest(cfg.data_dir);
  write_file_atomic(artifacts::ingest(cfg), ingest_summary(universe).dump(2) + "\n");
  const auto analyses = stage_analyze(universe, cfg.horizon_years);
  const auto labels = stage_label(universe, analyses, cfg.as_of);
  write_file_atomic(artifacts::labels(cfg), labels_to_csv(labels));
  const auto dataset = stage_features(universe, analyses, labels, cfg);
  write_file_atomic(artifacts::dataset(cfg), dataset_to_json(dataset).dump());
  stage_train(cfg, dataset);
  const auto report = stage_evaluate(cfg, dataset);
  write_file_atomic(artifacts::runs(cfg), report_to_json(report).dump(2) + "\n");
  write_report(cfg, report);
  return report;
}

}  // namespace fundacast
