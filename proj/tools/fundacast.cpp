// fundacast command-line driver. Each subcommand runs one pipeline stage and
// writes its artifact under the output directory; `run` does all of them.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fundacast/experiment.hpp"
#include "fundacast/ratios.hpp"

namespace fc = fundacast;

namespace {

struct GlobalOptions {
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string as_of;
};

fc::ExperimentConfig resolve_config(const GlobalOptions& g) {
  fc::ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = fc::load_experiment_config(g.config);
  } else if (!g.data.empty()) {
    cfg = fc::parse_experiment_config(nlohmann::json{{"data_dir", g.data}}, std::filesystem::current_path());
  } else {
    throw fc::ConfigError("either --config or --data is required");
  }
  if (!g.data.empty()) cfg.data_dir = g.data;
  if (g.seed) cfg.seeds = fc::consecutive_seeds(*g.seed, cfg.runs());
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (!g.as_of.empty()) {
    try {
      cfg.as_of = fc::parse_date(g.as_of);
    } catch (const fc::Error& e) {
      throw fc::ConfigError(std::string("--as-of: ") + e.what());
    }
  }
  fc::validate_paths(cfg);
  return cfg;
}

const fc::CompanyRecord& find_company(const fc::LoadedUniverse& u, const std::string& ticker) {
  for (const auto& c : u.companies) {
    if (c.ticker == ticker) return c;
  }
  throw fc::NoDataError("unknown ticker " + ticker);
}

fc::DatasetArtifact build_dataset(const fc::ExperimentConfig& cfg) {
  const auto universe = fc::stage_ingest(cfg.data_dir);
  const auto analyses = fc::stage_analyze(universe, cfg.horizon_years);
  const auto labels = fc::stage_label(universe, analyses, cfg.as_of);
  return fc::stage_features(universe, analyses, labels, cfg);
}

fc::DatasetArtifact read_dataset(const fc::ExperimentConfig& cfg, const char* stage, fc::ExitCode code) {
  return fc::in_stage(stage, code, [&] { return fc::load_dataset_artifact(fc::artifacts::dataset(cfg)); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fundacast: stock-trend labels from fundamental analysis"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--data", g.data, "data directory (overrides the config)");
  app.add_option("--seed", g.seed, "base seed; run k uses seed+k");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--as-of", g.as_of, "date (YYYY-MM-DD) for the current price");

  auto* ingest = app.add_subcommand("ingest", "validate the data directory and write ingest.json");
  std::string ticker;
  int year = 0;
  auto* ratios = app.add_subcommand("ratios", "print the ratio set of one company-year");
  ratios->add_option("--ticker", ticker)->required();
  ratios->add_option("--year", year)->required();
  auto* value = app.add_subcommand("value", "print the DCF valuation of one company-year");
  value->add_option("--ticker", ticker)->required();
  value->add_option("--year", year)->required();
  std::string task = "both";
  auto* label = app.add_subcommand("label", "write labels.csv");
  label->add_option("--task", task, "aspd, dcspiv or both");
  auto* features = app.add_subcommand("features", "write dataset.json");
  auto* train = app.add_subcommand("train", "train every (task, model, run) and write checkpoints");
  auto* evaluate = app.add_subcommand("evaluate", "score the checkpoints and write runs.json");
  auto* report = app.add_subcommand("report", "write report.csv and report.md from runs.json");
  auto* run = app.add_subcommand("run", "run every stage");
  for (auto* sub : {ingest, ratios, value, label, features, train, evaluate, report, run}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(fc::ExitCode::Config);
  }

  try {
    const auto cfg = resolve_config(g);
    if (*ingest) {
      const auto u = fc::stage_ingest(cfg.data_dir);
      const auto summary = fc::ingest_summary(u);
      fc::write_file_atomic(fc::artifacts::ingest(cfg), summary.dump(2) + "\n");
      std::cout << summary["company_count"] << " companies, " << summary["company_years"] << " company-years\n";
    } else if (*ratios) {
      const auto u = fc::stage_ingest(cfg.data_dir);
      fc::in_stage("ratios", fc::ExitCode::Valuation, [&] {
        const auto& company = find_company(u, ticker);
        const auto* stmt = company.statement_for(year);
        if (!stmt) throw fc::NoDataError(ticker + " has no statement for " + std::to_string(year));
        std::cout << fc::ratio_set_to_json(fc::compute_ratio_set(*stmt)).dump(2) << "\n";
      });
    } else if (*value) {
      const auto u = fc::stage_ingest(cfg.data_dir);
      fc::in_stage("valuation", fc::ExitCode::Valuation, [&] {
        const fc::ValuationContext ctx(u.companies, u.manifest, cfg.horizon_years);
        std::cout << fc::valuation_to_json(ctx.value(find_company(u, ticker), year)).dump(2) << "\n";
      });
    } else if (*label) {
      const auto u = fc::stage_ingest(cfg.data_dir);
      const auto analyses = fc::stage_analyze(u, cfg.horizon_years);
      auto labels = fc::stage_label(u, analyses, cfg.as_of);
      if (task != "both") {
        const auto t = fc::in_stage("label", fc::ExitCode::Config, [&] { return fc::parse_task(task); });
        if (t == fc::Task::Dcspiv) std::erase_if(labels, [](const fc::LabelRecord& r) { return !r.dcspiv; });
      }
      fc::write_file_atomic(fc::artifacts::labels(cfg), fc::labels_to_csv(labels));
      std::cout << labels.size() << " labeled company-years -> " << fc::artifacts::labels(cfg).string() << "\n";
    } else if (*features) {
      const auto d = build_dataset(cfg);
      fc::write_file_atomic(fc::artifacts::dataset(cfg), fc::dataset_to_json(d).dump());
      std::cout << d.samples.size() << " samples -> " << fc::artifacts::dataset(cfg).string() << "\n";
    } else if (*train) {
      const auto d = read_dataset(cfg, "train", fc::ExitCode::Train);
      fc::stage_train(cfg, d);
      std::cout << fc::jobs_for(cfg, d).size() << " checkpoints -> " << (cfg.output_dir / "checkpoints").string()
                << "\n";
    } else if (*evaluate) {
      const auto d = read_dataset(cfg, "evaluate", fc::ExitCode::Evaluate);
      const auto r = fc::stage_evaluate(cfg, d);
      fc::write_file_atomic(fc::artifacts::runs(cfg), fc::report_to_json(r).dump(2) + "\n");
      std::cout << fc::report_markdown(r);
    } else if (*report) {
      const auto r = fc::in_stage("report", fc::ExitCode::Report,
                                  [&] { return fc::load_runs_artifact(fc::artifacts::runs(cfg)); });
      fc::write_report(cfg, r);
      std::cout << fc::report_markdown(r);
    } else if (*run) {
      std::cout << fc::report_markdown(fc::run_experiment(cfg));
    }
  } catch (const fc::ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return static_cast<int>(fc::ExitCode::Config);
  } catch (const fc::StageError& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(fc::ExitCode::Failure);
  }
  return 0;
}
