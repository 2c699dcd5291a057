#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fundacast/experiment.hpp"
#include "support.hpp"

using namespace fundacast;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(FUNDACAST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig quick_config(const fs::path& out) {
  auto c = parse_experiment_config(
      nlohmann::json{{"data_dir", testing::kFixtureUniverse.string()},
                     {"output_dir", out.string()},
                     {"task", "both"},
                     {"models", {"LR", "CNN"}},
                     {"runs", 2},
                     {"epochs", 20}},
      fs::current_path());
  return c;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "config.json";
  write_file_atomic(p, j.dump());
  return p;
}

}  // namespace

TEST_CASE("config parsing", "[experiment]") {
  const fs::path base = "/base";
  const auto c = parse_experiment_config(nlohmann::json{{"data_dir", "data"}}, base);
  CHECK(c.data_dir == base / "data");
  CHECK(c.output_dir == "out");
  CHECK(c.tasks.size() == 2);
  CHECK(c.models.size() == 3);
  CHECK(c.seeds == consecutive_seeds(42, 10));
  CHECK(c.test_fraction == 0.2);
  CHECK(c.model_configs.at(Architecture::CnnAspd).epochs == 5000);
  CHECK(c.model_configs.at(Architecture::LstmDcspiv).lstm_hidden == 50);
  CHECK(c.model_configs.at(Architecture::Lr).input_length == kFeatureCount);

  const auto tuned = parse_experiment_config(
      nlohmann::json{{"data_dir", "/abs"},
                     {"task", "DCSPIV"},
                     {"seeds", {5, 9}},
                     {"runs", 2},
                     {"hyperparameters", {{"CNN_DCSPIV", {{"dense_hidden", 8}, {"epochs", 30}}}}}},
      base);
  CHECK(tuned.data_dir == "/abs");
  CHECK(tuned.tasks == std::vector<Task>{Task::Dcspiv});
  CHECK(tuned.seeds == std::vector<std::uint64_t>{5, 9});
  CHECK(tuned.model_configs.at(Architecture::CnnDcspiv).dense_hidden == 8);
  CHECK(tuned.model_configs.at(Architecture::CnnDcspiv).epochs == 30);
  CHECK(tuned.model_configs.at(Architecture::CnnAspd).dense_hidden == 64);
}

TEST_CASE("bad configs are config errors", "[experiment]") {
  auto parse = [](nlohmann::json j) { return parse_experiment_config(j, "/"); };
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"models", {"GRU"}}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"models", nlohmann::json::array()}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"task", "XYZ"}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"runs", 3}, {"seeds", {1, 2}}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"test_fraction", 1.0}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"epochs", 0}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"epochs", "many"}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"hyperparameters", {{"LR", {{"depth", 3}}}}}}), ConfigError);
  CHECK_THROWS_AS(parse({{"data_dir", "d"}, {"as_of", "2020-13-01"}}), ConfigError);
  CHECK_THROWS_AS(parse({{"output_dir", "o"}}), ConfigError);
  CHECK_THROWS_AS(parse(nlohmann::json::array()), ConfigError);
}

TEST_CASE("parallel_for covers every index and rethrows", "[experiment]") {
  std::vector<int> hits(50, 0);
  parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_WITH(parallel_for(10, 2,
                                 [](std::size_t i) {
                                   if (i == 4) throw DivergenceError("boom");
                                 }),
                    "boom");
}

TEST_CASE("stages compose into the same artifacts as a full run", "[experiment]") {
  const auto dir = testing::scratch_dir("stages");
  auto cfg = quick_config(dir / "full");
  const auto full = run_experiment(cfg);
  for (const auto* name : {"ingest.json", "labels.csv", "dataset.json", "runs.json", "report.csv", "report.md"}) {
    CHECK(fs::exists(cfg.output_dir / name));
  }
  CHECK(fs::exists(cfg.output_dir / "checkpoints" / "DCSPIV_CNN_run01.json"));
  CHECK(full.runs.size() == 4);

  auto staged = quick_config(dir / "staged");
  staged.workers = 2;
  const auto u = stage_ingest(staged.data_dir);
  const auto analyses = stage_analyze(u, staged.horizon_years);
  const auto labels = stage_label(u, analyses, staged.as_of);
  const auto d = stage_features(u, analyses, labels, staged);
  write_file_atomic(artifacts::dataset(staged), dataset_to_json(d).dump());
  const auto reread = load_dataset_artifact(artifacts::dataset(staged));
  CHECK(dataset_to_json(reread) == dataset_to_json(d));
  CHECK(read_text_file(artifacts::dataset(staged)) == read_text_file(artifacts::dataset(cfg)));
  stage_train(staged, reread);
  const auto report = stage_evaluate(staged, reread);
  write_report(staged, report);
  CHECK(read_text_file(artifacts::report_csv(staged)) == read_text_file(artifacts::report_csv(cfg)));

  const auto runs = load_runs_artifact(artifacts::runs(cfg));
  CHECK(report_csv(runs) == report_csv(full));
  fs::remove_all(dir);
}

TEST_CASE("dataset artifact is checked on load", "[experiment]") {
  const auto dir = testing::scratch_dir("artifact");
  auto cfg = quick_config(dir);
  const auto u = stage_ingest(cfg.data_dir);
  const auto analyses = stage_analyze(u, cfg.horizon_years);
  const auto d = stage_features(u, analyses, stage_label(u, analyses, cfg.as_of), cfg);
  auto j = nlohmann::json::parse(dataset_to_json(d).dump());

  CHECK(task_view(d, Task::Aspd).rows.size() == d.tasks.at(Task::Aspd).sample_indices.size());
  CHECK(task_view(d, Task::Dcspiv).rows.size() < task_view(d, Task::Aspd).rows.size());

  SECTION("newer version") {
    j["format_version"] = kDatasetFormatVersion + 1;
    CHECK_THROWS_AS(dataset_from_json(j), VersionError);
  }
  SECTION("feature order") {
    j["feature_order"][0] = "Something";
    CHECK_THROWS_AS(dataset_from_json(j), FormatError);
  }
  SECTION("tampered scaler") {
    j["tasks"]["ASPD"]["runs"][0]["scaler"]["mean"][0] = 1e6;
    const auto bad = dataset_from_json(j);
    CHECK_THROWS_AS(prepared_run(bad, Task::Aspd, 0), FormatError);
  }
  fs::remove_all(dir);
}

TEST_CASE("cli reports stage failures through exit codes", "[experiment]") {
  const auto dir = testing::scratch_dir("cli");
  const auto data = dir / "data";
  fs::copy(testing::kFixtureUniverse, data, fs::copy_options::recursive);
  const auto out = (dir / "out").string();

  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("ingest") == 2);
  CHECK(cli("--data " + data.string() + " --out " + out + " ingest") == 0);
  CHECK(fs::exists(dir / "out" / "ingest.json"));
  CHECK(cli("--data " + data.string() + " --out " + out + " ratios --ticker SAB --year 2021") == 0);
  CHECK(cli("--data " + data.string() + " --out " + out + " ratios --ticker ZZZ --year 2021") == 4);
  CHECK(cli("--data " + data.string() + " --out " + out + " value --ticker SAA --year 2019") == 4);
  CHECK(cli("--data " + data.string() + " --out " + out + " --as-of 2021-02-30 label") == 2);
  CHECK(cli("--data " + data.string() + " --out " + out + " train") == 7);
  CHECK(cli("--data " + data.string() + " --out " + out + " report") == 9);
  CHECK(cli("--config " + write_config(dir, {{"data_dir", "data"}, {"colour", 2}}).string() + " ingest") == 2);
  CHECK(cli("--data " + (dir / "absent").string() + " ingest") == 2);

  {
    std::ofstream broken(data / "SAC.statements.json", std::ios::trunc);
    broken << "{\"ticker\": \"SAC\", \"statements\": [";
  }
  CHECK(cli("--data " + data.string() + " --out " + out + " ingest") == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli run is reproducible byte for byte", "[experiment]") {
  const auto dir = testing::scratch_dir("repro");
  const auto config = write_config(dir, {{"data_dir", testing::kFixtureUniverse.string()},
                                         {"models", {"LSTM", "LR"}},
                                         {"runs", 2},
                                         {"epochs", 15}});
  REQUIRE(cli("--config " + config.string() + " --out " + (dir / "a").string() + " run") == 0);
  REQUIRE(cli("--config " + config.string() + " --out " + (dir / "b").string() + " run") == 0);
  CHECK(read_text_file(dir / "a" / "report.csv") == read_text_file(dir / "b" / "report.csv"));
  CHECK(read_text_file(dir / "a" / "checkpoints" / "ASPD_LSTM_run00.json") ==
        read_text_file(dir / "b" / "checkpoints" / "ASPD_LSTM_run00.json"));

  REQUIRE(cli("--config " + config.string() + " --seed 7 --out " + (dir / "c").string() + " run") == 0);
  CHECK(read_text_file(dir / "a" / "dataset.json") != read_text_file(dir / "c" / "dataset.json"));
  fs::remove_all(dir);
}

TEST_CASE("bundled fixture config fills the whole report", "[experiment]") {
  const auto dir = testing::scratch_dir("smoke");
  const auto config = testing::kSourceDir / "fixtures" / "smoke.json";
  REQUIRE(cli("--config " + config.string() + " --out " + dir.string() + " run") == 0);
  std::istringstream csv(read_text_file(dir / "report.csv"));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  REQUIRE(rows.size() == 9);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == 7);
    for (std::size_t c = 1; c < 7; ++c) CHECK_FALSE(rows[r][c].empty());
  }
  CHECK(rows[0][1] == "ASPD LSTM");
  CHECK(rows[0][6] == "DCSPIV LR");
  CHECK(rows[8][0] == "Average Test F1-Score");
  fs::remove_all(dir);
}
