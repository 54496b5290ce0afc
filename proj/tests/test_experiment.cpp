#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gatagnn/experiment.hpp"

using namespace gatagnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "gatagnn_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(GATAGNN_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

/// Small, fast experiment: 6 companies in 2 sectors.
Json small_config() {
  return Json::parse(R"({
    "data": {"synthetic": {"n_companies": 6, "n_days": 90, "n_sectors": 2, "noise_sigma": 0.2,
                           "seed": 3, "cross_leakage": 1.0}},
    "features": {"price_mode": "relative"},
    "model": {"hidden": 4, "window": 4, "heads": 2, "regression_head": "linear", "seed": 1},
    "train": {"learning_rate": 0.01, "epochs": 3, "patience": 0},
    "experiment": {"industry": "sector_0", "variants": ["GRU", "GRU_GAT", "GAT_AGNN"]}
  })");
}

fs::path write_config(const fs::path& dir, const Json& j, const std::string& name = "config.json") {
  const auto p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string args(const std::string& verb, const fs::path& config, const fs::path& out) {
  return verb + " --config " + config.string() + " --out " + out.string();
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  auto c = parse_experiment_config(small_config(), "/base");
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(c.price_mode, PriceMode::relative);
  EXPECT_EQ(c.variants.size(), 3u);
  auto d = parse_experiment_config(Json::parse(R"({"data": {"csv": "p.csv"}})"), "/base");
  EXPECT_EQ(*d.data.csv, fs::path("/base/p.csv"));
  EXPECT_EQ(d.model.window, 20u);
  EXPECT_EQ(d.model.hidden, 32u);
  EXPECT_EQ(d.model.heads, 2u);
  EXPECT_EQ(d.variants.size(), 6u);
  const auto before = config_digest(c);
  apply_seed(c, 77);
  EXPECT_EQ(c.data.synthetic->seed, 77u);
  EXPECT_EQ(c.model.seed, 77u);
  EXPECT_NE(config_digest(c), before);
}

TEST(Config, Errors) {
  auto expect_error = [](const char* text) {
    EXPECT_THROW(parse_experiment_config(Json::parse(text)), ConfigError) << text;
  };
  expect_error(R"({})");
  expect_error(R"({"data": {"csv": "a.csv", "synthetic": {}}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "modle": {}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "model": {"hidden": "big"}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "model": {"variant": "AD_GAT"}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "model": {"hidden": 6, "heads": 4}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "split": {"train": 0.5, "val": 0.1, "test": 0.1}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "features": {"price_mode": "log"}})");
  expect_error(R"({"data": {"synthetic": {"n_companies": 2, "n_sectors": 3}}})");
  expect_error(R"({"data": {"csv": "a.csv"}, "train": {"learning_rate": -1}})");
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(Cli, SynthIsDeterministicAndSized) {
  const auto dir = scratch("synth");
  const auto cfg = write_config(dir, Json::parse(R"({"data": {"synthetic": {}}})"));
  ASSERT_EQ(cli(args("synth", cfg, dir / "a"), dir).code, 0);
  ASSERT_EQ(cli(args("synth", cfg, dir / "b"), dir).code, 0);
  EXPECT_EQ(slurp(dir / "a/prices.csv"), slurp(dir / "b/prices.csv"));
  EXPECT_EQ(slurp(dir / "a/industry_map.csv"), slurp(dir / "b/industry_map.csv"));
  EXPECT_EQ(lines(dir / "a/prices.csv").size(), 30u * 630u + 1);
  ASSERT_EQ(cli(args("synth", cfg, dir / "c") + " --seed 9", dir).code, 0);
  EXPECT_NE(slurp(dir / "a/prices.csv"), slurp(dir / "c/prices.csv"));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(cli(args("synth", write_config(dir, Json::parse(R"({"data": {"synthetic": {"n_companies": 3,
            "n_sectors": 4}}})")), dir / "o"), dir).code, 2);
  const auto missing = dir / "nowhere" / "prices.csv";
  Json j = small_config();
  j["data"] = {{"csv", missing.string()}};
  auto r = cli(args("train", write_config(dir, j), dir / "o"), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos) << r.err;
  EXPECT_EQ(cli("bogus --config " + write_config(dir, small_config()).string(), dir).code, 2);
  EXPECT_EQ(cli("train", dir).code, 2);
  EXPECT_EQ(cli("train --config " + (dir / "absent.json").string(), dir).code, 2);
  std::ofstream(dir / "broken.json") << "{\"data\": ";
  EXPECT_EQ(cli("train --config " + (dir / "broken.json").string(), dir).code, 2);
  j = small_config();
  j["features"]["price_mode"] = "level";
  j["train"]["learning_rate"] = 1e300;
  r = cli(args("train", write_config(dir, j), dir / "o"), dir);
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_NE(r.err.find("epoch"), std::string::npos) << r.err;
}

TEST(Cli, TrainWritesArtifactsReproducibly) {
  const auto dir = scratch("train");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("train", cfg, dir / "a"), dir).code, 0);
  ASSERT_EQ(cli(args("train", cfg, dir / "b"), dir).code, 0);
  for (const char* f : {"model.ckpt", "history.csv", "metrics.json", "metrics.csv"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_EQ(lines(dir / "a/history.csv").size(), 4u);
  EXPECT_EQ(lines(dir / "a/metrics.csv")[0], "split,n_samples,acc,auc,mse,mae");
  const auto report = Json::parse(slurp(dir / "a/metrics.json"));
  EXPECT_EQ(report["seed"], 1);
  EXPECT_EQ(report["config_digest"], hex32(config_digest(parse_experiment_config(small_config()))));
  EXPECT_EQ(report["metrics"].size(), 3u);
}

TEST(Cli, EvaluateReproducesTrainMetrics) {
  const auto dir = scratch("evaluate");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("train", cfg, dir / "o"), dir).code, 0);
  ASSERT_EQ(cli(args("evaluate", cfg, dir / "o"), dir).code, 0);
  EXPECT_EQ(slurp(dir / "o/metrics.csv"), slurp(dir / "o/evaluation.csv"));

  auto bytes = slurp(dir / "o/model.ckpt");
  bytes[bytes.size() / 2] ^= 0x01;
  std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
  auto r = cli(args("evaluate", cfg, dir / "o") + " --checkpoint " + (dir / "bad.ckpt").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checksum"), std::string::npos) << r.err;
}

TEST(Cli, CsvSourceMatchesSyntheticSource) {
  const auto dir = scratch("csv");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("synth", cfg, dir / "data"), dir).code, 0);
  Json j = small_config();
  j["data"] = {{"csv", "data/prices.csv"}, {"industry_map", "data/industry_map.csv"}};
  const auto csv_cfg = write_config(dir, j, "csv.json");
  ASSERT_EQ(cli(args("train", cfg, dir / "a"), dir).code, 0);
  ASSERT_EQ(cli(args("train", csv_cfg, dir / "b"), dir).code, 0);
  EXPECT_EQ(slurp(dir / "a/metrics.csv"), slurp(dir / "b/metrics.csv"));
  EXPECT_EQ(slurp(dir / "a/model.ckpt"), slurp(dir / "b/model.ckpt"));
}

TEST(Cli, CompareCoversVariantsOnSharedSplit) {
  const auto dir = scratch("compare");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("compare", cfg, dir / "o"), dir).code, 0);
  const auto rows = lines(dir / "o/comparison.csv");
  ASSERT_EQ(rows.size(), 1u + 3 * 2);
  EXPECT_EQ(rows[0], "variant,task,n_samples,acc,auc,mse,mae");
  const std::string n = split_csv(rows[1])[2];
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto f = split_csv(rows[k]);
    ASSERT_EQ(f.size(), 7u) << rows[k];
    EXPECT_EQ(f[2], n);
    EXPECT_EQ(f[5].empty(), f[1] == "classification") << rows[k];
  }
  // The GAT_AGNN regression row is exactly what train reports for the test split.
  ASSERT_EQ(cli(args("train", cfg, dir / "o"), dir).code, 0);
  const auto test_row = split_csv(lines(dir / "o/metrics.csv")[3]);
  const auto cmp_row = split_csv(rows.back());
  ASSERT_EQ(cmp_row[0], "GAT_AGNN");
  ASSERT_EQ(cmp_row[1], "regression");
  for (std::size_t k = 1; k < 6; ++k) EXPECT_EQ(test_row[k], cmp_row[k + 1]);
}

TEST(Cli, IndustryComparison) {
  const auto dir = scratch("industry");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("industry", cfg, dir / "o"), dir).code, 0);
  const auto rows = lines(dir / "o/industry.csv");
  ASSERT_EQ(rows.size(), 3u);
  const auto a = split_csv(rows[1]), b = split_csv(rows[2]);
  EXPECT_EQ(a[0], "all-industry");
  EXPECT_EQ(b[0], "single-industry");
  EXPECT_EQ(a[1], "6");
  EXPECT_EQ(b[1], "3");
  EXPECT_EQ(a[2], "3");
  EXPECT_EQ(a[3], b[3]);
  const auto report = Json::parse(slurp(dir / "o/industry.json"));
  EXPECT_EQ(report["eval_tickers"], Json({"SYN0", "SYN1", "SYN2"}));

  Json j = small_config();
  j["data"]["synthetic"]["n_companies"] = 3;
  j["experiment"]["industry"] = "sector_1";
  auto r = cli(args("industry", write_config(dir, j, "tiny.json"), dir / "o2"), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sector_1"), std::string::npos) << r.err;
  j["experiment"]["industry"] = "sector_9";
  EXPECT_EQ(cli(args("industry", write_config(dir, j, "tiny.json"), dir / "o2"), dir).code, 2);
}

TEST(Cli, PlotDataMatchesRealizedReturns) {
  const auto dir = scratch("plot");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli(args("train", cfg, dir / "o"), dir).code, 0);
  ASSERT_EQ(cli(args("plot-data", cfg, dir / "o"), dir).code, 0);
  const auto c = parse_experiment_config(small_config());
  const auto panel = load_panel(c);
  const auto splits = make_splits(panel, c, c.model.window);
  const auto rows = lines(dir / "o/plot.csv");
  ASSERT_EQ(rows.size(), 1 + splits.test.size() * 6);
  EXPECT_EQ(rows[0], "date,ticker,actual_return,predicted_return");
  const auto first = split_csv(rows[1]);
  const std::size_t t = splits.test.front().t_index;
  EXPECT_EQ(first[0], format_date(panel.dates[t]));
  EXPECT_EQ(first[1], "SYN0");
  EXPECT_EQ(std::stod(first[2]), panel.ret(0, t));
  EXPECT_FALSE(fs::exists(dir / "o/attention.csv"));

  Json j = small_config();
  j["experiment"]["dump_attention"] = true;
  ASSERT_EQ(cli(args("plot-data", write_config(dir, j, "att.json"), dir / "o"), dir).code, 0);
  const auto att = lines(dir / "o/attention.csv");
  EXPECT_EQ(att[0], "date,head,i,j,q,g");
  EXPECT_EQ(att.size(), 1 + splits.test.size() * 2 * 36);

  j = small_config();
  j["model"]["task"] = "classification";
  const auto cls = write_config(dir, j, "cls.json");
  ASSERT_EQ(cli(args("train", cls, dir / "c"), dir).code, 0);
  auto r = cli(args("plot-data", cls, dir / "c"), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("task mismatch"), std::string::npos) << r.err;
}
