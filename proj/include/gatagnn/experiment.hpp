#pragma once

// Experiment configuration and the command implementations behind the CLI.
//
// Config file (JSON); every key is optional except the data source:
//
//   {
//     "data": {
//       "synthetic": {"n_companies": 30, "n_days": 630, "n_sectors": 5, "factor_strength": 1.0,
//                     "noise_sigma": 0.5, "seed": 0, "lead_lag": 0.0, "cross_leakage": 0.0},
//       "csv": "prices.csv", "industry_map": "industry_map.csv",
//       "schema": {"date": "date", ..., "turnover_unit": "fraction"},
//       "tickers": ["A", "B"], "industries": ["sector_0"]
//     },
//     "features": {"price_mode": "level"},
//     "split": {"train": 0.7, "val": 0.1, "test": 0.2},
//     "model": {"variant": "GAT_AGNN", "task": "regression", "hidden": 32, "window": 20, "heads": 2,
//               "regression_head": "relu", "seed": 0},
//     "train": {"learning_rate": 0.001, "epochs": 50, "patience": 10, "seed": 0, "gradient_clip": null},
//     "experiment": {"industry": "sector_0", "variants": ["GRU", "GAT_AGNN"], "dump_attention": false},
//     "output_dir": "out"
//   }
//
// Relative paths are resolved against the directory holding the config file.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatagnn/data.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/model.hpp"
#include "gatagnn/training.hpp"

namespace gatagnn {

using Json = nlohmann::ordered_json;

struct DataSource {
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> industry_map;
  CsvSchema schema;
  std::vector<std::string> tickers;     // empty: all
  std::vector<std::string> industries;  // empty: all
};

struct ExperimentConfig {
  DataSource data;
  PriceMode price_mode = PriceMode::level;
  SplitSpec split;
  ModelConfig model;
  TrainConfig train;
  std::optional<std::string> industry;
  std::vector<Variant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
  bool dump_attention = false;
  std::filesystem::path output_dir = "out";
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown config key: " + where + "." + k);
  }
}

template <class T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for " + where + "." + key + ": " + obj[key].dump());
  }
}

inline std::size_t read_count(const Json& obj, const char* key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_number_unsigned() && !(obj[key].is_number_integer() && obj[key].get<long long>() >= 0))
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return obj[key].get<std::size_t>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read;
  using detail::read_count;
  detail::check_keys(j, "config", {"data", "features", "split", "model", "train", "experiment", "output_dir"});
  ExperimentConfig c;
  c.model.hidden = 32;
  c.model.window = 20;
  c.model.heads = 2;

  if (!j.contains("data")) throw ConfigError("config needs a data section");
  const Json& d = j["data"];
  detail::check_keys(d, "data", {"synthetic", "csv", "industry_map", "schema", "tickers", "industries"});
  if (d.contains("synthetic") == d.contains("csv"))
    throw ConfigError("data must name exactly one source: synthetic or csv");
  if (d.contains("synthetic")) {
    const Json& s = d["synthetic"];
    detail::check_keys(s, "data.synthetic",
                       {"n_companies", "n_days", "n_sectors", "factor_strength", "noise_sigma", "seed", "lead_lag",
                        "cross_leakage"});
    SyntheticSpec spec;
    spec.n_companies = read_count(s, "n_companies", spec.n_companies, "data.synthetic");
    spec.n_days = read_count(s, "n_days", spec.n_days, "data.synthetic");
    spec.n_sectors = read_count(s, "n_sectors", spec.n_sectors, "data.synthetic");
    read(s, "factor_strength", spec.factor_strength, "data.synthetic");
    read(s, "noise_sigma", spec.noise_sigma, "data.synthetic");
    read(s, "seed", spec.seed, "data.synthetic");
    read(s, "lead_lag", spec.lead_lag, "data.synthetic");
    read(s, "cross_leakage", spec.cross_leakage, "data.synthetic");
    validate(spec);
    c.data.synthetic = spec;
  } else {
    std::string p;
    read(d, "csv", p, "data");
    c.data.csv = detail::resolve(base_dir, p);
  }
  if (d.contains("industry_map")) {
    std::string p;
    read(d, "industry_map", p, "data");
    c.data.industry_map = detail::resolve(base_dir, p);
  }
  if (d.contains("schema")) {
    const Json& s = d["schema"];
    detail::check_keys(s, "data.schema",
                       {"date", "ticker", "open", "high", "low", "close", "turnover_rate", "turnover_unit"});
    auto& sc = c.data.schema;
    read(s, "date", sc.date, "data.schema");
    read(s, "ticker", sc.ticker, "data.schema");
    read(s, "open", sc.open, "data.schema");
    read(s, "high", sc.high, "data.schema");
    read(s, "low", sc.low, "data.schema");
    read(s, "close", sc.close, "data.schema");
    read(s, "turnover_rate", sc.turnover_rate, "data.schema");
    std::string unit = "fraction";
    read(s, "turnover_unit", unit, "data.schema");
    if (unit == "percent") sc.turnover_unit = TurnoverUnit::percent;
    else if (unit != "fraction") throw ConfigError("data.schema.turnover_unit must be fraction or percent");
  }
  read(d, "tickers", c.data.tickers, "data");
  read(d, "industries", c.data.industries, "data");

  if (j.contains("features")) {
    detail::check_keys(j["features"], "features", {"price_mode"});
    std::string mode = "level";
    read(j["features"], "price_mode", mode, "features");
    c.price_mode = parse_price_mode(mode);
  }
  if (j.contains("split")) {
    const Json& s = j["split"];
    detail::check_keys(s, "split", {"train", "val", "test"});
    read(s, "train", c.split.train_fraction, "split");
    read(s, "val", c.split.val_fraction, "split");
    read(s, "test", c.split.test_fraction, "split");
    split_sizes(1000, c.split);
  }
  if (j.contains("model")) {
    const Json& m = j["model"];
    detail::check_keys(m, "model", {"variant", "task", "hidden", "window", "heads", "regression_head", "seed"});
    std::string variant = to_string(c.model.variant), task = to_string(c.model.task),
                head = to_string(c.model.regression_head);
    read(m, "variant", variant, "model");
    read(m, "task", task, "model");
    read(m, "regression_head", head, "model");
    c.model.variant = parse_variant(variant);
    c.model.task = parse_task(task);
    c.model.regression_head = parse_regression_head(head);
    c.model.hidden = read_count(m, "hidden", c.model.hidden, "model");
    c.model.window = read_count(m, "window", c.model.window, "model");
    c.model.heads = read_count(m, "heads", c.model.heads, "model");
    read(m, "seed", c.model.seed, "model");
  }
  validate(c.model);
  if (j.contains("train")) {
    const Json& t = j["train"];
    detail::check_keys(t, "train", {"learning_rate", "epochs", "patience", "seed", "gradient_clip", "target_loss"});
    read(t, "learning_rate", c.train.learning_rate, "train");
    c.train.epochs = read_count(t, "epochs", c.train.epochs, "train");
    c.train.patience = read_count(t, "patience", c.train.patience, "train");
    read(t, "seed", c.train.seed, "train");
    if (t.contains("gradient_clip") && !t["gradient_clip"].is_null()) {
      double v = 0;
      read(t, "gradient_clip", v, "train");
      c.train.gradient_clip = v;
    }
    if (t.contains("target_loss") && !t["target_loss"].is_null()) {
      double v = 0;
      read(t, "target_loss", v, "train");
      c.train.target_loss = v;
    }
  }
  validate(c.train);
  if (j.contains("experiment")) {
    const Json& e = j["experiment"];
    detail::check_keys(e, "experiment", {"industry", "variants", "dump_attention"});
    if (e.contains("industry")) {
      std::string s;
      read(e, "industry", s, "experiment");
      c.industry = s;
    }
    if (e.contains("variants")) {
      std::vector<std::string> names;
      read(e, "variants", names, "experiment");
      c.variants.clear();
      for (const auto& n : names) c.variants.push_back(parse_variant(n));
      if (c.variants.empty()) throw ConfigError("experiment.variants must not be empty");
    }
    read(e, "dump_attention", c.dump_attention, "experiment");
  }
  if (j.contains("output_dir")) {
    std::string p;
    read(j, "output_dir", p, "config");
    c.output_dir = detail::resolve(base_dir, p);
  } else {
    c.output_dir = detail::resolve(base_dir, "out");
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

/// --seed: one seed for the generator, the initialization and the trainer.
inline void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
  if (c.data.synthetic) c.data.synthetic->seed = seed;
  c.model.seed = seed;
  c.train.seed = seed;
}

/// Canonical form of the effective configuration (after overrides).
inline Json to_json(const ExperimentConfig& c) {
  Json j;
  if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    j["data"]["synthetic"] = {{"n_companies", s.n_companies}, {"n_days", s.n_days},
                              {"n_sectors", s.n_sectors},     {"factor_strength", s.factor_strength},
                              {"noise_sigma", s.noise_sigma}, {"seed", s.seed},
                              {"lead_lag", s.lead_lag},       {"cross_leakage", s.cross_leakage}};
  } else {
    j["data"]["csv"] = c.data.csv->generic_string();
  }
  if (c.data.industry_map) j["data"]["industry_map"] = c.data.industry_map->generic_string();
  const auto& sc = c.data.schema;
  j["data"]["schema"] = {{"date", sc.date},       {"ticker", sc.ticker},
                         {"open", sc.open},       {"high", sc.high},
                         {"low", sc.low},         {"close", sc.close},
                         {"turnover_rate", sc.turnover_rate},
                         {"turnover_unit", sc.turnover_unit == TurnoverUnit::percent ? "percent" : "fraction"}};
  j["data"]["tickers"] = c.data.tickers;
  j["data"]["industries"] = c.data.industries;
  j["features"]["price_mode"] = to_string(c.price_mode);
  j["split"] = {{"train", c.split.train_fraction}, {"val", c.split.val_fraction}, {"test", c.split.test_fraction}};
  j["model"] = {{"variant", to_string(c.model.variant)},
                {"task", to_string(c.model.task)},
                {"hidden", c.model.hidden},
                {"window", c.model.window},
                {"heads", c.model.heads},
                {"regression_head", to_string(c.model.regression_head)},
                {"seed", c.model.seed}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"epochs", c.train.epochs}, {"patience", c.train.patience},
                {"seed", c.train.seed}};
  j["train"]["gradient_clip"] = c.train.gradient_clip ? Json(*c.train.gradient_clip) : Json(nullptr);
  j["train"]["target_loss"] = c.train.target_loss ? Json(*c.train.target_loss) : Json(nullptr);
  std::vector<std::string> variants;
  for (Variant v : c.variants) variants.emplace_back(to_string(v));
  j["experiment"] = {{"variants", variants}, {"dump_attention", c.dump_attention}};
  j["experiment"]["industry"] = c.industry ? Json(*c.industry) : Json(nullptr);
  return j;
}

inline std::uint32_t config_digest(const ExperimentConfig& c) { return crc32(to_json(c).dump()); }

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Data and training plumbing
// ---------------------------------------------------------------------------

inline std::vector<std::string> industry_tickers(const PanelDataset& p, const std::string& industry) {
  if (!p.industry) throw ConfigError("an industry map is required for industry selection");
  std::vector<std::string> out;
  for (const auto& t : p.tickers) {
    auto it = p.industry->find(t);
    if (it != p.industry->end() && it->second == industry) out.push_back(t);
  }
  return out;
}

/// Loads or generates the panel, then applies ticker and industry filters.
inline PanelDataset load_panel(const ExperimentConfig& c) {
  PanelDataset p;
  if (c.data.synthetic) {
    p = generate_synthetic(*c.data.synthetic);
  } else {
    p = align_and_build(load_csv(*c.data.csv, c.data.schema), c.data.tickers);
  }
  if (c.data.industry_map) p.industry = load_industry_map(*c.data.industry_map);
  if (c.data.synthetic && !c.data.tickers.empty()) p = select_tickers(p, c.data.tickers);
  if (!c.data.industries.empty()) {
    std::vector<std::string> keep;
    for (const auto& t : p.tickers)
      for (const auto& ind : c.data.industries)
        if (p.industry && p.industry->count(t) && p.industry->at(t) == ind) keep.push_back(t);
    if (!p.industry) throw ConfigError("data.industries needs an industry map");
    if (keep.empty()) throw ConfigError("no tickers left after the industry filter");
    p = select_tickers(p, keep);
  }
  return p;
}

inline Splits make_splits(const PanelDataset& p, const ExperimentConfig& c, std::size_t window) {
  return prepare_samples(p, window, c.split, c.price_mode);
}

struct TrainRun {
  TrainResult result;
  MetricsReport train, val, test;
};

inline TrainRun run_training(const Splits& s, const ModelConfig& model, const TrainConfig& tc,
                             std::span<const std::size_t> eval_companies = {}) {
  TrainRun run{train(build(model), s.train, s.val, tc), {}, {}, {}};
  run.train = evaluate(run.result.model, s.train, "train", eval_companies);
  run.val = evaluate(run.result.model, s.val, "val", eval_companies);
  run.test = evaluate(run.result.model, s.test, "test", eval_companies);
  return run;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + path.string());
  return out;
}

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const MetricsReport& r) {
  return {{"split", r.split},
          {"n_samples", r.n_samples},
          {"acc", detail::opt_json(r.acc)},
          {"auc", detail::opt_json(r.auc)},
          {"mse", detail::opt_json(r.mse)},
          {"mae", detail::opt_json(r.mae)}};
}

inline std::string metrics_csv_header() { return "split,n_samples,acc,auc,mse,mae"; }

inline std::string metrics_csv_row(const MetricsReport& r) {
  return r.split + "," + std::to_string(r.n_samples) + "," + detail::opt(r.acc) + "," + detail::opt(r.auc) + "," +
         detail::opt(r.mse) + "," + detail::opt(r.mae);
}

inline void write_history_csv(const std::vector<EpochRecord>& h, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : h) out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
}

inline void write_json(const Json& j, const std::filesystem::path& path) { detail::open_output(path) << j.dump(2) << '\n'; }

/// Metadata shared by every JSON report.
inline Json report_header(const ExperimentConfig& c, const std::string& command) {
  return {{"command", command},
          {"config_digest", hex32(config_digest(c))},
          {"seed", c.model.seed},
          {"config", to_json(c)}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Files written by a command, in creation order.
using Outputs = std::vector<std::filesystem::path>;

inline Outputs cmd_synth(const ExperimentConfig& c) {
  if (!c.data.synthetic) throw ConfigError("synth needs a data.synthetic section");
  const auto p = generate_synthetic(*c.data.synthetic);
  const auto csv = c.output_dir / "prices.csv", map = c.output_dir / "industry_map.csv";
  detail::open_output(csv).close();
  write_csv(p, csv);
  write_industry_map(*p.industry, map);
  return {csv, map};
}

inline Outputs cmd_train(const ExperimentConfig& c) {
  const auto panel = load_panel(c);
  const auto splits = make_splits(panel, c, c.model.window);
  const auto run = run_training(splits, c.model, c.train);
  const auto ckpt = c.output_dir / "model.ckpt", hist = c.output_dir / "history.csv",
             json = c.output_dir / "metrics.json", csv = c.output_dir / "metrics.csv";
  detail::open_output(ckpt).close();
  save_checkpoint(run.result.model, ckpt);
  write_history_csv(run.result.history, hist);
  Json j = report_header(c, "train");
  j["best_epoch"] = run.result.best_epoch;
  j["epochs_run"] = run.result.history.size();
  j["parameter_count"] = run.result.model.parameter_count();
  j["metrics"] = Json::array({to_json(run.train), to_json(run.val), to_json(run.test)});
  write_json(j, json);
  auto out = detail::open_output(csv);
  out << metrics_csv_header() << '\n';
  for (const auto* r : {&run.train, &run.val, &run.test}) out << metrics_csv_row(*r) << '\n';
  return {ckpt, hist, json, csv};
}

inline std::filesystem::path default_checkpoint(const ExperimentConfig& c) { return c.output_dir / "model.ckpt"; }

inline Outputs cmd_evaluate(const ExperimentConfig& c, const std::filesystem::path& checkpoint) {
  const auto model = load_checkpoint(checkpoint);
  const auto panel = load_panel(c);
  const auto splits = make_splits(panel, c, model.config.window);
  const MetricsReport reports[] = {evaluate(model, splits.train, "train"), evaluate(model, splits.val, "val"),
                                   evaluate(model, splits.test, "test")};
  const auto json = c.output_dir / "evaluation.json", csv = c.output_dir / "evaluation.csv";
  Json j = report_header(c, "evaluate");
  j["model"] = serialize(model.config);
  j["metrics"] = Json::array();
  for (const auto& r : reports) j["metrics"].push_back(to_json(r));
  write_json(j, json);
  auto out = detail::open_output(csv);
  out << metrics_csv_header() << '\n';
  for (const auto& r : reports) out << metrics_csv_row(r) << '\n';
  return {json, csv};
}

struct ComparisonRow {
  Variant variant;
  Task task;
  MetricsReport test;
};

/// Every configured variant on both tasks, on one shared split.
inline std::vector<ComparisonRow> run_comparison(const ExperimentConfig& c,
                                                 const std::function<void(const ComparisonRow&)>& progress = {}) {
  const auto panel = load_panel(c);
  const auto splits = make_splits(panel, c, c.model.window);
  std::vector<ComparisonRow> rows;
  for (Task task : {Task::classification, Task::regression})
    for (Variant v : c.variants) {
      ModelConfig m = c.model;
      m.variant = v;
      m.task = task;
      rows.push_back({v, task, run_training(splits, m, c.train).test});
      if (progress) progress(rows.back());
    }
  return rows;
}

inline Outputs cmd_compare(const ExperimentConfig& c, const std::function<void(const ComparisonRow&)>& progress = {}) {
  const auto rows = run_comparison(c, progress);
  const auto csv = c.output_dir / "comparison.csv", json = c.output_dir / "comparison.json";
  auto out = detail::open_output(csv);
  out << "variant,task,n_samples,acc,auc,mse,mae\n";
  Json j = report_header(c, "compare");
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    const auto& m = r.test;
    out << to_string(r.variant) << ',' << to_string(r.task) << ',' << m.n_samples << ',' << detail::opt(m.acc) << ','
        << detail::opt(m.auc) << ',' << detail::opt(m.mse) << ',' << detail::opt(m.mae) << '\n';
    Json row = to_json(m);
    row["variant"] = to_string(r.variant);
    row["task"] = to_string(r.task);
    j["rows"].push_back(row);
  }
  out.close();
  write_json(j, json);
  return {csv, json};
}

struct IndustryResult {
  std::vector<std::string> tickers;  // evaluation set, shared by both runs
  std::size_t all_companies = 0;
  MetricsReport all_industry;
  MetricsReport single_industry;
};

/// Run A trains on every company and is scored on the target industry; run B
/// trains and scores on the target industry alone.
inline IndustryResult run_industry(const ExperimentConfig& c) {
  if (!c.industry) throw ConfigError("industry needs experiment.industry");
  const auto panel = load_panel(c);
  IndustryResult r;
  r.tickers = industry_tickers(panel, *c.industry);
  if (r.tickers.size() < 2)
    throw DegenerateGraphError("industry '" + *c.industry + "' has " + std::to_string(r.tickers.size()) +
                               " tickers; at least 2 are needed");
  r.all_companies = panel.n_companies();
  std::vector<std::size_t> idx;
  for (const auto& t : r.tickers)
    idx.push_back(static_cast<std::size_t>(std::find(panel.tickers.begin(), panel.tickers.end(), t) - panel.tickers.begin()));
  const auto all = run_training(make_splits(panel, c, c.model.window), c.model, c.train, idx);
  r.all_industry = all.test;
  r.all_industry.split = "all-industry";
  const auto single_panel = select_tickers(panel, r.tickers);
  r.single_industry = run_training(make_splits(single_panel, c, c.model.window), c.model, c.train).test;
  r.single_industry.split = "single-industry";
  return r;
}

inline Outputs cmd_industry(const ExperimentConfig& c) {
  const auto r = run_industry(c);
  const auto csv = c.output_dir / "industry.csv", json = c.output_dir / "industry.json";
  auto out = detail::open_output(csv);
  out << "run,train_companies,eval_companies,n_samples,acc,auc,mse,mae\n";
  for (const auto* m : {&r.all_industry, &r.single_industry}) {
    const std::size_t n_train = m == &r.all_industry ? r.all_companies : r.tickers.size();
    out << m->split << ',' << n_train << ',' << r.tickers.size() << ',' << m->n_samples << ',' << detail::opt(m->acc)
        << ',' << detail::opt(m->auc) << ',' << detail::opt(m->mse) << ',' << detail::opt(m->mae) << '\n';
  }
  out.close();
  Json j = report_header(c, "industry");
  j["industry"] = *c.industry;
  j["eval_tickers"] = r.tickers;
  j["reports"] = Json::array({to_json(r.all_industry), to_json(r.single_industry)});
  write_json(j, json);
  return {csv, json};
}

inline Outputs cmd_plot_data(const ExperimentConfig& c, const std::filesystem::path& checkpoint) {
  const auto model = load_checkpoint(checkpoint);
  if (model.config.task != Task::regression)
    throw ConfigError("task mismatch: plot-data needs a regression checkpoint, got " +
                      std::string(to_string(model.config.task)));
  const auto panel = load_panel(c);
  if (panel.n_companies() == 0) throw DataError("no companies to plot");
  const auto splits = make_splits(panel, c, model.config.window);
  const auto csv = c.output_dir / "plot.csv", att = c.output_dir / "attention.csv";
  auto out = detail::open_output(csv);
  out << "date,ticker,actual_return,predicted_return\n";
  std::ofstream attention;
  if (c.dump_attention) {
    attention = detail::open_output(att);
    attention << "date,head,i,j,q,g\n";
  }
  for (const auto& s : splits.test) {
    const auto b = forward(model, s);
    const std::string date = format_date(panel.dates[s.t_index]);
    for (std::size_t i = 0; i < panel.n_companies(); ++i)
      out << date << ',' << panel.tickers[i] << ',' << format_double(panel.ret(i, s.t_index)) << ','
          << format_double(b.output(i, 0)) << '\n';
    if (!c.dump_attention) continue;
    for (std::size_t h = 0; h < b.attention.size(); ++h) {
      const auto& w = b.attention[h];
      for (std::size_t i = 0; i < w.Q.rows(); ++i)
        for (std::size_t j = 0; j < w.Q.cols(); ++j)
          attention << date << ',' << h << ',' << i << ',' << j << ',' << format_double(w.Q(i, j)) << ','
                    << (w.G.empty() ? std::string() : format_double(w.G(i, j))) << '\n';
    }
  }
  Outputs files{csv};
  if (c.dump_attention) files.push_back(att);
  return files;
}

}  // namespace gatagnn
