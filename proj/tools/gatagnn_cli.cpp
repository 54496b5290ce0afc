#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gatagnn/experiment.hpp"

using namespace gatagnn;

namespace {

enum Exit { ok = 0, runtime_failure = 1, config_failure = 2 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
};

ExperimentConfig effective_config(const Options& o) {
  auto c = load_experiment_config(o.config);
  if (o.seed) apply_seed(c, *o.seed);
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

std::filesystem::path checkpoint_path(const Options& o, const ExperimentConfig& c) {
  return o.checkpoint.empty() ? default_checkpoint(c) : std::filesystem::path(o.checkpoint);
}

int run(const std::string& verb, const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto c = effective_config(o);
  Outputs files;
  if (verb == "synth") {
    files = cmd_synth(c);
  } else if (verb == "train") {
    files = cmd_train(c);
  } else if (verb == "evaluate") {
    files = cmd_evaluate(c, checkpoint_path(o, c));
  } else if (verb == "compare") {
    files = cmd_compare(c, [](const ComparisonRow& r) {
      std::cerr << "  " << to_string(r.variant) << " " << to_string(r.task) << " done\n";
    });
  } else if (verb == "industry") {
    files = cmd_industry(c);
  } else if (verb == "plot-data") {
    files = cmd_plot_data(c, checkpoint_path(o, c));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& f : files) std::cout << f.string() << '\n';
  std::fprintf(stderr, "%s: config %s, seed %llu, %.2f s\n", verb.c_str(), hex32(config_digest(c)).c_str(),
               static_cast<unsigned long long>(c.model.seed), secs);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stock movement forecasting with learned inter-company relations"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "override every seed in the config");
  app.add_option("--out", o.out, "output directory");

  const std::pair<const char*, const char*> verbs[] = {
      {"synth", "generate a synthetic panel and its industry map"},
      {"train", "train the configured model"},
      {"evaluate", "score a checkpoint on every split"},
      {"compare", "train and score every variant on both tasks"},
      {"industry", "all-industry versus single-industry training"},
      {"plot-data", "dump test-split predictions for plotting"},
  };
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (std::string(name) == "evaluate" || std::string(name) == "plot-data")
      sub->add_option("--checkpoint", o.checkpoint, "checkpoint file (default: <out>/model.ckpt)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_failure;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    return run(verb, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_failure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return config_failure;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return config_failure;
  } catch (const DegenerateGraphError& e) {
    std::cerr << "degenerate graph: " << e.what() << '\n';
    return config_failure;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return runtime_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return runtime_failure;
  }
}
