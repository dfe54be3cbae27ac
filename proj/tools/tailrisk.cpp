#include <cstdio>
#include <iostream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tailrisk/app/io.hpp"
#include "tailrisk/app/tasks.hpp"
#include "tailrisk/errors.hpp"

using tailrisk::tasks::json;

namespace {

// Flag values are written into params after the config file has been read,
// so that flags win. Only options given on the command line are applied.
struct Overrides {
  std::vector<std::function<void(json&)>> setters;
  std::vector<std::string> raw;  // --param key=value

  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *holder, help);
    setters.push_back([opt, key, holder](json& params) {
      if (opt->count() > 0) params[key] = *holder;
    });
  }

  // Integer or a keyword such as "auto".
  void bind_count_or_word(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto holder = std::make_shared<std::string>();
    CLI::Option* opt = app->add_option(flag, *holder, help);
    setters.push_back([opt, key, holder](json& params) {
      if (opt->count() == 0) return;
      std::size_t v = 0;
      params[key] = CLI::detail::lexical_cast(*holder, v) ? json(v) : json(*holder);
    });
  }

  void bind_list(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    bind<std::vector<double>>(app, flag, key, help);
  }

  void bind_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, help);
    const bool value = flag.rfind("--no-", 0) != 0;
    setters.push_back([opt, key, value](json& params) {
      if (opt->count() > 0) params[key] = value;
    });
  }

  void apply(json& params) const {
    for (const auto& set : setters) set(params);
    for (const auto& kv : raw) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw tailrisk::ConfigError("--param expects key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      json parsed = json::parse(value, nullptr, false);
      params[key] = parsed.is_discarded() ? json(value) : parsed;
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme-value estimation toolkit: return levels, tail regression, joint tail probabilities"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON run config (task, phase, seed, threads, out_dir, params)");
  app.add_option("--seed", seed, "run seed");
  app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "output directory");

  Overrides ov;
  std::string task, phase;
  auto add_param = [&](CLI::App* sub) {
    sub->add_option("--param", ov.raw, "override a parameter, key=value (value read as JSON when it parses)");
  };

  auto* c1 = app.add_subcommand("c1", "covariate-dependent extreme quantiles");
  c1->require_subcommand(1);
  for (const char* ph : {"train", "predict", "bootstrap"}) {
    auto* sub = c1->add_subcommand(ph, std::string("c1 ") + ph);
    sub->callback([&, ph]() {
      task = "c1";
      phase = ph;
    });
    ov.bind<std::string>(sub, "--train", "train", "training CSV with the response");
    ov.bind<std::string>(sub, "--test", "test", "test CSV (covariates)");
    ov.bind<std::string>(sub, "--model", "model", "model JSON written by c1 train");
    ov.bind<std::string>(sub, "--response", "response", "response column");
    ov.bind<double>(sub, "--tau", "tau", "target quantile level");
    ov.bind<double>(sub, "--tau0", "tau0", "intermediate level");
    ov.bind<std::size_t>(sub, "--B", "B", "bootstrap resamples");
    ov.bind<double>(sub, "--alpha", "confidence", "central interval confidence");
    ov.bind<std::string>(sub, "--shape-mode", "shape_mode", "constant or varying");
    ov.bind<std::string>(sub, "--interval", "interval", "normal or percentile");
    ov.bind_flag(sub, "--warm-start", "warm_start", "warm-start bootstrap refits");
    ov.bind_flag(sub, "--no-warm-start", "warm_start", "refit bootstrap models from scratch");
    ov.bind_flag(sub, "--grid-search", "grid_search", "select the GPD network by grid search");
    add_param(sub);
  }

  auto* c2 = app.add_subcommand("c2", "return level with fine-tuning");
  c2->callback([&]() { task = "c2"; });
  ov.bind<std::string>(c2, "--input", "input", "input CSV");
  ov.bind<std::string>(c2, "--column", "column", "data column");
  ov.bind<double>(c2, "--T", "T", "return period in years");
  ov.bind<double>(c2, "--n-per-year", "n_per_year", "observations per year");
  ov.bind<std::size_t>(c2, "--k", "k", "calibration folds");
  ov.bind<double>(c2, "--threshold-quantile", "threshold_quantile", "POT threshold quantile");
  add_param(c2);

  auto* c3 = app.add_subcommand("c3", "trivariate joint tail probabilities");
  c3->callback([&]() { task = "c3"; });
  ov.bind<std::string>(c3, "--input", "input", "input CSV");
  ov.bind<double>(c3, "--u", "u", "threshold probability for chi-bar");
  ov.bind<std::uint64_t>(c3, "--draws", "draws", "Monte Carlo draws");
  ov.bind_list(c3, "--thresholds", "thresholds", "p1 thresholds (three values)");
  ov.bind<double>(c3, "--p2-level", "p2_level", "p2 level");
  ov.bind<std::string>(c3, "--season-column", "season_column", "season covariate column");
  ov.bind<std::string>(c3, "--atmosphere-column", "atmosphere_column", "atmosphere covariate column");
  add_param(c3);

  auto* c4 = app.add_subcommand("c4", "cluster-decomposed joint exceedance probabilities");
  c4->callback([&]() { task = "c4"; });
  ov.bind<std::string>(c4, "--input", "input", "site CSV");
  ov.bind<double>(c4, "--u", "u", "variogram threshold probability");
  ov.bind_count_or_word(c4, "--k", "k", "number of clusters or 'auto'");
  ov.bind<std::string>(c4, "--scenario", "scenario", "i, ii or both");
  ov.bind<std::string>(c4, "--linkage", "linkage", "average or complete");
  ov.bind_list(c4, "--p0-grid", "p0_grid", "intermediate probabilities");
  add_param(c4);

  auto* bench = app.add_subcommand("bench", "fine-tuned vs classic return levels on simulated data");
  bench->callback([&]() { task = "bench"; });
  ov.bind<std::size_t>(bench, "--replicates", "replicates", "replicates per cell");
  add_param(bench);

  auto* fixture = app.add_subcommand("fixture", "write a synthetic dataset with its truth");
  fixture->add_option("kind", phase, "c1_synth, c3_trivariate or c4_blocks")->required();
  fixture->callback([&]() { task = "fixture"; });
  ov.bind<std::size_t>(fixture, "--n", "n", "rows");
  add_param(fixture);

  CLI11_PARSE(app, argc, argv);

  try {
    tailrisk::tasks::RunConfig cfg;
    if (!config_path.empty()) cfg = tailrisk::tasks::run_config_from_json(tailrisk::io::read_json(config_path));
    if (!cfg.task.empty() && cfg.task != task) {
      throw tailrisk::ConfigError("config file is for task '" + cfg.task + "', command line asks for '" + task + "'");
    }
    if (!config_path.empty() && !cfg.phase.empty() && cfg.phase != phase) {
      throw tailrisk::ConfigError("config file is for phase '" + cfg.phase + "', command line asks for '" + phase + "'");
    }
    cfg.task = task;
    cfg.phase = phase;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    ov.apply(cfg.params);
    const json result = tailrisk::tasks::run(cfg);
    std::cout << (std::filesystem::path(cfg.out_dir) / tailrisk::tasks::result_file_name(cfg)).string() << '\n';
    (void)result;
    return 0;
  } catch (const tailrisk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const tailrisk::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const tailrisk::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return 4;
  } catch (const tailrisk::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
