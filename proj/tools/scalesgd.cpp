// scalesgd: generate datasets, compute character reports, train, and sweep
// worker counts. Experiments are defined by a JSON config; flags only carry
// paths, seeds and parallelism.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 divergence,
// 5 target not reached.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "scalesgd/config.hpp"
#include "scalesgd/errors.hpp"
#include "scalesgd/harness.hpp"
#include "scalesgd/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scalesgd;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kDiverged = 4, kTargetMissed = 5 };

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string output_dir;
};

ExperimentConfig load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("--config is required for this command");
  ExperimentConfig cfg = load_experiment_config(opts.config_path);
  if (opts.seed) {
    cfg.run.seed = *opts.seed;
    cfg.split.seed = *opts.seed;
  }
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (opts.jobs == 0) throw ConfigError("--jobs must be at least 1");
  return cfg;
}

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const auto& j) { open_output(path) << j.dump(2) << '\n'; }

void write_trace(const fs::path& path, const Trace& trace) {
  auto out = open_output(path);
  write_trace_csv(out, trace);
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_gen(const GlobalOptions& opts) {
  const auto cfg = load_config(opts);
  const auto dir = prepare_output(cfg.output_dir);
  const Dataset ds = build_dataset(cfg.dataset);
  save_svmlight((dir / "dataset.svm").string(), ds);

  json sidecar;
  sidecar["dataset"] = cfg.dataset.raw;
  sidecar["n"] = ds.size();
  sidecar["dim"] = ds.dim();
  if (cfg.dataset.is_stream()) {
    // The i.i.d. test set accompanies stream draws.
    const auto data = load_experiment_data(cfg, true);
    if (data.test) {
      save_svmlight((dir / "test.svm").string(), *data.test);
      sidecar["test_n"] = data.test->size();
    }
  }
  write_json(dir / "dataset.json", sidecar);
  std::cout << "wrote " << ds.size() << " samples to " << (dir / "dataset.svm").string() << '\n';
  return kOk;
}

struct MetricsOptions {
  std::string dataset_path;
  std::string format = "svmlight";
  std::size_t label_column = 0;
  std::optional<std::size_t> tau_max;
  std::optional<std::size_t> batch_size;
  bool full = false;
  std::string out;
};

int cmd_metrics(const GlobalOptions& opts, const MetricsOptions& mo) {
  Dataset ds = [&] {
    if (!mo.dataset_path.empty()) {
      if (mo.format != "svmlight" && mo.format != "csv") throw ConfigError("--format must be 'svmlight' or 'csv'");
      const auto path = resolve_data_path(mo.dataset_path);
      return mo.format == "csv" ? load_dense_csv(path, mo.label_column) : load_svmlight(path);
    }
    return build_dataset(load_config(opts).dataset);
  }();
  if (ds.size() == 0) throw DataError("dataset has no samples");
  if (mo.tau_max && *mo.tau_max == 0) throw ConfigError("--tau-max must be positive");
  if (mo.batch_size && *mo.batch_size == 0) throw ConfigError("--batch-size must be positive");

  const auto report = to_json(character_report(ds, mo.tau_max, mo.batch_size), mo.full);
  if (mo.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    prepare_output(fs::path(mo.out).parent_path().empty() ? "." : fs::path(mo.out).parent_path().string());
    write_json(mo.out, report);
  }
  return kOk;
}

EvalSets eval_sets(const ExperimentData& data) { return {data.train.get(), data.test.get()}; }

int cmd_train(const GlobalOptions& opts) {
  const auto cfg = load_config(opts);
  const auto dir = prepare_output(cfg.output_dir);
  const auto data = load_experiment_data(cfg, cfg.run.algorithm == Algorithm::dadm);

  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  try {
    result = run(data.source, eval_sets(data), cfg.run);
  } catch (const RunDiverged& e) {
    write_trace(dir / "trace.csv", e.partial_trace());
    throw;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_trace(dir / "trace.csv", result.trace);
  json summary;
  summary["algorithm"] = to_string(cfg.run.algorithm);
  summary["workers"] = cfg.run.workers;
  summary["seed"] = cfg.run.seed;
  summary["server_iters"] = result.stats.server_iters;
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    summary["final_server_iter"] = last.server_iter;
    summary["final_pca_time"] = last.pca_time;
    summary["final_train_logloss"] = std::isfinite(last.train_logloss) ? json(last.train_logloss) : json(nullptr);
    summary["final_test_logloss"] = std::isfinite(last.test_logloss) ? json(last.test_logloss) : json(nullptr);
  }
  summary["epsilon_target"] = nullable(cfg.run.epsilon_target);
  summary["reached_at"] = result.stats.reached_at ? json(*result.stats.reached_at) : json(nullptr);
  if (cfg.run.algorithm == Algorithm::hogwild) summary["max_staleness"] = result.stats.max_staleness;
  if (!result.stats.duality_gaps.empty()) summary["final_duality_gap"] = result.stats.duality_gaps.back();
  write_json(dir / "summary.json", summary);
  // Wall time is informational only and kept apart so summary.json stays reproducible.
  write_json(dir / "timing.json", json{{"wall_seconds", wall}});

  if (cfg.run.epsilon_target && !result.stats.reached_at) {
    std::cerr << "target " << *cfg.run.epsilon_target << " not reached within " << result.stats.server_iters
              << " server iterations\n";
    return kTargetMissed;
  }
  return kOk;
}

int cmd_sweep(const GlobalOptions& opts) {
  const auto cfg = load_config(opts);
  if (!cfg.sweep) throw ConfigError("config has no sweep section");
  const auto sweep_cfg = cfg.sweep_config(opts.jobs);
  const auto dir = prepare_output(cfg.output_dir);

  SweepResult result;
  if (cfg.sweep->fixture) {
    result = replay_sweep(sweep_cfg.worker_counts, *cfg.sweep->fixture, sweep_cfg.mode, sweep_cfg.theta,
                          sweep_cfg.theta_relative);
  } else {
    const auto data = load_experiment_data(cfg, cfg.run.algorithm == Algorithm::dadm);
    result = run_sweep(sweep_cfg, data.source, eval_sets(data));
  }

  for (const auto& [m, trace] : result.traces) write_trace(dir / ("m" + std::to_string(m) + ".csv"), trace);
  {
    auto out = open_output(dir / "gain_growth.csv");
    write_gain_growth_csv(out, result.table);
  }
  write_json(dir / "upper_bound.json", to_json(result.report));
  if (result.epsilon) write_json(dir / "sweep.json", json{{"mode", to_string(sweep_cfg.mode)}, {"epsilon", *result.epsilon}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalability experiments for parallel SGD-family trainers"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Experiment config (JSON)");
  app.add_option("--seed", opts.seed, "Override run and split seeds");
  app.add_option("--jobs", opts.jobs, "Sweep points run in parallel")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", opts.output_dir, "Override the config's output_dir");

  auto* gen = app.add_subcommand("gen", "Materialise the configured dataset as svmlight plus a JSON sidecar");
  MetricsOptions mo;
  auto* metrics = app.add_subcommand("metrics", "Print the character report of a dataset");
  metrics->add_option("dataset", mo.dataset_path, "Dataset file (defaults to the config's dataset)");
  metrics->add_option("--format", mo.format, "svmlight or csv");
  metrics->add_option("--label-column", mo.label_column, "Label column for csv input");
  metrics->add_option("--tau-max", mo.tau_max, "Window for ls_async");
  metrics->add_option("--batch-size", mo.batch_size, "Batch size for ls_sync");
  metrics->add_flag("--full", mo.full, "Include per-feature means and variances");
  metrics->add_option("--out", mo.out, "Write the report to a file instead of stdout");
  auto* train = app.add_subcommand("train", "Run one training and write trace.csv and summary.json");
  auto* sweep = app.add_subcommand("sweep", "Run a worker-count sweep and detect the scalability upper bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen(opts);
    if (*metrics) return cmd_metrics(opts, mo);
    if (*train) return cmd_train(opts);
    if (*sweep) return cmd_sweep(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const TargetNotReached& e) {
    std::cerr << "target not reached: " << e.what() << '\n';
    return kTargetMissed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
