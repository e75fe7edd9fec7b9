#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalesgd/algorithms.hpp"

namespace scalesgd {

enum class SweepMode { async_cost, sync_gain };
enum class Situation { negative_growth, growth_below_theta, not_reached };

std::string to_string(SweepMode m);
std::string to_string(Situation s);
SweepMode parse_sweep_mode(const std::string& s);

struct SweepConfig {
  RunConfig base;
  std::vector<std::size_t> worker_counts;
  SweepMode mode = SweepMode::async_cost;
  std::size_t fixed_iter = 0;      // sync_gain
  std::optional<double> epsilon;   // async_cost; default derived from an m = 1 baseline
  double epsilon_factor = 1.05;    // multiplier on the baseline's best test logloss
  double theta = 1e-3;             // sync_gain near-zero threshold
  bool theta_relative = false;     // compare growth_i against theta * metric_i instead
  std::size_t jobs = 1;

  void validate() const;
};

struct GainGrowthRow {
  std::size_t m = 0;
  double metric = 0.0;
  std::optional<double> gain_growth;  // absent on the last row
};

using GainGrowthTable = std::vector<GainGrowthRow>;

struct UpperBoundReport {
  std::optional<std::size_t> bound_low;
  std::optional<std::size_t> bound_high;  // absent when open-ended
  Situation situation = Situation::not_reached;

  friend bool operator==(const UpperBoundReport&, const UpperBoundReport&) = default;
};

/// Iterations each worker spends before the test logloss first reaches epsilon.
/// Asynchronous trainers share the server count across m workers (ceil(iter / m));
/// synchronous ones run every server iteration on every worker.
std::size_t cost_to_epsilon(const Trace& trace, std::size_t m, double epsilon, bool asynchronous);

/// growth_i = costs_i - costs_{i+1}.
std::vector<double> gain_growth_async(std::span<const double> costs);
/// growth_i = losses_i - losses_{i+1} at a fixed server iteration.
std::vector<double> gain_growth_sync(std::span<const double> losses);

/// First adjacent pair whose growth is negative (both modes) or, in sync mode,
/// positive but below theta. When `scale` is given the threshold for pair i is
/// theta * |scale[i]| (growth relative to the metric it improves on). Throws
/// ConfigError for empty growths or mismatched counts.
UpperBoundReport detect_upper_bound(std::span<const double> growths, std::span<const std::size_t> worker_counts,
                                    SweepMode mode, double theta, std::span<const double> scale = {});

GainGrowthTable make_table(std::span<const std::size_t> worker_counts, std::span<const double> metrics);

/// Test logloss at the last evaluated server_iter <= iter.
double loss_at_iteration(const Trace& trace, std::size_t iter);

struct SweepResult {
  std::map<std::size_t, Trace> traces;
  GainGrowthTable table;
  UpperBoundReport report;
  std::optional<double> epsilon;  // async mode: the target actually used
};

/// Runs every worker count on the same source and evaluation sets. Points run on
/// up to cfg.jobs threads; results are ordered by m.
SweepResult run_sweep(const SweepConfig& cfg, const SampleSource& src, const EvalSets& eval);

/// Table and report from already-measured metrics (costs in async mode, losses in sync mode).
SweepResult replay_sweep(std::span<const std::size_t> worker_counts, std::span<const double> metrics,
                         SweepMode mode, double theta, bool theta_relative = false);

void write_gain_growth_csv(std::ostream& out, const GainGrowthTable& table);
nlohmann::ordered_json to_json(const UpperBoundReport& r);

}  // namespace scalesgd
