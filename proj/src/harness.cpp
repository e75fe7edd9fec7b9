#include "scalesgd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace scalesgd {

std::string to_string(SweepMode m) { return m == SweepMode::async_cost ? "async_cost" : "sync_gain"; }

std::string to_string(Situation s) {
  switch (s) {
    case Situation::negative_growth: return "negative_growth";
    case Situation::growth_below_theta: return "growth_below_theta";
    case Situation::not_reached: return "not_reached";
  }
  return "not_reached";
}

SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "async_cost") return SweepMode::async_cost;
  if (s == "sync_gain") return SweepMode::sync_gain;
  throw ConfigError("unknown sweep mode '" + s + "'");
}

void SweepConfig::validate() const {
  if (worker_counts.empty()) throw ConfigError("worker_counts is empty");
  for (std::size_t i = 0; i < worker_counts.size(); ++i) {
    if (worker_counts[i] == 0) throw ConfigError("worker counts must be positive");
    if (i > 0 && worker_counts[i] <= worker_counts[i - 1]) throw ConfigError("worker_counts must be strictly increasing");
  }
  if (mode == SweepMode::sync_gain && fixed_iter == 0) throw ConfigError("sync_gain sweeps need fixed_iter");
  if (!(theta >= 0.0)) throw ConfigError("theta must be non-negative");
  if (!(epsilon_factor > 0.0)) throw ConfigError("epsilon_factor must be positive");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

std::size_t cost_to_epsilon(const Trace& trace, std::size_t m, double epsilon, bool asynchronous) {
  if (m == 0) throw ConfigError("worker count must be positive");
  for (const auto& row : trace) {
    if (row.test_logloss <= epsilon) return asynchronous ? (row.server_iter + m - 1) / m : row.server_iter;
  }
  throw TargetNotReached("test logloss never reached " + std::to_string(epsilon));
}

namespace {
std::vector<double> successive_differences(std::span<const double> values) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) out.push_back(values[i] - values[i + 1]);
  return out;
}
}  // namespace

std::vector<double> gain_growth_async(std::span<const double> costs) { return successive_differences(costs); }

std::vector<double> gain_growth_sync(std::span<const double> losses) { return successive_differences(losses); }

UpperBoundReport detect_upper_bound(std::span<const double> growths, std::span<const std::size_t> worker_counts,
                                    SweepMode mode, double theta, std::span<const double> scale) {
  if (growths.empty()) throw ConfigError("no gain growths to inspect");
  if (worker_counts.size() != growths.size() + 1) throw ConfigError("need one more worker count than growths");
  if (!scale.empty() && scale.size() < growths.size()) throw ConfigError("need a scale value per growth");
  for (std::size_t i = 0; i < growths.size(); ++i) {
    if (growths[i] < 0.0)
      return {worker_counts[i], worker_counts[i + 1], Situation::negative_growth};
    const double threshold = scale.empty() ? theta : theta * std::abs(scale[i]);
    if (mode == SweepMode::sync_gain && growths[i] < threshold)
      return {worker_counts[i], worker_counts[i + 1], Situation::growth_below_theta};
  }
  return {worker_counts.back(), std::nullopt, Situation::not_reached};
}

GainGrowthTable make_table(std::span<const std::size_t> worker_counts, std::span<const double> metrics) {
  if (worker_counts.size() != metrics.size()) throw ConfigError("one metric per worker count expected");
  const auto growths = successive_differences(metrics);
  GainGrowthTable table;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    GainGrowthRow row{worker_counts[i], metrics[i], std::nullopt};
    if (i < growths.size()) row.gain_growth = growths[i];
    table.push_back(row);
  }
  return table;
}

double loss_at_iteration(const Trace& trace, std::size_t iter) {
  const TraceRow* best = nullptr;
  for (const auto& row : trace)
    if (row.server_iter <= iter) best = &row;
  if (best == nullptr) throw ConfigError("trace has no evaluation at or before the requested iteration");
  return best->test_logloss;
}

SweepResult replay_sweep(std::span<const std::size_t> worker_counts, std::span<const double> metrics,
                         SweepMode mode, double theta, bool theta_relative) {
  SweepResult out;
  out.table = make_table(worker_counts, metrics);
  if (metrics.size() < 2) {
    out.report = {worker_counts.empty() ? std::nullopt : std::optional(worker_counts.back()), std::nullopt,
                  Situation::not_reached};
    return out;
  }
  const auto growths = successive_differences(metrics);
  out.report = detect_upper_bound(growths, worker_counts, mode, theta,
                                  theta_relative ? metrics : std::span<const double>{});
  return out;
}

namespace {

RunConfig point_config(const SweepConfig& cfg, std::size_t m) {
  RunConfig rc = cfg.base;
  rc.workers = m;
  if (rc.algorithm == Algorithm::minibatch) rc.batch_size = 0;
  if (rc.algorithm == Algorithm::hogwild && rc.delay_model == DelayModel::round_robin) rc.tau_max = 0;
  return rc;
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the first
/// failure in index order.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
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
  const std::size_t threads = std::min(jobs, count);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const SampleSource& src, const EvalSets& eval) {
  cfg.validate();
  const auto& counts = cfg.worker_counts;
  SweepResult out;
  std::vector<double> metrics(counts.size());
  std::vector<Trace> traces(counts.size());

  if (cfg.mode == SweepMode::async_cost) {
    double epsilon = 0.0;
    if (cfg.epsilon) {
      epsilon = *cfg.epsilon;
    } else {
      RunConfig baseline = point_config(cfg, 1);
      baseline.epsilon_target.reset();
      const auto base_run = run(src, eval, baseline);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& row : base_run.trace) best = std::min(best, row.test_logloss);
      if (!std::isfinite(best)) throw ConfigError("baseline produced no test logloss; a test set is required");
      epsilon = cfg.epsilon_factor * best;
    }
    out.epsilon = epsilon;
    const bool asynchronous = cfg.base.algorithm == Algorithm::hogwild;
    parallel_for(counts.size(), cfg.jobs, [&](std::size_t i) {
      RunConfig rc = point_config(cfg, counts[i]);
      rc.epsilon_target = epsilon;
      auto res = run(src, eval, rc);
      try {
        metrics[i] = static_cast<double>(cost_to_epsilon(res.trace, counts[i], epsilon, asynchronous));
      } catch (const TargetNotReached& e) {
        throw TargetNotReached("m=" + std::to_string(counts[i]) + ": " + e.what());
      }
      traces[i] = std::move(res.trace);
    });
  } else {
    parallel_for(counts.size(), cfg.jobs, [&](std::size_t i) {
      RunConfig rc = point_config(cfg, counts[i]);
      rc.epsilon_target.reset();
      rc.max_server_iters = cfg.fixed_iter;
      auto res = run(src, eval, rc);
      metrics[i] = loss_at_iteration(res.trace, cfg.fixed_iter);
      traces[i] = std::move(res.trace);
    });
  }

  auto replay = replay_sweep(counts, metrics, cfg.mode, cfg.theta, cfg.theta_relative);
  out.table = std::move(replay.table);
  out.report = replay.report;
  for (std::size_t i = 0; i < counts.size(); ++i) out.traces.emplace(counts[i], std::move(traces[i]));
  return out;
}

namespace {
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}
}  // namespace

void write_gain_growth_csv(std::ostream& out, const GainGrowthTable& table) {
  out << "m,metric,gain_growth\n";
  for (const auto& row : table) {
    out << row.m << ',' << format_double(row.metric) << ',';
    if (row.gain_growth) out << format_double(*row.gain_growth);
    out << '\n';
  }
}

nlohmann::ordered_json to_json(const UpperBoundReport& r) {
  nlohmann::ordered_json j;
  j["bound_low"] = r.bound_low ? nlohmann::json(*r.bound_low) : nlohmann::json(nullptr);
  j["bound_high"] = r.bound_high ? nlohmann::json(*r.bound_high) : nlohmann::json(nullptr);
  j["situation"] = to_string(r.situation);
  return j;
}

}  // namespace scalesgd
