#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalesgd/data.hpp"
#include "scalesgd/errors.hpp"
#include "scalesgd/objective.hpp"
#include "scalesgd/rng.hpp"
#include "scalesgd/source.hpp"

namespace scalesgd {

enum class Algorithm { seq_sgd, hogwild, minibatch, dadm, ecd_psgd };
enum class DelayModel { round_robin, uniform };
enum class Topology { ring, complete };
enum class Compression { identity, stochastic_quantize };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct RunConfig {
  Algorithm algorithm = Algorithm::seq_sgd;
  std::size_t workers = 1;
  double gamma = 0.1;
  double lambda = 0.01;
  /// Mini-batch size; 0 means "equal to workers", any other value must equal workers.
  std::size_t batch_size = 0;
  std::size_t local_batch_size = 1;  // DADM
  std::size_t worker_minibatch = 1;  // Hogwild!
  DelayModel delay_model = DelayModel::round_robin;
  /// Bound for the uniform delay model; 0 means "equal to workers".
  std::size_t tau_max = 0;
  Topology topology = Topology::ring;
  Compression compression = Compression::identity;
  unsigned quantize_bits = 4;
  std::size_t dadm_passes = 5;
  std::uint64_t seed = 1;
  std::size_t max_server_iters = 1000;
  std::size_t eval_every = 10;
  std::optional<double> epsilon_target;
  /// Declare convergence on train rather than test logloss.
  bool target_on_train = false;
  /// Skip train logloss evaluation (column becomes nan) to save time.
  bool eval_train = true;
  /// DADM: record the duality gap after every server iteration.
  bool record_duality_gap = false;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
  std::size_t effective_batch_size() const { return batch_size == 0 ? workers : batch_size; }
  std::size_t effective_tau_max() const { return tau_max == 0 ? workers : tau_max; }
};

struct TraceRow {
  std::size_t server_iter = 0;
  std::size_t worker_iters = 0;
  double pca_time = 0.0;
  double train_logloss = 0.0;
  double test_logloss = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

using Trace = std::vector<TraceRow>;

inline constexpr const char* kTraceHeader = "server_iter,worker_iters,pca_time,train_logloss,test_logloss";

void write_trace_csv(std::ostream& out, const Trace& trace);
std::string trace_to_csv(const Trace& trace);
Trace read_trace_csv(std::istream& in);

struct RunStats {
  std::size_t server_iters = 0;
  std::size_t max_staleness = 0;
  std::optional<std::size_t> reached_at;  // first evaluated server_iter meeting the target
  std::vector<double> duality_gaps;       // DADM with record_duality_gap
  std::vector<double> dual_objectives;    // alongside duality_gaps
  std::vector<double> final_model;
  std::vector<std::vector<double>> worker_models;  // ECD-PSGD per-worker x_i
};

struct RunResult {
  Trace trace;
  RunStats stats;
};

/// Raised when an iterate stops being finite; carries the trace recorded so far.
class RunDiverged : public DivergenceError {
 public:
  RunDiverged(std::size_t last_finite_step, Trace partial)
      : DivergenceError(last_finite_step, "iterate became non-finite after server step " +
                                              std::to_string(last_finite_step)),
        partial_(std::move(partial)) {}

  const Trace& partial_trace() const noexcept { return partial_; }

 private:
  Trace partial_;
};

/// Datasets a trainer evaluates on. Either may be null; its column is then nan.
struct EvalSets {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
};

RunResult run_seq_sgd(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);
RunResult run_minibatch(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);
RunResult run_hogwild(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);
RunResult run_ecd_psgd(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);
/// Requires a finite source; stream sources must be materialised first.
RunResult run_dadm(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);

/// Dispatch on cfg.algorithm.
RunResult run(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg);

// --- building blocks exposed for testing ------------------------------------

/// Hogwild! delay schedule: staleness of the gradient applied at server step j.
class DelaySchedule {
 public:
  DelaySchedule(DelayModel model, std::size_t workers, std::size_t tau_max, std::uint64_t seed)
      : model_(model), workers_(workers), tau_max_(tau_max), seed_(seed) {}

  std::size_t staleness(std::size_t j) const;
  std::size_t read_step(std::size_t j) const { return j - staleness(j); }
  /// Largest staleness the schedule can produce.
  std::size_t bound() const { return model_ == DelayModel::round_robin ? workers_ - 1 : tau_max_; }

 private:
  DelayModel model_;
  std::size_t workers_;
  std::size_t tau_max_;
  std::uint64_t seed_;
};

/// Row-major m x m gossip weights: ring (self and two neighbours at 1/3; halves
/// for m = 2) or complete (1/m everywhere).
std::vector<double> mixing_matrix(Topology topology, std::size_t m);

/// Unbiased stochastic rounding of each coordinate onto 2^bits - 1 levels of
/// max|z|, so that E[C(z)] = z.
std::vector<double> stochastic_quantize(std::span<const double> z, unsigned bits, Rng& rng);

/// One worker's share of a DADM round.
struct LocalDualProblem {
  std::vector<const Sample*> samples;  // distinct samples of Q_local
  std::vector<double> alpha;           // their current dual variables
  std::span<const double> v;           // v broadcast at the start of the round
  double lambda = 0.01;
  double n_local = 1.0;                // n / m
};

struct LocalDualSolution {
  std::vector<double> delta_alpha;
  std::vector<Feature> delta_v;        // (1/(lambda n_local)) sum y_i xi_i delta_alpha_i, ascending index
};

/// Cyclic coordinate maximisation of the local dual subproblem: `passes` sweeps of
/// safeguarded Newton (bisection fallback) per coordinate, alpha kept in [eps, 1-eps].
LocalDualSolution dadm_local_solve(const LocalDualProblem& problem, std::size_t passes);

/// Local subproblem value sum -L*(-(alpha+d)) - (lambda n_local / 2) |v + sum y xi d / (lambda n_local)|^2.
double local_dual_objective(const LocalDualProblem& problem, std::span<const double> delta_alpha);

}  // namespace scalesgd
