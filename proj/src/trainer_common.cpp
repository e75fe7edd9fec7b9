#include "trainer_common.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace scalesgd {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::seq_sgd: return "seq_sgd";
    case Algorithm::hogwild: return "hogwild";
    case Algorithm::minibatch: return "minibatch";
    case Algorithm::dadm: return "dadm";
    case Algorithm::ecd_psgd: return "ecd_psgd";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "seq_sgd") return Algorithm::seq_sgd;
  if (s == "hogwild") return Algorithm::hogwild;
  if (s == "minibatch") return Algorithm::minibatch;
  if (s == "dadm") return Algorithm::dadm;
  if (s == "ecd_psgd") return Algorithm::ecd_psgd;
  throw ConfigError("unknown algorithm '" + s + "'");
}

void RunConfig::validate() const {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and non-negative");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and non-negative");
  if (eval_every == 0) throw ConfigError("eval_every must be at least 1");
  if (max_server_iters == 0) throw ConfigError("max_server_iters must be at least 1");
  if (local_batch_size == 0) throw ConfigError("local_batch_size must be at least 1");
  if (worker_minibatch == 0) throw ConfigError("worker_minibatch must be at least 1");
  if (algorithm == Algorithm::minibatch && effective_batch_size() != workers)
    throw ConfigError("mini-batch SGD uses one gradient per worker: batch_size must equal workers");
  if (algorithm == Algorithm::hogwild && delay_model == DelayModel::round_robin && tau_max != 0 &&
      tau_max != workers)
    throw ConfigError("round-robin delays imply tau_max = workers");
  if (compression == Compression::stochastic_quantize && (quantize_bits == 0 || quantize_bits > 30))
    throw ConfigError("quantize_bits must be in [1, 30]");
  if (algorithm == Algorithm::dadm && !(lambda > 0.0)) throw ConfigError("DADM needs lambda > 0");
  if (epsilon_target && !std::isfinite(*epsilon_target)) throw ConfigError("epsilon_target must be finite");
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError("bad number '" + s + "' in trace");
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace)
    out << r.server_iter << ',' << r.worker_iters << ',' << format_double(r.pca_time) << ','
        << format_double(r.train_logloss) << ',' << format_double(r.test_logloss) << '\n';
}

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

Trace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw DataError("trace CSV header mismatch");
  Trace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw DataError("trace row needs 5 columns");
    TraceRow r;
    r.server_iter = std::stoull(cells[0]);
    r.worker_iters = std::stoull(cells[1]);
    r.pca_time = parse_double(cells[2]);
    r.train_logloss = parse_double(cells[3]);
    r.test_logloss = parse_double(cells[4]);
    trace.push_back(r);
  }
  return trace;
}

std::size_t DelaySchedule::staleness(std::size_t j) const {
  if (model_ == DelayModel::round_robin) return std::min(j, workers_ - 1);
  Rng rng({seed_, 0xde1a, j});
  return static_cast<std::size_t>(rng.below(std::min(j, tau_max_) + 1));
}

std::vector<double> mixing_matrix(Topology topology, std::size_t m) {
  if (m == 0) throw ConfigError("mixing matrix needs at least one worker");
  std::vector<double> w(m * m, 0.0);
  if (topology == Topology::complete || m <= 3) {
    // A ring of at most three workers is fully connected.
    const double share = (topology == Topology::ring && m == 3) ? 1.0 / 3.0 : 1.0 / static_cast<double>(m);
    std::fill(w.begin(), w.end(), share);
    return w;
  }
  for (std::size_t i = 0; i < m; ++i) {
    w[i * m + i] = 1.0 / 3.0;
    w[i * m + (i + 1) % m] = 1.0 / 3.0;
    w[i * m + (i + m - 1) % m] = 1.0 / 3.0;
  }
  return w;
}

std::vector<double> stochastic_quantize(std::span<const double> z, unsigned bits, Rng& rng) {
  const double levels = static_cast<double>((1u << bits) - 1u);
  double scale = 0.0;
  for (double v : z) scale = std::max(scale, std::abs(v));
  std::vector<double> out(z.size(), 0.0);
  if (scale == 0.0) return out;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double u = std::abs(z[k]) / scale * levels;
    double level = std::floor(u);
    if (rng.uniform01() < u - level) level += 1.0;
    out[k] = std::copysign(scale * level / levels, z[k]);
  }
  return out;
}

RunResult run(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::seq_sgd: return run_seq_sgd(src, eval, cfg);
    case Algorithm::hogwild: return run_hogwild(src, eval, cfg);
    case Algorithm::minibatch: return run_minibatch(src, eval, cfg);
    case Algorithm::dadm: return run_dadm(src, eval, cfg);
    case Algorithm::ecd_psgd: return run_ecd_psgd(src, eval, cfg);
  }
  throw ConfigError("unknown algorithm");
}

namespace detail {

std::vector<Feature> GradientBuffer::extract() const {
  std::vector<Feature> out;
  out.reserve(touched_.size());
  for (auto k : touched_) out.push_back({k, acc_[k]});
  std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.index < b.index; });
  return out;
}

TraceRecorder::TraceRecorder(const EvalSets& eval, const RunConfig& cfg, std::size_t time_divisor)
    : eval_(eval), cfg_(cfg), time_divisor_(time_divisor) {
  if (cfg.epsilon_target) {
    const Dataset* target_set = cfg.target_on_train ? eval.train : eval.test;
    if (target_set == nullptr || target_set->empty())
      throw ConfigError("epsilon_target needs the corresponding evaluation dataset");
  }
}

bool TraceRecorder::record(std::size_t server_iter, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) diverged();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  TraceRow row;
  row.server_iter = server_iter;
  row.worker_iters = (server_iter + time_divisor_ - 1) / time_divisor_;
  row.pca_time = static_cast<double>(server_iter) / static_cast<double>(time_divisor_);
  const bool need_train = eval_.train && !eval_.train->empty() && (cfg_.eval_train || cfg_.target_on_train);
  row.train_logloss = need_train ? dataset_logloss(x, *eval_.train) : nan;
  row.test_logloss = (eval_.test && !eval_.test->empty()) ? dataset_logloss(x, *eval_.test) : nan;
  if (!std::isfinite(row.test_logloss) && eval_.test && !eval_.test->empty()) diverged();
  trace_.push_back(row);
  last_recorded_ = server_iter;

  if (cfg_.epsilon_target && !reached_at_) {
    const double watched = cfg_.target_on_train ? row.train_logloss : row.test_logloss;
    if (watched <= *cfg_.epsilon_target) reached_at_ = server_iter;
  }
  return reached_at_.has_value();
}

}  // namespace detail
}  // namespace scalesgd
