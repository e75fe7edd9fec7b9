// Distributed dual coordinate ascent for L2-regularized logistic regression.
// Workers own disjoint shards of the training set, solve their local dual
// subproblem against the broadcast v, and the server averages the local
// v-increments (1/m each), which keeps v = (1/(lambda n)) sum alpha_i y_i xi_i.

#include <algorithm>
#include <cmath>

#include "trainer_common.hpp"

namespace scalesgd {

using detail::GradientBuffer;
using detail::TraceRecorder;

namespace {

double logit(double a) { return std::log(a) - std::log1p(-a); }

/// Maximiser over a in [lo, hi] of the concave 1-D function whose derivative is
/// -logit(a) - margin - (a - a0) * curvature.
double solve_coordinate(double a0, double margin, double curvature) {
  double lo = kAlphaEpsilon;
  double hi = 1.0 - kAlphaEpsilon;
  auto deriv = [&](double a) { return -logit(a) - margin - (a - a0) * curvature; };
  if (deriv(lo) <= 0.0) return lo;
  if (deriv(hi) >= 0.0) return hi;

  double a = std::clamp(a0, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double g = deriv(a);
    if (g == 0.0) return a;
    if (g > 0.0) lo = a; else hi = a;
    const double h = -1.0 / (a * (1.0 - a)) - curvature;
    double next = a - g / h;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - a) <= 1e-15 * std::max(1.0, std::abs(a)) || hi - lo <= 1e-16) return next;
    a = next;
  }
  return a;
}

}  // namespace

LocalDualSolution dadm_local_solve(const LocalDualProblem& p, std::size_t passes) {
  const std::size_t q = p.samples.size();
  if (q == 0) throw ConfigError("local dual problem needs at least one sample");
  if (p.alpha.size() != q) throw ConfigError("alpha and samples differ in length");
  if (!(p.lambda > 0.0 && p.n_local > 0.0)) throw ConfigError("local dual problem needs lambda, n_local > 0");

  const double scale = 1.0 / (p.lambda * p.n_local);
  LocalDualSolution sol;
  sol.delta_alpha.assign(q, 0.0);
  GradientBuffer dv(static_cast<std::uint32_t>(p.v.size()));

  for (std::size_t pass = 0; pass < passes; ++pass) {
    for (std::size_t i = 0; i < q; ++i) {
      const Sample& s = *p.samples[i];
      double margin = 0.0;
      for (const auto& f : s.features()) margin += f.value * (p.v[f.index] + dv[f.index]);
      margin *= s.label();
      const double a0 = std::clamp(p.alpha[i] + sol.delta_alpha[i], kAlphaEpsilon, 1.0 - kAlphaEpsilon);
      const double a = solve_coordinate(a0, margin, s.squared_norm() * scale);
      const double step = a - a0;
      if (step == 0.0) continue;
      sol.delta_alpha[i] = a - p.alpha[i];
      dv.add(s, step * s.label() * scale);
    }
  }
  sol.delta_v = dv.extract();
  return sol;
}

double local_dual_objective(const LocalDualProblem& p, std::span<const double> delta_alpha) {
  const double scale = 1.0 / (p.lambda * p.n_local);
  std::vector<double> u(p.v.begin(), p.v.end());
  double value = 0.0;
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    value -= logistic_conjugate(p.alpha[i] + delta_alpha[i]);
    const Sample& s = *p.samples[i];
    for (const auto& f : s.features()) u[f.index] += scale * delta_alpha[i] * s.label() * f.value;
  }
  double norm = 0.0;
  for (double x : u) norm += x * x;
  return value - 0.5 * p.lambda * p.n_local * norm;
}

RunResult run_dadm(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  cfg.validate();
  if (!src.is_finite()) throw ConfigError("DADM needs a finite sample source; materialise the stream first");
  const Dataset& ds = *src.dataset();
  const std::size_t n = ds.size();
  const std::size_t m = cfg.workers;
  const std::size_t lb = cfg.local_batch_size;

  // Worker w owns the positions drawn at t = w, w + m, w + 2m, ... of one pass.
  std::vector<std::vector<std::size_t>> shards(m);
  for (std::size_t t = 0; t < n; ++t) shards[t % m].push_back(src.position(t));

  DualState dual(ds, cfg.lambda);
  const double n_local = static_cast<double>(n) / static_cast<double>(m);
  GradientBuffer aggregate(ds.dim());
  TraceRecorder rec(eval, cfg, 1);

  RunResult out;
  auto certify = [&] {
    if (!cfg.record_duality_gap) return;
    out.stats.duality_gaps.push_back(duality_gap(dual, ds));
    out.stats.dual_objectives.push_back(dual_objective(dual, ds));
  };
  certify();
  bool done = rec.record(0, dual.v());

  struct WorkerResult {
    std::vector<std::size_t> positions;
    LocalDualSolution solution;
  };
  std::vector<WorkerResult> results(m);

  std::size_t round = 0;
  while (!done && round < cfg.max_server_iters) {
    for (std::size_t w = 0; w < m; ++w) {
      auto& res = results[w];
      res.positions.clear();
      res.solution = {};
      const auto& shard = shards[w];
      if (shard.empty()) continue;
      for (std::size_t q = 0; q < lb; ++q) {
        const auto pos = shard[(round * lb + q) % shard.size()];
        if (std::find(res.positions.begin(), res.positions.end(), pos) == res.positions.end())
          res.positions.push_back(pos);
      }
      LocalDualProblem problem;
      problem.v = dual.v();
      problem.lambda = cfg.lambda;
      problem.n_local = n_local;
      for (auto pos : res.positions) {
        problem.samples.push_back(&ds[pos]);
        problem.alpha.push_back(dual.alpha()[pos]);
      }
      res.solution = dadm_local_solve(problem, cfg.dadm_passes);
    }

    aggregate.clear();
    for (const auto& res : results)
      for (const auto& e : res.solution.delta_v) aggregate.add_entry(e.index, e.value);
    aggregate.scale(1.0 / static_cast<double>(m));
    for (auto k : aggregate.touched()) dual.add_to_v(k, aggregate[k]);
    for (const auto& res : results)
      for (std::size_t i = 0; i < res.positions.size(); ++i)
        dual.set_alpha(res.positions[i], dual.alpha()[res.positions[i]] + res.solution.delta_alpha[i]);

    ++round;
    certify();
    if (rec.due(round)) done = rec.record(round, dual.v());
  }

  out.stats.server_iters = round;
  out.stats.reached_at = rec.reached_at();
  out.stats.final_model.assign(dual.v().begin(), dual.v().end());
  out.trace = std::move(rec.trace());
  return out;
}

}  // namespace scalesgd
