// Primal SGD trainers: sequential baseline, synchronous mini-batch, and the
// Hogwild! parameter-server simulation with an explicit staleness schedule.

#include <map>

#include "trainer_common.hpp"

namespace scalesgd {

using detail::BufferView;
using detail::EntriesView;
using detail::GradientBuffer;
using detail::TraceRecorder;

namespace {

/// Shared body of the sequential and mini-batch trainers: every server step
/// averages `batch` gradients taken at the same model, then descends.
RunResult run_synchronous(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg,
                          std::size_t batch) {
  cfg.validate();
  std::vector<double> x(src.dim(), 0.0);
  GradientBuffer buf(src.dim());
  TraceRecorder rec(eval, cfg, 1);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  std::size_t step = 0;
  bool done = rec.record(0, x);
  while (!done && step < cfg.max_server_iters) {
    buf.clear();
    for (std::size_t w = 0; w < batch; ++w)
      if (!detail::accumulate_gradient(buf, x, src.draw(step * batch + w))) rec.diverged();
    buf.scale(inv_batch);
    detail::apply_update<BufferView>(x, x, x, cfg.gamma, cfg.lambda, BufferView{buf});
    ++step;
    if (rec.due(step)) done = rec.record(step, x);
  }

  RunResult out;
  out.stats.server_iters = step;
  out.stats.reached_at = rec.reached_at();
  out.stats.final_model = std::move(x);
  out.trace = std::move(rec.trace());
  return out;
}

struct PendingGradient {
  std::vector<Feature> grad;
  std::size_t read_step = 0;
  std::size_t worker_id = 0;
};

}  // namespace

RunResult run_seq_sgd(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  return run_synchronous(src, eval, cfg, 1);
}

RunResult run_minibatch(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  cfg.validate();
  return run_synchronous(src, eval, cfg, cfg.effective_batch_size());
}

RunResult run_hogwild(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.workers;
  const std::size_t k = cfg.worker_minibatch;
  const DelaySchedule schedule(cfg.delay_model, m, cfg.effective_tau_max(), cfg.seed);
  const double inv_k = 1.0 / static_cast<double>(k);

  std::vector<double> x(src.dim(), 0.0);
  GradientBuffer buf(src.dim());
  TraceRecorder rec(eval, cfg, m);
  std::map<std::size_t, PendingGradient> pending;
  std::size_t max_tau = 0;

  // Server step j turns x_j into x_{j+1} using the gradient submitted for slot j,
  // which a worker computed when the server was at step read_step(j).
  std::size_t j = 0;
  bool done = rec.record(0, x);
  while (!done && j < cfg.max_server_iters) {
    const std::size_t horizon = std::min(j + schedule.bound(), cfg.max_server_iters - 1);
    for (std::size_t slot = j; slot <= horizon; ++slot) {
      if (pending.contains(slot) || schedule.read_step(slot) != j) continue;
      buf.clear();
      for (std::size_t i = 0; i < k; ++i)
        if (!detail::accumulate_gradient(buf, x, src.draw(slot * k + i))) rec.diverged();
      buf.scale(inv_k);
      pending.emplace(slot, PendingGradient{buf.extract(), j, slot % m});
    }

    auto it = pending.find(j);
    const PendingGradient& g = it->second;
    max_tau = std::max(max_tau, j - g.read_step);
    detail::apply_update<EntriesView>(x, x, x, cfg.gamma, cfg.lambda, EntriesView{g.grad});
    pending.erase(it);
    ++j;
    if (rec.due(j)) done = rec.record(j, x);
  }

  RunResult out;
  out.stats.server_iters = j;
  out.stats.max_staleness = max_tau;
  out.stats.reached_at = rec.reached_at();
  out.stats.final_model = std::move(x);
  out.trace = std::move(rec.trace());
  return out;
}

}  // namespace scalesgd
