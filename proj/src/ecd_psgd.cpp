// Decentralized SGD with extrapolated, compressed gossip.
//
// Each worker keeps its model x_i and the deviation e_i = y_i - x_i of the
// intermediate variable its neighbours reconstruct. With
//   z_{t+1} = (1 - t/2) x_t + (t/2) x_{t+1},
//   y_{t+1} = (1 - 2/t) y_t + (2/t) C(z_{t+1}),
// the deviation evolves as e_{t+1} = (1 - 2/t) e_t + (2/t) (C(z_{t+1}) - z_{t+1}),
// so y is exactly x whenever C is the identity.

#include "trainer_common.hpp"

namespace scalesgd {

using detail::BufferView;
using detail::GradientBuffer;
using detail::TraceRecorder;

namespace {

struct GossipWorker {
  std::vector<double> x;
  std::vector<double> e;  // y - x
  std::vector<double> next_x;
  GradientBuffer grad;

  explicit GossipWorker(std::uint32_t dim) : x(dim, 0.0), e(dim, 0.0), next_x(dim, 0.0), grad(dim) {}
};

void average_models(const std::vector<GossipWorker>& workers, std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& w : workers)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w.x[k];
  const double inv_m = 1.0 / static_cast<double>(workers.size());
  for (auto& v : out) v *= inv_m;
}

}  // namespace

RunResult run_ecd_psgd(const SampleSource& src, const EvalSets& eval, const RunConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.workers;
  const std::uint32_t dim = src.dim();
  const auto weights = mixing_matrix(cfg.topology, m);

  // Sparse rows of W: neighbours j with W_ij != 0.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (weights[i * m + j] != 0.0) rows[i].emplace_back(j, weights[i * m + j]);

  std::vector<GossipWorker> workers;
  workers.reserve(m);
  for (std::size_t i = 0; i < m; ++i) workers.emplace_back(dim);
  std::vector<std::vector<double>> y(m, std::vector<double>(dim, 0.0));
  std::vector<double> mixed(dim), x_bar(dim), z(dim);

  TraceRecorder rec(eval, cfg, 1);
  average_models(workers, x_bar);
  bool done = rec.record(0, x_bar);

  std::size_t round = 0;
  while (!done && round < cfg.max_server_iters) {
    const double t = static_cast<double>(round + 1);

    for (std::size_t i = 0; i < m; ++i) {
      auto& w = workers[i];
      w.grad.clear();
      if (!detail::accumulate_gradient(w.grad, w.x, src.draw(round * m + i))) rec.diverged();
      w.grad.scale(1.0);
      for (std::size_t k = 0; k < dim; ++k) y[i][k] = w.x[k] + w.e[k];
    }

    for (std::size_t i = 0; i < m; ++i) {
      auto& w = workers[i];
      std::fill(mixed.begin(), mixed.end(), 0.0);
      for (const auto& [j, wij] : rows[i])
        for (std::size_t k = 0; k < dim; ++k) mixed[k] += wij * y[j][k];
      detail::apply_update<BufferView>(w.next_x, mixed, w.x, cfg.gamma, cfg.lambda, BufferView{w.grad});
    }

    const double keep = 1.0 - 2.0 / t;
    const double push = 2.0 / t;
    for (std::size_t i = 0; i < m; ++i) {
      auto& w = workers[i];
      if (cfg.compression == Compression::identity) {
        for (std::size_t k = 0; k < dim; ++k) w.e[k] = keep * w.e[k];
      } else {
        for (std::size_t k = 0; k < dim; ++k) z[k] = (1.0 - t / 2.0) * w.x[k] + (t / 2.0) * w.next_x[k];
        Rng rng({cfg.seed, 0xc0de, round, i});
        const auto compressed = stochastic_quantize(z, cfg.quantize_bits, rng);
        for (std::size_t k = 0; k < dim; ++k) w.e[k] = keep * w.e[k] + push * (compressed[k] - z[k]);
      }
      std::swap(w.x, w.next_x);
    }

    ++round;
    if (rec.due(round)) {
      average_models(workers, x_bar);
      done = rec.record(round, x_bar);
    }
  }

  RunResult out;
  out.stats.server_iters = round;
  out.stats.reached_at = rec.reached_at();
  average_models(workers, x_bar);
  for (auto& w : workers) out.stats.worker_models.push_back(std::move(w.x));
  out.stats.final_model = std::move(x_bar);
  out.trace = std::move(rec.trace());
  return out;
}

}  // namespace scalesgd
