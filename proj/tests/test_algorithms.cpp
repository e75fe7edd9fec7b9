#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "scalesgd/algorithms.hpp"
#include "scalesgd/errors.hpp"
#include "scalesgd/generators.hpp"
#include "test_support.hpp"

using namespace scalesgd;
using namespace scalesgd::testing;

namespace {

struct Fixture {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
  SampleSource source;
  EvalSets eval() const { return {train.get(), test.get()}; }
};

Fixture dense_fixture(std::size_t n = 400, std::uint64_t seed = 5) {
  auto train = std::make_shared<const Dataset>(gen_uniform_dataset(12, n, {-1, 1}, 1.0, seed));
  auto test = std::make_shared<const Dataset>(gen_uniform_dataset(12, n / 4, {-1, 1}, 1.0, seed + 100));
  return {train, test, SampleSource::finite(train, OrderPolicy::shuffled, seed)};
}

Fixture sparse_fixture() {
  auto train = std::make_shared<const Dataset>(gen_uniform_dataset(40, 300, {-1, 1}, 0.2, 21));
  auto test = std::make_shared<const Dataset>(gen_uniform_dataset(40, 80, {-1, 1}, 0.2, 22));
  return {train, test, SampleSource::finite(train)};
}

RunConfig base_config(Algorithm a, std::size_t m = 1) {
  RunConfig rc;
  rc.algorithm = a;
  rc.workers = m;
  rc.max_server_iters = 300;
  rc.eval_every = 10;
  rc.seed = 3;
  return rc;
}

std::string csv(const RunResult& r) { return trace_to_csv(r.trace); }

}  // namespace

TEST_CASE("reductions to sequential SGD are byte-identical") {
  for (const auto& fx : {dense_fixture(), sparse_fixture()}) {
    const auto seq = csv(run(fx.source, fx.eval(), base_config(Algorithm::seq_sgd)));
    CHECK(csv(run(fx.source, fx.eval(), base_config(Algorithm::minibatch, 1))) == seq);
    CHECK(csv(run(fx.source, fx.eval(), base_config(Algorithm::hogwild, 1))) == seq);
    CHECK(csv(run(fx.source, fx.eval(), base_config(Algorithm::ecd_psgd, 1))) == seq);
    auto ring = base_config(Algorithm::ecd_psgd, 1);
    ring.topology = Topology::complete;
    CHECK(csv(run(fx.source, fx.eval(), ring)) == seq);
  }
}

TEST_CASE("every trainer is deterministic") {
  const auto fx = dense_fixture();
  for (auto a : {Algorithm::seq_sgd, Algorithm::minibatch, Algorithm::hogwild, Algorithm::ecd_psgd, Algorithm::dadm}) {
    auto rc = base_config(a, 4);
    if (a == Algorithm::seq_sgd) rc.workers = 1;
    if (a == Algorithm::ecd_psgd) rc.compression = Compression::stochastic_quantize;
    if (a == Algorithm::hogwild) rc.delay_model = DelayModel::uniform;
    CHECK(csv(run(fx.source, fx.eval(), rc)) == csv(run(fx.source, fx.eval(), rc)));
  }
}

TEST_CASE("trace layout follows the PCA time mapping") {
  const auto fx = dense_fixture();
  auto rc = base_config(Algorithm::hogwild, 4);
  rc.max_server_iters = 95;
  const auto r = run(fx.source, fx.eval(), rc);
  REQUIRE(r.trace.size() == 11);  // 0, 10, ..., 90 and the final 95
  CHECK(r.trace.back().server_iter == 95);
  CHECK(r.trace.back().worker_iters == 24);
  CHECK(r.trace.back().pca_time == 95.0 / 4.0);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].server_iter > r.trace[i - 1].server_iter);

  rc.algorithm = Algorithm::minibatch;
  const auto s = run(fx.source, fx.eval(), rc);
  CHECK(s.trace.back().pca_time == 95.0);
  CHECK(s.trace.back().worker_iters == 95);

  const auto text = trace_to_csv(s.trace);
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  std::istringstream in(text);
  CHECK(read_trace_csv(in) == s.trace);
}

TEST_CASE("gamma = 0 leaves the model and the trace flat") {
  const auto fx = dense_fixture();
  auto rc = base_config(Algorithm::seq_sgd);
  rc.gamma = 0.0;
  const auto r = run(fx.source, fx.eval(), rc);
  for (const auto& row : r.trace) {
    CHECK(row.test_logloss == r.trace.front().test_logloss);
    CHECK(row.train_logloss == r.trace.front().train_logloss);
  }

  // One-sample dataset, gamma = 0: every worker count gives the same losses.
  auto single = std::make_shared<const Dataset>(gen_uniform_dataset(12, 1, {-1, 1}, 1.0, 9));
  const EvalSets eval{single.get(), single.get()};
  const auto src = SampleSource::finite(single);
  auto h1 = base_config(Algorithm::hogwild, 1);
  h1.gamma = 0.0;
  const auto ref = run(src, eval, h1).trace;
  for (std::size_t m : {2, 4, 8}) {
    auto hm = h1;
    hm.workers = m;
    const auto t = run(src, eval, hm).trace;
    REQUIRE(t.size() == ref.size());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i].test_logloss == ref[i].test_logloss);
  }
}

TEST_CASE("small steps on one sample never increase the loss") {
  auto single = std::make_shared<const Dataset>(gen_uniform_dataset(12, 1, {-1, 1}, 1.0, 4));
  const EvalSets eval{single.get(), single.get()};
  auto rc = base_config(Algorithm::seq_sgd);
  rc.lambda = 0.0;
  rc.gamma = 0.01;
  rc.eval_every = 1;
  rc.max_server_iters = 200;
  const auto t = run(SampleSource::finite(single), eval, rc).trace;
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i].train_logloss <= t[i - 1].train_logloss);
}

TEST_CASE("a batch of one repeated sample steps like batch size one") {
  auto single = std::make_shared<const Dataset>(gen_uniform_dataset(12, 1, {-1, 1}, 1.0, 4));
  const EvalSets eval{single.get(), single.get()};
  const auto src = SampleSource::finite(single);
  const auto one = run(src, eval, base_config(Algorithm::seq_sgd)).stats.final_model;
  const auto four = run(src, eval, base_config(Algorithm::minibatch, 4)).stats.final_model;
  REQUIRE(one.size() == four.size());
  for (std::size_t k = 0; k < one.size(); ++k) CHECK(four[k] == doctest::Approx(one[k]).epsilon(1e-12));
}

TEST_CASE("round-robin Hogwild! staleness peaks at m - 1") {
  const auto fx = sparse_fixture();
  for (std::size_t m : {2, 4, 8}) {
    DelaySchedule schedule(DelayModel::round_robin, m, m, 1);
    std::size_t worst = 0;
    for (std::size_t j = 0; j < 10000; ++j) {
      CHECK(schedule.staleness(j) <= std::min(j, m - 1));
      worst = std::max(worst, schedule.staleness(j));
    }
    CHECK(worst == m - 1);

    auto rc = base_config(Algorithm::hogwild, m);
    rc.max_server_iters = 10000;
    rc.eval_every = 1000;
    rc.eval_train = false;
    CHECK(run(fx.source, fx.eval(), rc).stats.max_staleness == m - 1);
  }
}

TEST_CASE("uniform delays stay within tau_max") {
  DelaySchedule schedule(DelayModel::uniform, 4, 6, 11);
  std::size_t worst = 0;
  for (std::size_t j = 0; j < 10000; ++j) {
    CHECK(schedule.staleness(j) <= std::min<std::size_t>(j, 6));
    worst = std::max(worst, schedule.staleness(j));
  }
  CHECK(worst == 6);
  const auto fx = dense_fixture();
  auto rc = base_config(Algorithm::hogwild, 4);
  rc.delay_model = DelayModel::uniform;
  rc.tau_max = 6;
  CHECK(run(fx.source, fx.eval(), rc).stats.max_staleness <= 6);
}

TEST_CASE("run config validation") {
  auto rc = base_config(Algorithm::minibatch, 4);
  rc.batch_size = 3;
  CHECK_THROWS_AS(rc.validate(), ConfigError);
  rc = base_config(Algorithm::hogwild, 4);
  rc.tau_max = 2;
  CHECK_THROWS_AS(rc.validate(), ConfigError);
  rc = base_config(Algorithm::seq_sgd);
  rc.workers = 0;
  CHECK_THROWS_AS(rc.validate(), ConfigError);
  rc = base_config(Algorithm::dadm, 2);
  rc.lambda = 0.0;
  CHECK_THROWS_AS(rc.validate(), ConfigError);
  CHECK_THROWS_AS(parse_algorithm("sgd"), ConfigError);
  CHECK(parse_algorithm("ecd_psgd") == Algorithm::ecd_psgd);
  CHECK(to_string(Algorithm::hogwild) == "hogwild");
}

TEST_CASE("divergence raises a typed error carrying the partial trace") {
  const auto fx = dense_fixture();
  auto rc = base_config(Algorithm::seq_sgd);
  rc.gamma = 1e300;
  rc.eval_every = 1;
  try {
    run(fx.source, fx.eval(), rc);
    FAIL("expected divergence");
  } catch (const RunDiverged& e) {
    CHECK(!e.partial_trace().empty());
    CHECK(e.last_finite_step() == e.partial_trace().back().server_iter);
  }
}

TEST_CASE("mixing matrices are doubly stochastic") {
  auto row_sum = [](const std::vector<double>& w, std::size_t m, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += w[i * m + j];
    return s;
  };
  const auto ring3 = mixing_matrix(Topology::ring, 3);
  for (double v : ring3) CHECK(v == 1.0 / 3.0);
  const auto ring2 = mixing_matrix(Topology::ring, 2);
  for (double v : ring2) CHECK(v == 0.5);
  for (std::size_t m : {4, 5, 8}) {
    const auto w = mixing_matrix(Topology::ring, m);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(row_sum(w, m, i) == 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(w[i * m + j] == w[j * m + i]);
        const std::size_t d = (i + m - j) % m;
        const bool edge = d == 0 || d == 1 || d == m - 1;
        CHECK((w[i * m + j] != 0.0) == edge);
      }
    }
  }
  for (double v : mixing_matrix(Topology::complete, 5)) CHECK(v == 0.2);
  CHECK(mixing_matrix(Topology::ring, 1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(mixing_matrix(Topology::ring, 0), ConfigError);
}

TEST_CASE("stochastic quantization is unbiased") {
  const std::vector<double> z{0.73, -0.2, 0.0, 1.5, -1.1, 0.01};
  const std::size_t trials = 100000;
  std::vector<double> sum(z.size(), 0.0), sum_sq(z.size(), 0.0);
  Rng rng(31);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto c = stochastic_quantize(z, 2, rng);
    for (std::size_t k = 0; k < z.size(); ++k) {
      sum[k] += c[k];
      sum_sq[k] += c[k] * c[k];
    }
  }
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double mean = sum[k] / trials;
    const double var = std::max(sum_sq[k] / trials - mean * mean, 0.0);
    const double sigma = std::sqrt(var / trials);
    CHECK(std::abs(mean - z[k]) <= 3.0 * sigma + 1e-15);
  }
  // Values already on the grid are reproduced exactly.
  const std::vector<double> grid{1.5, -1.5, 0.0, 0.5};
  const auto c = stochastic_quantize(grid, 2, rng);
  CHECK(c == grid);
}

TEST_CASE("ECD-PSGD with complete topology keeps identical workers in consensus") {
  auto single = std::make_shared<const Dataset>(gen_uniform_dataset(12, 1, {-1, 1}, 1.0, 2));
  const EvalSets eval{single.get(), single.get()};
  auto rc = base_config(Algorithm::ecd_psgd, 5);
  rc.topology = Topology::complete;
  const auto r = run(SampleSource::finite(single), eval, rc);
  REQUIRE(r.stats.worker_models.size() == 5);
  const auto& xbar = r.stats.final_model;
  for (const auto& xi : r.stats.worker_models)
    for (std::size_t k = 0; k < xbar.size(); ++k) CHECK(std::abs(xi[k] - xbar[k]) <= 1e-10);
}

TEST_CASE("ECD-PSGD trains on ring topologies with and without compression") {
  const auto fx = dense_fixture();
  for (auto compression : {Compression::identity, Compression::stochastic_quantize}) {
    auto rc = base_config(Algorithm::ecd_psgd, 6);
    rc.compression = compression;
    rc.quantize_bits = 8;
    const auto r = run(fx.source, fx.eval(), rc);
    CHECK(r.trace.back().test_logloss < r.trace.front().test_logloss);
  }
}

TEST_CASE("DADM local solve") {
  const auto ds = dense_dataset({{0.8, -0.4, 1.1}, {0.3, 0.9, -0.2}}, {1, -1});
  const std::vector<double> v{0.2, -0.1, 0.05};

  SUBCASE("zero passes change nothing") {
    LocalDualProblem p{{&ds[0], &ds[1]}, {0.3, 0.6}, v, 0.1, 2.0};
    const auto sol = dadm_local_solve(p, 0);
    CHECK(sol.delta_alpha == std::vector<double>{0.0, 0.0});
    CHECK(sol.delta_v.empty());
  }

  SUBCASE("single coordinate matches a 1e-4 grid search") {
    for (double a0 : {0.05, 0.5, 0.93}) {
      for (double n_local : {1.0, 3.0, 50.0}) {
        LocalDualProblem p{{&ds[0]}, {a0}, v, 0.1, n_local};
        const auto sol = dadm_local_solve(p, 5);
        const double solved = local_dual_objective(p, sol.delta_alpha);
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 1; i < 10000; ++i) {
          const std::vector<double> d{i * 1e-4 - a0};
          best = std::max(best, local_dual_objective(p, d));
        }
        CHECK(solved >= best - 1e-3);
        CHECK(std::abs(solved - best) <= 1e-3);
      }
    }
  }

  SUBCASE("local objective never decreases across passes") {
    Rng rng(4);
    std::vector<Sample> samples;
    for (int i = 0; i < 12; ++i) samples.push_back(random_small_sample(rng, 5));
    std::vector<const Sample*> ptrs;
    std::vector<double> alpha;
    for (const auto& s : samples) {
      ptrs.push_back(&s);
      alpha.push_back(rng.uniform(0.05, 0.95));
    }
    const std::vector<double> v5(5, 0.1);
    LocalDualProblem p{ptrs, alpha, v5, 0.05, 4.0};
    double previous = local_dual_objective(p, std::vector<double>(12, 0.0));
    for (std::size_t passes = 1; passes <= 6; ++passes) {
      const auto sol = dadm_local_solve(p, passes);
      const double value = local_dual_objective(p, sol.delta_alpha);
      CHECK(value >= previous - 1e-12);
      previous = value;
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        CHECK(alpha[i] + sol.delta_alpha[i] >= kAlphaEpsilon);
        CHECK(alpha[i] + sol.delta_alpha[i] <= 1.0 - kAlphaEpsilon);
      }
    }
  }
}

// Exact coordinate ascent only guarantees a monotone dual; the primal at w(alpha),
// and with it the gap, can tick up between rounds while still converging.
TEST_CASE("DADM dual is non-decreasing and the gap non-negative and closing") {
  const auto fx = dense_fixture(200, 8);
  for (std::size_t m : {1, 4}) {
    for (std::size_t lb : {1, 8}) {
      auto rc = base_config(Algorithm::dadm, m);
      rc.local_batch_size = lb;
      rc.record_duality_gap = true;
      rc.max_server_iters = 200;
      const auto r = run(fx.source, fx.eval(), rc);
      const auto& gaps = r.stats.duality_gaps;
      const auto& duals = r.stats.dual_objectives;
      REQUIRE(gaps.size() == 201);
      REQUIRE(duals.size() == 201);
      for (std::size_t i = 0; i < gaps.size(); ++i) {
        CHECK(gaps[i] >= -1e-9);
        if (i > 0) CHECK(duals[i] >= duals[i - 1] - 1e-12);
      }
      CHECK(gaps.back() < 0.25 * gaps.front());
    }
  }
}

TEST_CASE("DADM wastes parallelism when every worker sees the same sample") {
  auto single = std::make_shared<const Dataset>(gen_uniform_dataset(12, 1, {-1, 1}, 1.0, 2));
  auto rows = std::vector<Sample>(8, (*single)[0]);
  auto replicated = std::make_shared<const Dataset>("rep", 12, rows);
  const EvalSets eval{replicated.get(), replicated.get()};
  const auto src = SampleSource::finite(replicated);
  auto rc = base_config(Algorithm::dadm, 1);
  rc.local_batch_size = 1;
  const auto one = run(src, eval, rc).trace;
  rc.workers = 8;
  const auto eight = run(src, eval, rc).trace;
  REQUIRE(one.size() == eight.size());
  // Eight workers move the same coordinate family as one worker: no speed-up.
  CHECK(eight.back().test_logloss >= one.back().test_logloss - 0.05);
}

TEST_CASE("DADM rejects stream sources") {
  StreamSpec spec;
  const auto first = first_sample(spec, nullptr, 1);
  const auto src = SampleSource::stream(spec, first);
  auto rc = base_config(Algorithm::dadm, 2);
  CHECK_THROWS_AS(run(src, {}, rc), ConfigError);
}

TEST_CASE("epsilon target stops the run at the first evaluation meeting it") {
  const auto fx = dense_fixture();
  auto rc = base_config(Algorithm::seq_sgd);
  const auto full = run(fx.source, fx.eval(), rc);
  const double target = full.trace[full.trace.size() / 2].test_logloss;
  rc.epsilon_target = target;
  const auto r = run(fx.source, fx.eval(), rc);
  REQUIRE(r.stats.reached_at);
  CHECK(r.trace.back().server_iter == *r.stats.reached_at);
  CHECK(r.trace.back().test_logloss <= target);

  auto no_test = rc;
  CHECK_THROWS_AS(run(fx.source, EvalSets{fx.train.get(), nullptr}, no_test), ConfigError);
}
