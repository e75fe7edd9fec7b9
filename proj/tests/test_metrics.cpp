#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalesgd/errors.hpp"
#include "scalesgd/generators.hpp"
#include "scalesgd/metrics.hpp"
#include "test_support.hpp"

using namespace scalesgd;
using namespace scalesgd::testing;

namespace {

std::vector<Sample> as_samples(const std::vector<std::vector<double>>& rows) {
  std::vector<Sample> out;
  for (const auto& r : rows) out.push_back(dense_sample(r));
  return out;
}

// Literal Eq. (3) by a dense double loop. The sum of l0 counts is an integer, so
// the exact value of the formula is total / (n * range); dividing once gives its
// correctly rounded double, which is what "exact" means for this comparison.
double naive_csim(const std::vector<Sample>& seq, std::size_t range) {
  const std::size_t n = seq.size();
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= range; ++j) {
      const auto& a = seq[i];
      const auto& b = seq[(i + j) % n];
      for (std::uint32_t k = 0; k < a.dim(); ++k)
        if (a.value_at(k) != b.value_at(k)) ++total;
    }
  }
  return static_cast<double>(total) / static_cast<double>(n * range);
}

}  // namespace

TEST_CASE("c_sim on the two orderings of the 3-bit example") {
  const auto seq1 = as_samples({{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}});
  const auto seq2 = as_samples({{0, 0, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {0, 1, 1}});
  CHECK(c_sim(seq1, 2) == 1.5);
  // Pairwise l0 sums per start index: 3, 4, 4, 5, 2, 4 -> 22 / (6 * 2).
  CHECK(c_sim(seq2, 2) == 11.0 / 6.0);
  CHECK(naive_csim(seq2, 2) == 11.0 / 6.0);
  CHECK(ls_async(seq1, 2) == 1.5);
}

TEST_CASE("c_sim of identical samples is zero for every range") {
  const auto seq = as_samples({{1, 2, 0}, {1, 2, 0}, {1, 2, 0}, {1, 2, 0}});
  for (std::size_t r = 1; r <= 9; ++r) CHECK(c_sim(seq, r) == 0.0);
  CHECK(ls_async(as_samples({{3, 3}}), 4) == 0.0);
}

TEST_CASE("c_sim errors") {
  std::vector<Sample> empty;
  CHECK_THROWS_AS(c_sim(empty, 1), ConfigError);
  CHECK_THROWS_AS(c_sim(as_samples({{1}}), 0), ConfigError);
}

TEST_CASE("c_sim matches the naive double loop exactly on random sequences") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.below(20);
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(10));
    const auto range = 1 + rng.below(n);
    std::vector<Sample> seq;
    for (std::size_t i = 0; i < n; ++i) seq.push_back(random_small_sample(rng, dim, 1));
    CHECK(c_sim(seq, range) == naive_csim(seq, range));
  }
}

TEST_CASE("c_sim is invariant under a fixed relabelling of feature indices") {
  Rng rng(3);
  std::vector<Sample> seq;
  for (int i = 0; i < 12; ++i) seq.push_back(random_small_sample(rng, 6));
  const std::vector<std::uint32_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<Sample> relabelled;
  for (const auto& s : seq) {
    std::vector<Feature> f;
    for (const auto& e : s.features()) f.push_back({perm[e.index], e.value});
    relabelled.emplace_back(f, s.label(), 6);
  }
  for (std::size_t r = 1; r < 12; ++r) CHECK(c_sim(seq, r) == c_sim(relabelled, r));
}

TEST_CASE("l0 distance is sparse-aware and honours a tolerance") {
  const auto a = dense_sample({1, 0, 2, 0});
  const auto b = dense_sample({1, 3, 0, 0});
  CHECK(l0_distance(a, b) == 2);
  CHECK(l0_distance(a, a) == 0);
  const auto c = dense_sample({1.0 + 1e-12, 0, 2, 0});
  CHECK(l0_distance(a, c) == 1);
  CHECK(l0_distance(a, c, 1e-9) == 0);
}

TEST_CASE("within_batch_csim closed form") {
  CHECK(within_batch_csim(as_samples({{1, 0}, {0, 1}})) == 1.0);
  CHECK(within_batch_csim(as_samples({{1, 5}, {1, 5}, {1, 5}})) == 0.0);
  CHECK(within_batch_csim(as_samples({{4, 2}})) == 0.0);
  std::vector<Sample> empty;
  CHECK_THROWS_AS(within_batch_csim(empty), ConfigError);
}

TEST_CASE("within_batch_csim is invariant under permutations of the batch") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = 1 + rng.below(12);
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(8));
    std::vector<Sample> batch;
    for (std::size_t i = 0; i < b; ++i) batch.push_back(random_small_sample(rng, dim));
    const double reference = within_batch_csim(batch);
    CHECK(reference == c_sim(batch, b));  // range = length visits every element once
    for (int p = 0; p < 20; ++p) {
      for (std::size_t i = b; i > 1; --i) std::swap(batch[i - 1], batch[rng.below(i)]);
      CHECK(within_batch_csim(batch) == reference);
    }
  }
}

TEST_CASE("ls_sync is the maximum over batches") {
  const std::vector<std::vector<Sample>> batches{as_samples({{1, 0}, {0, 1}}), as_samples({{1, 0}, {1, 0}})};
  CHECK(ls_sync(batches) == 1.0);
  const std::vector<std::vector<Sample>> same{as_samples({{2, 2}, {2, 2}}), as_samples({{3, 3}})};
  CHECK(ls_sync(same) == 0.0);
  const std::vector<std::vector<Sample>> one{as_samples({{1, 0}, {0, 1}, {1, 1}})};
  CHECK(ls_sync(one) == within_batch_csim(one[0]));
  const std::vector<std::vector<Sample>> none;
  CHECK_THROWS_AS(ls_sync(none), ConfigError);

  const auto seq = as_samples({{1, 0}, {0, 1}, {1, 0}, {1, 0}, {5, 5}});
  CHECK(ls_sync_consecutive(seq, 2) == 1.0);
}

TEST_CASE("feature_stats uses the population variance") {
  const auto stats = feature_stats(dense_dataset({{1, 0}, {2, 0}, {3, 0}}));
  CHECK(stats.means[0] == 2.0);
  CHECK(stats.variances[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(stats.means[1] == 0.0);
  CHECK(stats.variances[1] == 0.0);

  const auto wide = feature_stats(dense_dataset({{100}, {-100}}));
  std::vector<std::vector<double>> narrow_rows;
  for (int i = 1; i <= 100; ++i) narrow_rows.push_back({0.01 * i});
  const auto narrow = feature_stats(dense_dataset(narrow_rows));
  CHECK(wide.variances[0] == 10000.0);
  CHECK(wide.variances[0] > narrow.variances[0]);
}

TEST_CASE("feature_stats matches a dense brute force recomputation") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = 1 + rng.below(40);
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(7));
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) samples.push_back(random_small_sample(rng, dim, 5));
    const Dataset ds("r", dim, samples);
    const auto stats = feature_stats(ds);
    for (std::uint32_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (const auto& s : samples) mean += s.value_at(k);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& s : samples) var += (s.value_at(k) - mean) * (s.value_at(k) - mean);
      var /= static_cast<double>(n);
      CHECK(stats.means[k] == doctest::Approx(mean).epsilon(1e-12));
      CHECK(stats.variances[k] == doctest::Approx(var).epsilon(1e-12));
      CHECK(stats.variances[k] >= 0.0);
    }
  }
}

TEST_CASE("density and sparsity") {
  CHECK(density(dense_dataset({{1, 2}, {3, 4}})) == 1.0);
  const Dataset empty_rows("e", 4, {Sample({}, 1.0, 4), Sample({}, -1.0, 4)});
  CHECK(density(empty_rows) == 0.0);
  const auto report = character_report(dense_dataset({{1, 0}, {0, 0}}), std::nullopt, std::nullopt);
  CHECK(report.density == 0.25);
  CHECK(report.sparsity == 0.75);
}

TEST_CASE("sparser generated data has smaller mean feature variance") {
  double previous = std::numeric_limits<double>::infinity();
  for (double d : {1.0, 0.5, 0.1, 0.02}) {
    const auto ds = gen_uniform_dataset(100, 2000, {-4, 3}, d, 5);
    const auto r = character_report(ds, std::nullopt, std::nullopt);
    CHECK(r.mean_feature_variance < previous);
    previous = r.mean_feature_variance;
  }
}

TEST_CASE("diversity counts distinct samples exactly") {
  const auto one = dense_dataset({{1, 2}, {1, 2}, {1, 2}});
  CHECK(diversity(one) == 1);

  std::vector<std::vector<double>> basis;
  for (int d = 0; d < 6; ++d) {
    std::vector<double> e(6, 0.0);
    e[d] = 1.0;
    basis.push_back(e);
  }
  const auto units = dense_dataset(basis);
  CHECK(diversity(units) == 6);
  CHECK(diversity(concat(units, units, "uu")) == 6);

  // Label is part of the identity of a sample.
  CHECK(diversity(dense_dataset({{1, 2}, {1, 2}}, {1.0, -1.0})) == 2);
}

TEST_CASE("character report JSON has exactly the documented keys") {
  const auto ds = dense_dataset({{1, 0}, {0, 1}, {1, 0}});
  const auto brief = to_json(character_report(ds, std::nullopt, std::nullopt));
  std::vector<std::string> keys;
  for (const auto& [k, _] : brief.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"density", "dim", "diversity", "ls_async", "ls_sync", "mean_feature_variance",
                                         "n", "sparsity"});
  CHECK(brief["ls_async"].is_null());
  CHECK(brief["ls_sync"].is_null());

  const auto full = to_json(character_report(ds, 2, 2), true);
  CHECK(full["ls_async"].get<double>() == c_sim(ds.samples(), 2));
  CHECK(full["ls_sync"].get<double>() == ls_sync_consecutive(ds.samples(), 2));
  CHECK(full["feature_means"].size() == 2);
  CHECK(full["feature_variances"].size() == 2);
}

TEST_CASE("character report invariants") {
  const auto ds = gen_uniform_dataset(10, 300, {-4, 3}, 0.4, 2);
  const auto r = character_report(ds, 4, 8);
  CHECK(r.sparsity == doctest::Approx(1.0 - r.density));
  CHECK(r.diversity <= r.n);
  for (double v : r.feature_variances) CHECK(v >= 0.0);
}
