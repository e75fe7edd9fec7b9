#include "scalesgd/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalesgd/errors.hpp"
#include "scalesgd/rng.hpp"

namespace scalesgd {

namespace {

enum : std::uint64_t {
  kTagUniform = 0x11,
  kTagMutateIdx = 0x21,
  kTagMutateVal = 0x22,
  kTagSparsify = 0x23,
  kTagFirst = 0x31,
  kTagCorpus = 0x41,
};

/// k distinct values from [0, n), in selection order (partial Fisher-Yates).
std::vector<std::uint32_t> choose_distinct(std::uint32_t n, std::size_t k, Rng& rng) {
  k = std::min<std::size_t>(k, n);
  if (k * 8 < n) {
    // Sparse selection: rejection against a sorted set is cheaper than an O(n) table.
    std::vector<std::uint32_t> picked;
    std::vector<std::uint32_t> sorted;
    picked.reserve(k);
    while (picked.size() < k) {
      const auto v = static_cast<std::uint32_t>(rng.below(n));
      auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
      if (it != sorted.end() && *it == v) continue;
      sorted.insert(it, v);
      picked.push_back(v);
    }
    return picked;
  }
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  pool.resize(k);
  return pool;
}

std::size_t support_size(std::uint32_t dim, double density) {
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must be in (0, 1]");
  if (density * dim < 1.0) throw ConfigError("density * dim < 1 produces empty samples");
  return static_cast<std::size_t>(std::llround(density * dim));
}

void check_range(ValueRange r) {
  if (!(r.low < r.high)) throw ConfigError("value_range requires low < high");
}

Sample relabel(std::vector<Feature> features, std::uint32_t dim) {
  Sample unlabeled(std::move(features), 1.0, dim);
  return unlabeled.with_label(ruler_label(unlabeled, RulerSpec{dim}));
}

}  // namespace

double ruler_label(const Sample& xi, const RulerSpec& ruler) {
  if (xi.dim() != ruler.dim) throw ConfigError("ruler dim does not match sample dim");
  double dot = 0.0;
  for (const auto& f : xi.features()) dot += f.value * RulerSpec::coefficient(f.index);
  return dot < 0.0 ? -1.0 : 1.0;
}

Dataset gen_uniform_dataset(std::uint32_t dim, std::size_t n, ValueRange range, double density,
                            std::uint64_t seed) {
  if (n == 0) throw ConfigError("dataset size must be at least 1");
  if (dim == 0) throw ConfigError("dim must be positive");
  check_range(range);
  const auto k = support_size(dim, density);

  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng({seed, kTagUniform, i});
    std::vector<Feature> features;
    features.reserve(k);
    if (k == dim) {
      for (std::uint32_t j = 0; j < dim; ++j) features.push_back({j, rng.uniform(range.low, range.high)});
    } else {
      for (auto j : choose_distinct(dim, k, rng)) features.push_back({j, 0.0});
      std::sort(features.begin(), features.end(),
                [](const Feature& a, const Feature& b) { return a.index < b.index; });
      for (auto& f : features) f.value = rng.uniform(range.low, range.high);
    }
    samples.push_back(relabel(std::move(features), dim));
  }
  return Dataset("uniform", dim, std::move(samples));
}

Sample ls_stream_next(const Sample& prev, const StreamSpec& spec, std::uint64_t t,
                      std::size_t target_support) {
  const std::uint32_t dim = spec.dim;
  const auto n_mutate = static_cast<std::size_t>(std::ceil(spec.mutation_fraction * dim));

  Rng idx_rng({spec.seed, kTagMutateIdx, t});
  auto mutated = choose_distinct(dim, n_mutate, idx_rng);
  std::sort(mutated.begin(), mutated.end());

  // Redrawn values are assigned in ascending index order so the result does not
  // depend on the selection order.
  Rng val_rng({spec.seed, kTagMutateVal, t});
  std::vector<Feature> merged;
  merged.reserve(prev.nnz() + mutated.size());
  auto old_it = prev.features().begin();
  const auto old_end = prev.features().end();
  for (auto idx : mutated) {
    while (old_it != old_end && old_it->index < idx) merged.push_back(*old_it++);
    if (old_it != old_end && old_it->index == idx) ++old_it;
    merged.push_back({idx, val_rng.uniform(spec.value_range.low, spec.value_range.high)});
  }
  merged.insert(merged.end(), old_it, old_end);
  std::erase_if(merged, [](const Feature& f) { return f.value == 0.0; });

  if (spec.density < 1.0 && merged.size() > target_support) {
    Rng zero_rng({spec.seed, kTagSparsify, t});
    const auto keep = choose_distinct(static_cast<std::uint32_t>(merged.size()), target_support, zero_rng);
    std::vector<Feature> kept;
    kept.reserve(keep.size());
    for (auto k : keep) kept.push_back(merged[k]);
    merged = std::move(kept);
  }
  return relabel(std::move(merged), dim);
}

Sample first_sample(const StreamSpec& spec, const Dataset* origin, std::uint64_t seed) {
  if (origin != nullptr) {
    if (origin->empty()) throw ConfigError("origin dataset is empty");
    if (origin->dim() != spec.dim) throw ConfigError("origin dataset dim does not match stream dim");
    Rng rng({seed, kTagFirst});
    const auto& picked = (*origin)[rng.below(origin->size())];
    return picked.with_label(ruler_label(picked, RulerSpec{spec.dim}));
  }
  return gen_uniform_dataset(spec.dim, 1, spec.value_range, spec.density, derive_seed({seed, kTagFirst}))[0];
}

Dataset materialize_stream(const StreamSpec& spec, const Sample& first, std::size_t count) {
  std::vector<Sample> out;
  out.reserve(count);
  if (count > 0) out.push_back(first);
  for (std::size_t t = 1; t < count; ++t) out.push_back(ls_stream_next(out.back(), spec, t, first.nnz()));
  return Dataset("stream", spec.dim, std::move(out));
}

Dataset diversity_replicate(const Dataset& ds, std::size_t parts, std::span<const std::size_t> pattern) {
  if (parts == 0) throw ConfigError("parts must be at least 1");
  if (pattern.empty()) throw ConfigError("replication pattern is empty");
  if (ds.size() < parts) throw ConfigError("dataset smaller than the number of parts");
  const std::size_t chunk = ds.size() / parts;

  std::vector<Sample> out;
  for (auto p : pattern) {
    if (p >= parts) throw ConfigError("pattern entry out of range");
    const std::size_t begin = p * chunk;
    const std::size_t end = (p + 1 == parts) ? ds.size() : begin + chunk;
    out.insert(out.end(), ds.samples().begin() + begin, ds.samples().begin() + end);
  }
  return Dataset(ds.name() + ":replicated", ds.dim(), std::move(out));
}

Dataset gen_sparse_corpus(const SparseCorpusSpec& spec) {
  if (spec.n == 0 || spec.dim == 0) throw ConfigError("corpus needs n >= 1 and dim >= 1");
  if (!(spec.mean_nnz >= 1.0)) throw ConfigError("mean_nnz must be at least 1");

  // Vocabulary popularity: feature k has rank k.
  std::vector<double> cdf(spec.dim);
  double total = 0.0;
  for (std::uint32_t k = 0; k < spec.dim; ++k) {
    total += 1.0 / std::pow(static_cast<double>(k) + 10.0, spec.zipf_exponent);
    cdf[k] = total;
  }
  for (auto& c : cdf) c /= total;

  Rng model_rng({spec.seed, kTagCorpus, 0});
  std::vector<double> hidden(spec.dim);
  for (auto& w : hidden) {
    // Box-Muller; only the cosine branch is used to keep the stream simple.
    const double u1 = 1.0 - model_rng.uniform01();
    const double u2 = model_rng.uniform01();
    w = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::vector<Sample> samples;
  samples.reserve(spec.n);
  const double log_mean = std::log(spec.mean_nnz) - 0.18;  // lognormal with sigma 0.6
  for (std::size_t i = 0; i < spec.n; ++i) {
    Rng rng({spec.seed, kTagCorpus, i + 1});
    const double u1 = 1.0 - rng.uniform01();
    const double u2 = rng.uniform01();
    const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    const auto target = static_cast<std::size_t>(
        std::clamp(std::llround(std::exp(log_mean + 0.6 * gauss)), 1LL, static_cast<long long>(spec.dim)));

    std::vector<Feature> features;
    features.reserve(target);
    std::size_t attempts = 0;
    while (features.size() < target && attempts < target * 50) {
      ++attempts;
      const auto k = static_cast<std::uint32_t>(
          std::lower_bound(cdf.begin(), cdf.end(), rng.uniform01()) - cdf.begin());
      const auto idx = std::min(k, spec.dim - 1);
      auto it = std::find_if(features.begin(), features.end(), [&](const Feature& f) { return f.index == idx; });
      const double idf = std::log(1.0 + static_cast<double>(spec.dim) / (idx + 10.0));
      if (it != features.end()) {
        it->value += idf;  // repeated term raises its weight
      } else {
        features.push_back({idx, idf});
      }
    }
    double norm = 0.0;
    for (const auto& f : features) norm += f.value * f.value;
    norm = std::sqrt(norm);
    double score = 0.0;
    for (auto& f : features) {
      f.value /= norm;
      score += f.value * hidden[f.index];
    }
    double label = score < 0.0 ? -1.0 : 1.0;
    if (rng.uniform01() < spec.label_noise) label = -label;
    samples.emplace_back(std::move(features), label, spec.dim);
  }
  return Dataset("sparse-corpus", spec.dim, std::move(samples));
}

}  // namespace scalesgd
