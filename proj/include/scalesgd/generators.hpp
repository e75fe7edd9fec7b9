#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scalesgd/data.hpp"

namespace scalesgd {

struct ValueRange {
  double low = -4.0;
  double high = 3.0;
};

/// Mutation-stream parameters: sample t is derived from sample t-1 by redrawing
/// ceil(mutation_fraction * dim) coordinates.
struct StreamSpec {
  std::uint32_t dim = 28;
  ValueRange value_range{};
  double density = 1.0;
  double mutation_fraction = 0.1;
  std::uint64_t seed = 1;
};

/// The alternating ruler (-1, 2, -3, 4, ...) used to label synthetic samples.
struct RulerSpec {
  std::uint32_t dim = 28;

  static double coefficient(std::uint32_t k) {
    const double magnitude = static_cast<double>(k) + 1.0;
    return (k % 2 == 0) ? -magnitude : magnitude;
  }
};

/// sign(xi . ruler), with sign(0) taken as +1. Throws ConfigError on dim mismatch.
double ruler_label(const Sample& xi, const RulerSpec& ruler);

/// Each sample gets round(density * dim) support indices chosen uniformly
/// without replacement, values i.i.d. uniform over the range, ruler labels.
Dataset gen_uniform_dataset(std::uint32_t dim, std::size_t n, ValueRange range, double density,
                            std::uint64_t seed);

/// Next element of a mutation stream. Indices to redraw are keyed by
/// (spec.seed, t). When spec.density < 1 the result is re-sparsified to exactly
/// `target_support` non-zeros by zeroing uniformly among its support.
Sample ls_stream_next(const Sample& prev, const StreamSpec& spec, std::uint64_t t,
                      std::size_t target_support);

/// Seeded uniform pick from `origin` (relabelled by the ruler), or a fresh
/// uniform sample from the spec when no origin is given.
Sample first_sample(const StreamSpec& spec, const Dataset* origin, std::uint64_t seed);

/// Materialises draws [0, count) of the stream starting at `first`.
Dataset materialize_stream(const StreamSpec& spec, const Sample& first, std::size_t count);

/// Cuts `ds` into `parts` contiguous chunks (remainder joins the last chunk) and
/// concatenates the chunks named by `pattern`.
Dataset diversity_replicate(const Dataset& ds, std::size_t parts,
                            std::span<const std::size_t> pattern);

/// Parameters for a sparse text-like corpus standing in for real-sim when the
/// original file is not available: Zipf-distributed vocabulary, tf-idf style
/// positive values, unit-norm rows, labels from a hidden linear model with a
/// small fraction flipped.
struct SparseCorpusSpec {
  std::size_t n = 72309;
  std::uint32_t dim = 20958;
  double mean_nnz = 51.0;
  double zipf_exponent = 1.0;
  double label_noise = 0.02;
  std::uint64_t seed = 7;
};

Dataset gen_sparse_corpus(const SparseCorpusSpec& spec);

}  // namespace scalesgd
