#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "scalesgd/data.hpp"

#include <json.hpp>

namespace scalesgd {

/// Number of coordinates where two samples differ by more than `tolerance`
/// (union of supports; an absent entry is zero).
std::size_t l0_distance(const Sample& a, const Sample& b, double tolerance = 0.0);

/// Mean over i of the average l0 distance from sample i to the next `range`
/// samples of the cyclic sequence. Throws ConfigError on an empty sequence or range 0.
double c_sim(std::span<const Sample> seq, std::size_t range, double tolerance = 0.0);

/// c_sim evaluated with the staleness bound as the window.
double ls_async(std::span<const Sample> seq, std::size_t tau_max, double tolerance = 0.0);

/// (1/b^2) * sum of l0 over all ordered pairs of the batch.
double within_batch_csim(std::span<const Sample> batch, double tolerance = 0.0);

/// Largest within-batch similarity over the given batches.
double ls_sync(std::span<const std::vector<Sample>> batches, double tolerance = 0.0);

/// ls_sync over consecutive batches of `batch_size` samples of an ordered sequence
/// (the batches a synchronous trainer consumes). A short final batch is kept.
double ls_sync_consecutive(std::span<const Sample> seq, std::size_t batch_size, double tolerance = 0.0);

struct FeatureStats {
  std::vector<double> means;
  std::vector<double> variances;  // population variance, divisor n
};

FeatureStats feature_stats(const Dataset& ds);

/// Fraction of stored non-zeros over n * dim.
double density(const Dataset& ds);

/// Count of distinct (features, label) pairs.
std::size_t diversity(const Dataset& ds);

struct CharacterReport {
  std::size_t n = 0;
  std::size_t dim = 0;
  double density = 0.0;
  double sparsity = 1.0;
  std::vector<double> feature_means;
  std::vector<double> feature_variances;
  double mean_feature_variance = 0.0;
  std::size_t diversity = 0;
  std::optional<double> ls_async;
  std::optional<double> ls_sync;
};

CharacterReport character_report(const Dataset& ds, std::optional<std::size_t> tau_max,
                                 std::optional<std::size_t> batch_size);

/// Flat object with keys n, dim, density, sparsity, mean_feature_variance,
/// diversity, ls_async, ls_sync (null when absent); per-feature arrays only when `full`.
nlohmann::json to_json(const CharacterReport& r, bool full = false);

}  // namespace scalesgd
