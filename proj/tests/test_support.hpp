#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "scalesgd/data.hpp"
#include "scalesgd/rng.hpp"

namespace scalesgd::testing {

/// Sample from a dense value list; zeros are dropped by the constructor.
inline Sample dense_sample(const std::vector<double>& values, double label = 1.0) {
  std::vector<Feature> features;
  for (std::uint32_t k = 0; k < values.size(); ++k) features.push_back({k, values[k]});
  return Sample(std::move(features), label, static_cast<std::uint32_t>(values.size()));
}

inline Dataset dense_dataset(const std::vector<std::vector<double>>& rows, std::vector<double> labels = {}) {
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < rows.size(); ++i) samples.push_back(dense_sample(rows[i], labels.empty() ? 1.0 : labels[i]));
  const auto dim = rows.empty() ? 1u : static_cast<std::uint32_t>(rows.front().size());
  return Dataset("test", dim, std::move(samples));
}

/// Random sparse sample with integer-valued entries in [-range, range] so that
/// coincidences (equal values) actually happen.
inline Sample random_small_sample(Rng& rng, std::uint32_t dim, int range = 2) {
  std::vector<Feature> features;
  for (std::uint32_t k = 0; k < dim; ++k) {
    const auto v = static_cast<int>(rng.below(2 * range + 1)) - range;
    if (v != 0) features.push_back({k, static_cast<double>(v)});
  }
  return Sample(std::move(features), rng.below(2) == 0 ? -1.0 : 1.0, dim);
}

inline std::string svmlight_text(const Dataset& ds) {
  std::ostringstream out;
  write_svmlight(out, ds);
  return out.str();
}

}  // namespace scalesgd::testing
