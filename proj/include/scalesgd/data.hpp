#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scalesgd {

struct Feature {
  std::uint32_t index;
  double value;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sparse labeled feature vector. Indices are 0-based and strictly increasing,
/// values finite and non-zero, label is -1 or +1.
class Sample {
 public:
  Sample() = default;

  /// Sorts `features`, drops explicit zeros. Throws DataError on duplicate or
  /// out-of-range indices, non-finite values, a label outside {-1,+1}, or dim 0.
  Sample(std::vector<Feature> features, double label, std::uint32_t dim);

  std::span<const Feature> features() const noexcept { return features_; }
  double label() const noexcept { return label_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return features_.size(); }

  /// Value at `index`, 0 when absent.
  double value_at(std::uint32_t index) const;

  double dot(std::span<const double> x) const noexcept {
    double acc = 0.0;
    for (const auto& f : features_) acc += f.value * x[f.index];
    return acc;
  }

  double squared_norm() const noexcept {
    double acc = 0.0;
    for (const auto& f : features_) acc += f.value * f.value;
    return acc;
  }

  Sample with_label(double label) const;
  /// Same sample embedded in a larger ambient space.
  Sample with_dim(std::uint32_t dim) const;

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::vector<Feature> features_;
  double label_ = 1.0;
  std::uint32_t dim_ = 1;
};

/// Ordered, immutable collection of samples sharing one ambient dimension.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError when a sample's dim differs from `dim`.
  Dataset(std::string name, std::uint32_t dim, std::vector<Sample> samples,
          std::size_t discarded = 0);

  const std::string& name() const noexcept { return name_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const Sample> samples() const noexcept { return samples_; }
  /// Samples dropped when this dataset was produced by a split.
  std::size_t discarded() const noexcept { return discarded_; }

  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

 private:
  std::string name_;
  std::uint32_t dim_ = 1;
  std::vector<Sample> samples_;
  std::size_t discarded_ = 0;
};

// --- svmlight ---------------------------------------------------------------

/// Parses `<label> (<index>:<value>)*` with 1-based indices. Labels 0/1 map to
/// -1/+1. The resulting dim is max(dim_hint, max index + 1).
Sample parse_svmlight(std::string_view line, std::uint32_t dim_hint, std::size_t line_no = 1);

/// Canonical form: `+1|-1` followed by ascending 1-based `i:v` pairs, values in
/// shortest round-trip decimal.
std::string serialize_svmlight(const Sample& s);

Dataset read_svmlight(std::istream& in, std::string name, std::uint32_t dim_hint = 0);
Dataset load_svmlight(const std::string& path, std::uint32_t dim_hint = 0);
void write_svmlight(std::ostream& out, const Dataset& ds);
void save_svmlight(const std::string& path, const Dataset& ds);

// --- dense CSV --------------------------------------------------------------

/// `expected_columns` of 0 accepts any width (first row); otherwise the row must match.
Sample parse_dense_csv(std::string_view line, std::size_t label_column,
                       std::size_t expected_columns = 0, std::size_t line_no = 1);

Dataset read_dense_csv(std::istream& in, std::string name, std::size_t label_column = 0);
Dataset load_dense_csv(const std::string& path, std::size_t label_column = 0);

// --- splitting --------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.7;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Seeded disjoint split; sizes are round(n * fraction). Members keep their
/// stored relative order; the remainder is discarded and counted in metadata.
SplitResult split(const Dataset& ds, const SplitSpec& spec);

/// Concatenation in order; dims must agree.
Dataset concat(const Dataset& a, const Dataset& b, std::string name);

}  // namespace scalesgd
