#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "scalesgd/data.hpp"
#include "scalesgd/generators.hpp"

namespace scalesgd {

enum class OrderPolicy { as_stored, shuffled };

/// Ordered sample provider. draw(t) is a pure function of (source, t): finite
/// sources cycle with wraparound, streams are generated on demand and memoised.
/// Copies share the underlying data and stream cache.
class SampleSource {
 public:
  static SampleSource finite(std::shared_ptr<const Dataset> ds,
                             OrderPolicy order = OrderPolicy::as_stored, std::uint64_t seed = 0);
  static SampleSource finite(Dataset ds, OrderPolicy order = OrderPolicy::as_stored,
                             std::uint64_t seed = 0);
  static SampleSource stream(StreamSpec spec, Sample first);

  const Sample& draw(std::uint64_t t) const;

  /// Position in the underlying dataset that draw(t) returns. Finite sources only.
  std::size_t position(std::uint64_t t) const;

  bool is_finite() const noexcept { return dataset_ != nullptr; }
  std::uint32_t dim() const noexcept;
  /// Finite sources only; nullptr for streams.
  const Dataset* dataset() const noexcept { return dataset_.get(); }
  const StreamSpec* stream_spec() const noexcept { return stream_ ? &stream_->spec : nullptr; }

  /// Draws [0, count) collected into a dataset.
  Dataset prefix(std::size_t count) const;

 private:
  struct StreamState {
    StreamSpec spec;
    std::size_t target_support = 0;
    mutable std::mutex mutex;
    // Deque-like chunking keeps references stable while the cache grows.
    mutable std::vector<std::unique_ptr<std::vector<Sample>>> chunks;
    mutable std::size_t count = 0;
  };

  std::shared_ptr<const Dataset> dataset_;
  std::vector<std::size_t> order_;  // empty for as-stored
  std::shared_ptr<StreamState> stream_;
};

}  // namespace scalesgd
