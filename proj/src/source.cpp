#include "scalesgd/source.hpp"

#include <numeric>

#include "scalesgd/errors.hpp"
#include "scalesgd/rng.hpp"

namespace scalesgd {

namespace {
constexpr std::size_t kChunk = 4096;
}

SampleSource SampleSource::finite(std::shared_ptr<const Dataset> ds, OrderPolicy order,
                                  std::uint64_t seed) {
  if (!ds || ds->empty()) throw ConfigError("finite sample source needs a non-empty dataset");
  SampleSource src;
  src.dataset_ = std::move(ds);
  if (order == OrderPolicy::shuffled) {
    const auto n = src.dataset_->size();
    src.order_.resize(n);
    std::iota(src.order_.begin(), src.order_.end(), std::size_t{0});
    Rng rng({seed, 0x0de7});
    for (std::size_t i = n; i > 1; --i) std::swap(src.order_[i - 1], src.order_[rng.below(i)]);
  }
  return src;
}

SampleSource SampleSource::finite(Dataset ds, OrderPolicy order, std::uint64_t seed) {
  return finite(std::make_shared<const Dataset>(std::move(ds)), order, seed);
}

SampleSource SampleSource::stream(StreamSpec spec, Sample first) {
  if (first.dim() != spec.dim) throw ConfigError("first sample dim does not match stream dim");
  if (!(spec.mutation_fraction >= 0.0 && spec.mutation_fraction <= 1.0))
    throw ConfigError("mutation_fraction must be in [0, 1]");
  if (!(spec.value_range.low < spec.value_range.high)) throw ConfigError("value_range requires low < high");
  SampleSource src;
  src.stream_ = std::make_shared<StreamState>();
  src.stream_->spec = spec;
  src.stream_->target_support = first.nnz();
  src.stream_->chunks.push_back(std::make_unique<std::vector<Sample>>());
  src.stream_->chunks.back()->reserve(kChunk);
  src.stream_->chunks.back()->push_back(std::move(first));
  src.stream_->count = 1;
  return src;
}

std::size_t SampleSource::position(std::uint64_t t) const {
  if (!dataset_) throw ConfigError("stream sources have no dataset positions");
  const auto i = static_cast<std::size_t>(t % dataset_->size());
  return order_.empty() ? i : order_[i];
}

const Sample& SampleSource::draw(std::uint64_t t) const {
  if (dataset_) return (*dataset_)[position(t)];

  auto& st = *stream_;
  std::lock_guard lock(st.mutex);
  while (st.count <= t) {
    const Sample& prev = (*st.chunks[(st.count - 1) / kChunk])[(st.count - 1) % kChunk];
    Sample next = ls_stream_next(prev, st.spec, st.count, st.target_support);
    if (st.count % kChunk == 0) {
      st.chunks.push_back(std::make_unique<std::vector<Sample>>());
      st.chunks.back()->reserve(kChunk);
    }
    st.chunks.back()->push_back(std::move(next));
    ++st.count;
  }
  return (*st.chunks[t / kChunk])[t % kChunk];
}

std::uint32_t SampleSource::dim() const noexcept {
  return dataset_ ? dataset_->dim() : stream_->spec.dim;
}

Dataset SampleSource::prefix(std::size_t count) const {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) out.push_back(draw(t));
  return Dataset(dataset_ ? dataset_->name() : "stream", dim(), std::move(out));
}

}  // namespace scalesgd
