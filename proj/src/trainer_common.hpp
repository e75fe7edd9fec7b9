#pragma once

// Internal helpers shared by the trainers. Every trainer routes its model update
// through apply_update so that degenerate configurations reproduce the
// sequential baseline bit for bit.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "scalesgd/algorithms.hpp"

namespace scalesgd::detail {

/// Dense accumulator for sparse gradient contributions with a touched-index list.
class GradientBuffer {
 public:
  explicit GradientBuffer(std::uint32_t dim) : acc_(dim, 0.0), mark_(dim, 0) {}

  void add(const Sample& s, double coefficient) {
    for (const auto& f : s.features()) {
      if (!mark_[f.index]) {
        mark_[f.index] = 1;
        touched_.push_back(f.index);
      }
      acc_[f.index] += coefficient * f.value;
    }
  }

  void add_entry(std::uint32_t k, double value) {
    if (!mark_[k]) {
      mark_[k] = 1;
      touched_.push_back(k);
    }
    acc_[k] += value;
  }

  void scale(double factor) {
    for (auto k : touched_) acc_[k] *= factor;
  }

  void clear() {
    for (auto k : touched_) {
      acc_[k] = 0.0;
      mark_[k] = 0;
    }
    touched_.clear();
  }

  std::span<const std::uint32_t> touched() const { return touched_; }
  double operator[](std::uint32_t k) const { return acc_[k]; }

  /// Entries in ascending index order.
  std::vector<Feature> extract() const;

 private:
  std::vector<double> acc_;
  std::vector<char> mark_;
  std::vector<std::uint32_t> touched_;
};

/// Adds the data-part gradient of `s` evaluated at `x`. Returns false when the
/// margin is not finite.
inline bool accumulate_gradient(GradientBuffer& buf, std::span<const double> x, const Sample& s) {
  const double margin = s.label() * s.dot(x);
  if (!std::isfinite(margin)) return false;
  buf.add(s, gradient_coefficient(margin, s.label()));
  return true;
}

/// out[k] = base[k] - gamma*lambda*current[k] - gamma*g[k]. `out` may alias `base`
/// and `current`.
template <typename Grad>
void apply_update(std::span<double> out, std::span<const double> base, std::span<const double> current,
                  double gamma, double lambda, const Grad& g) {
  const double decay = gamma * lambda;
  if (decay != 0.0) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = base[k] - decay * current[k];
  } else if (out.data() != base.data()) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = base[k];
  }
  g.for_each([&](std::uint32_t k, double value) { out[k] -= gamma * value; });
}

struct BufferView {
  const GradientBuffer& buf;
  template <typename F>
  void for_each(F&& f) const {
    for (auto k : buf.touched()) f(k, buf[k]);
  }
};

struct EntriesView {
  std::span<const Feature> entries;
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& e : entries) f(e.index, e.value);
  }
};

/// Evaluation cadence, PCA time mapping, target detection and divergence checks.
class TraceRecorder {
 public:
  /// `time_divisor` is m for asynchronous trainers (time = server_iter / m) and 1 otherwise.
  TraceRecorder(const EvalSets& eval, const RunConfig& cfg, std::size_t time_divisor);

  bool due(std::size_t server_iter) const {
    return server_iter % cfg_.eval_every == 0 || server_iter == cfg_.max_server_iters;
  }

  /// Appends a row; returns true when the configured target has been met.
  bool record(std::size_t server_iter, std::span<const double> x);

  [[noreturn]] void diverged() const { throw RunDiverged(last_recorded_, trace_); }

  Trace& trace() { return trace_; }
  std::optional<std::size_t> reached_at() const { return reached_at_; }

 private:
  EvalSets eval_;
  const RunConfig& cfg_;
  std::size_t time_divisor_;
  Trace trace_;
  std::size_t last_recorded_ = 0;
  std::optional<std::size_t> reached_at_;
};

}  // namespace scalesgd::detail
