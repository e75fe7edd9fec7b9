#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scalesgd/data.hpp"

namespace scalesgd {

/// L2-regularized logistic regression: mean log(1 + exp(-y xi.x)) + lambda/2 |x|^2.
struct ObjectiveSpec {
  double lambda = 0.01;
};

struct ModelState {
  std::vector<double> x;
  std::size_t step = 0;
};

/// Clamp keeping dual variables strictly inside (0, 1).
inline constexpr double kAlphaEpsilon = 1e-12;

/// log(1 + exp(-t)) without overflow for large |t|.
double logistic_loss(double t);

/// 1 / (1 + exp(-t)), stable on both tails.
double sigmoid(double t);

double point_loss(std::span<const double> x, const Sample& s, double lambda);

/// Subgradient of point_loss split into a sparse data part coefficient * xi and
/// the dense regularization part lambda * x.
struct PointGradient {
  double coefficient = 0.0;  // -label * sigmoid(-margin)
  std::span<const Feature> support;
  double lambda = 0.0;

  /// Dense form, for checks.
  std::vector<double> materialize(std::span<const double> x) const;
};

PointGradient point_subgradient(std::span<const double> x, const Sample& s, double lambda);

/// Coefficient of the data part only: d/dmargin of the logistic loss times label.
inline double gradient_coefficient(double margin_times_label, double label) {
  return -label * sigmoid(-margin_times_label);
}

/// Unregularized mean logloss. Throws ConfigError on an empty dataset.
double dataset_logloss(std::span<const double> x, const Dataset& ds);

/// Mean logloss plus lambda/2 |x|^2.
double primal_objective(std::span<const double> x, const Dataset& ds, double lambda);

/// a log a + (1 - a) log(1 - a), the conjugate of the logistic loss at -a. Inputs
/// in [0, 1] are clamped to [eps, 1 - eps]; anything else throws ConfigError.
double logistic_conjugate(double a);

/// Dual variables for SDCA-style solvers with v = (1/(lambda n)) sum alpha_i y_i xi_i.
class DualState {
 public:
  DualState(const Dataset& ds, double lambda, double initial_alpha = kAlphaEpsilon);

  std::span<const double> alpha() const noexcept { return alpha_; }
  std::span<const double> v() const noexcept { return v_; }
  double lambda() const noexcept { return lambda_; }
  std::size_t n() const noexcept { return alpha_.size(); }

  /// alpha_i += delta (clamped into range), keeping v consistent. Returns the applied delta.
  double update(std::size_t i, double delta);
  /// Sets alpha_i without touching v; pair with add_to_v for aggregated updates.
  void set_alpha(std::size_t i, double value);
  void add_to_v(std::uint32_t k, double delta) { v_[k] += delta; }

  /// v recomputed from scratch.
  std::vector<double> recompute_v() const;

 private:
  const Dataset* ds_;
  double lambda_;
  std::vector<double> alpha_;
  std::vector<double> v_;
};

double dual_objective(const DualState& dual, const Dataset& ds);

/// primal(v) - dual(alpha). Throws std::logic_error when the incremental v has
/// drifted from its definition or alpha left its range.
double duality_gap(const DualState& dual, const Dataset& ds);

}  // namespace scalesgd
