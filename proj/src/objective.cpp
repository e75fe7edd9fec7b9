#include "scalesgd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scalesgd/errors.hpp"

namespace scalesgd {

double logistic_loss(double t) {
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {
double squared_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}
}  // namespace

double point_loss(std::span<const double> x, const Sample& s, double lambda) {
  return logistic_loss(s.label() * s.dot(x)) + 0.5 * lambda * squared_norm(x);
}

std::vector<double> PointGradient::materialize(std::span<const double> x) const {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = lambda * x[k];
  for (const auto& f : support) g[f.index] += coefficient * f.value;
  return g;
}

PointGradient point_subgradient(std::span<const double> x, const Sample& s, double lambda) {
  const double margin = s.label() * s.dot(x);
  return {gradient_coefficient(margin, s.label()), s.features(), lambda};
}

double dataset_logloss(std::span<const double> x, const Dataset& ds) {
  if (ds.empty()) throw ConfigError("logloss of an empty dataset");
  double acc = 0.0;
  for (const auto& s : ds) acc += logistic_loss(s.label() * s.dot(x));
  return acc / static_cast<double>(ds.size());
}

double primal_objective(std::span<const double> x, const Dataset& ds, double lambda) {
  return dataset_logloss(x, ds) + 0.5 * lambda * squared_norm(x);
}

double logistic_conjugate(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("logistic conjugate needs a in [0, 1]");
  a = std::clamp(a, kAlphaEpsilon, 1.0 - kAlphaEpsilon);
  return a * std::log(a) + (1.0 - a) * std::log1p(-a);
}

DualState::DualState(const Dataset& ds, double lambda, double initial_alpha)
    : ds_(&ds), lambda_(lambda), alpha_(ds.size(), std::clamp(initial_alpha, kAlphaEpsilon, 1.0 - kAlphaEpsilon)) {
  if (ds.empty()) throw ConfigError("dual state needs a non-empty dataset");
  if (!(lambda > 0.0)) throw ConfigError("dual methods need lambda > 0");
  v_ = recompute_v();
}

double DualState::update(std::size_t i, double delta) {
  const double next = std::clamp(alpha_[i] + delta, kAlphaEpsilon, 1.0 - kAlphaEpsilon);
  const double applied = next - alpha_[i];
  alpha_[i] = next;
  const auto& s = (*ds_)[i];
  const double scale = applied * s.label() / (lambda_ * static_cast<double>(n()));
  for (const auto& f : s.features()) v_[f.index] += scale * f.value;
  return applied;
}

void DualState::set_alpha(std::size_t i, double value) {
  alpha_[i] = std::clamp(value, kAlphaEpsilon, 1.0 - kAlphaEpsilon);
}

std::vector<double> DualState::recompute_v() const {
  std::vector<double> v(ds_->dim(), 0.0);
  const double denom = lambda_ * static_cast<double>(n());
  for (std::size_t i = 0; i < n(); ++i) {
    const auto& s = (*ds_)[i];
    const double scale = alpha_[i] * s.label() / denom;
    for (const auto& f : s.features()) v[f.index] += scale * f.value;
  }
  return v;
}

double dual_objective(const DualState& dual, const Dataset& ds) {
  if (ds.size() != dual.n()) throw std::logic_error("dual state does not belong to this dataset");
  double acc = 0.0;
  for (double a : dual.alpha()) acc -= logistic_conjugate(a);
  return acc / static_cast<double>(dual.n()) - 0.5 * dual.lambda() * squared_norm(dual.v());
}

double duality_gap(const DualState& dual, const Dataset& ds) {
  if (ds.size() != dual.n() || ds.dim() != dual.v().size())
    throw std::logic_error("dual state does not belong to this dataset");
  for (double a : dual.alpha())
    if (!(a >= kAlphaEpsilon && a <= 1.0 - kAlphaEpsilon)) throw std::logic_error("dual variable out of range");
  const auto fresh = dual.recompute_v();
  double scale = 1.0;
  for (double x : fresh) scale = std::max(scale, std::abs(x));
  for (std::size_t k = 0; k < fresh.size(); ++k)
    if (std::abs(fresh[k] - dual.v()[k]) > 1e-8 * scale) throw std::logic_error("incremental v drifted from its definition");
  return primal_objective(dual.v(), ds, dual.lambda()) - dual_objective(dual, ds);
}

}  // namespace scalesgd
