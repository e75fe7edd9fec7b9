#include "scalesgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "scalesgd/errors.hpp"

namespace scalesgd {

std::size_t l0_distance(const Sample& a, const Sample& b, double tolerance) {
  auto differs = [tolerance](double x, double y) { return std::abs(x - y) > tolerance; };
  const auto fa = a.features();
  const auto fb = b.features();
  std::size_t i = 0, j = 0, count = 0;
  while (i < fa.size() && j < fb.size()) {
    if (fa[i].index == fb[j].index) {
      count += differs(fa[i].value, fb[j].value);
      ++i;
      ++j;
    } else if (fa[i].index < fb[j].index) {
      count += differs(fa[i++].value, 0.0);
    } else {
      count += differs(0.0, fb[j++].value);
    }
  }
  for (; i < fa.size(); ++i) count += differs(fa[i].value, 0.0);
  for (; j < fb.size(); ++j) count += differs(0.0, fb[j].value);
  return count;
}

double c_sim(std::span<const Sample> seq, std::size_t range, double tolerance) {
  if (seq.empty()) throw ConfigError("c_sim needs a non-empty sequence");
  if (range == 0) throw ConfigError("c_sim range must be at least 1");
  const std::size_t n = seq.size();
  // (1/n) sum_i (W_i / range) == (sum_i W_i) / (n * range); the integer sum is exact.
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 1; j <= range; ++j) total += l0_distance(seq[i], seq[(i + j) % n], tolerance);
  return static_cast<double>(total) / (static_cast<double>(n) * static_cast<double>(range));
}

double ls_async(std::span<const Sample> seq, std::size_t tau_max, double tolerance) {
  return c_sim(seq, tau_max, tolerance);
}

double within_batch_csim(std::span<const Sample> batch, double tolerance) {
  if (batch.empty()) throw ConfigError("within_batch_csim needs a non-empty batch");
  // Integer accumulation keeps the result independent of batch order.
  std::size_t total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = i + 1; k < batch.size(); ++k) total += 2 * l0_distance(batch[i], batch[k], tolerance);
  const double b = static_cast<double>(batch.size());
  return static_cast<double>(total) / (b * b);
}

double ls_sync(std::span<const std::vector<Sample>> batches, double tolerance) {
  if (batches.empty()) throw ConfigError("ls_sync needs at least one batch");
  double best = 0.0;
  for (const auto& b : batches) best = std::max(best, within_batch_csim(b, tolerance));
  return best;
}

double ls_sync_consecutive(std::span<const Sample> seq, std::size_t batch_size, double tolerance) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (seq.empty()) throw ConfigError("ls_sync needs a non-empty sequence");
  double best = 0.0;
  for (std::size_t start = 0; start < seq.size(); start += batch_size) {
    const auto len = std::min(batch_size, seq.size() - start);
    best = std::max(best, within_batch_csim(seq.subspan(start, len), tolerance));
  }
  return best;
}

FeatureStats feature_stats(const Dataset& ds) {
  FeatureStats st;
  st.means.assign(ds.dim(), 0.0);
  st.variances.assign(ds.dim(), 0.0);
  if (ds.empty()) return st;
  const double n = static_cast<double>(ds.size());

  std::vector<std::size_t> present(ds.dim(), 0);
  for (const auto& s : ds)
    for (const auto& f : s.features()) {
      st.means[f.index] += f.value;
      ++present[f.index];
    }
  for (auto& m : st.means) m /= n;

  // Two-pass: stored entries contribute (x - mean)^2, absent ones mean^2.
  for (const auto& s : ds)
    for (const auto& f : s.features()) {
      const double d = f.value - st.means[f.index];
      st.variances[f.index] += d * d;
    }
  for (std::uint32_t k = 0; k < ds.dim(); ++k) {
    const double absent = n - static_cast<double>(present[k]);
    st.variances[k] = (st.variances[k] + absent * st.means[k] * st.means[k]) / n;
  }
  return st;
}

double density(const Dataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t nnz = 0;
  for (const auto& s : ds) nnz += s.nnz();
  return static_cast<double>(nnz) / (static_cast<double>(ds.size()) * static_cast<double>(ds.dim()));
}

std::size_t diversity(const Dataset& ds) {
  std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
  buckets.reserve(ds.size());
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto key = std::hash<std::string>{}(serialize_svmlight(ds[i]));
    auto& bucket = buckets[key];
    const bool seen = std::any_of(bucket.begin(), bucket.end(), [&](std::size_t j) { return ds[j] == ds[i]; });
    if (!seen) {
      bucket.push_back(i);
      ++distinct;
    }
  }
  return distinct;
}

CharacterReport character_report(const Dataset& ds, std::optional<std::size_t> tau_max,
                                 std::optional<std::size_t> batch_size) {
  CharacterReport r;
  r.n = ds.size();
  r.dim = ds.dim();
  r.density = density(ds);
  r.sparsity = 1.0 - r.density;
  auto stats = feature_stats(ds);
  r.feature_means = std::move(stats.means);
  r.feature_variances = std::move(stats.variances);
  double sum = 0.0;
  for (double v : r.feature_variances) sum += v;
  r.mean_feature_variance = r.feature_variances.empty() ? 0.0 : sum / static_cast<double>(r.feature_variances.size());
  r.diversity = diversity(ds);
  if (tau_max) r.ls_async = ls_async(ds.samples(), *tau_max);
  if (batch_size) r.ls_sync = ls_sync_consecutive(ds.samples(), *batch_size);
  return r;
}

nlohmann::json to_json(const CharacterReport& r, bool full) {
  nlohmann::json j;
  j["n"] = r.n;
  j["dim"] = r.dim;
  j["density"] = r.density;
  j["sparsity"] = r.sparsity;
  j["mean_feature_variance"] = r.mean_feature_variance;
  j["diversity"] = r.diversity;
  j["ls_async"] = r.ls_async ? nlohmann::json(*r.ls_async) : nlohmann::json(nullptr);
  j["ls_sync"] = r.ls_sync ? nlohmann::json(*r.ls_sync) : nlohmann::json(nullptr);
  if (full) {
    j["feature_means"] = r.feature_means;
    j["feature_variances"] = r.feature_variances;
  }
  return j;
}

}  // namespace scalesgd
