#include "spot/smote.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spot/error.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

SmoteResult smote_upsample(std::span<const FeaturePoint> points, std::size_t k, double target_ratio,
                           Rng& rng) {
  return smote_upsample(
      points, k, target_ratio, [&rng] { return rng.uniform(); },
      [&rng](std::size_t n) { return rng.index(n); });
}

SmoteResult smote_upsample(std::span<const FeaturePoint> points, std::size_t k, double target_ratio,
                           const std::function<double()>& lambda,
                           const std::function<std::size_t(std::size_t)>& pick) {
  if (!(target_ratio >= 0.0)) throw UsageError("smote: target ratio must be non-negative");
  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int label = points[i].label;
    if (label != 0 && label != 1) throw UsageError("smote: labels must be 0 or 1");
    if (points[i].vector.size() != points[0].vector.size()) {
      throw UsageError("smote: feature dimensions differ");
    }
    by_label[label].push_back(i);
  }
  SmoteResult result;
  result.minority_label = by_label[0].size() < by_label[1].size() ? 0 : 1;
  const auto& minority = by_label[result.minority_label];
  const auto majority_count = by_label[1 - result.minority_label].size();
  if (minority.size() < 2) throw UsageError("smote: minority class needs at least two points");
  if (k == 0 || k >= minority.size()) {
    throw UsageError("smote: k must lie in [1, minority count - 1]; got k=" + std::to_string(k) +
                     " with " + std::to_string(minority.size()) + " minority points");
  }

  result.points.assign(points.begin(), points.end());
  result.original_count = points.size();
  const auto target = static_cast<std::size_t>(std::floor(target_ratio * static_cast<double>(majority_count)));
  if (target <= minority.size()) return result;
  const std::size_t needed = target - minority.size();

  // k nearest minority neighbours of each minority point.
  std::vector<std::vector<std::size_t>> neighbors(minority.size());
  for (std::size_t a = 0; a < minority.size(); ++a) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t b = 0; b < minority.size(); ++b) {
      if (a == b) continue;
      dist.emplace_back(squared_distance(points[minority[a]].vector, points[minority[b]].vector), minority[b]);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t j = 0; j < k; ++j) neighbors[a].push_back(dist[j].second);
  }

  for (std::size_t s = 0; s < needed; ++s) {
    const std::size_t a = s % minority.size();
    const std::size_t parent = minority[a];
    const std::size_t neighbor = neighbors[a][pick(k)];
    const double lam = lambda();
    FeaturePoint p;
    p.label = result.minority_label;
    p.vector.resize(points[parent].vector.size());
    for (std::size_t d = 0; d < p.vector.size(); ++d) {
      const double x = points[parent].vector[d];
      p.vector[d] = x + lam * (points[neighbor].vector[d] - x);
    }
    result.points.push_back(std::move(p));
    result.origins.push_back({parent, neighbor, lam});
  }
  return result;
}

}  // namespace spot
