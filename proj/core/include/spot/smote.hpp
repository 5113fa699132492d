#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace spot {

class Rng;

struct FeaturePoint {
  std::vector<double> vector;
  int label = 0;  // 0 or 1
};

// Where a synthetic point came from: indices into the input point list.
struct SyntheticOrigin {
  std::size_t parent = 0;
  std::size_t neighbor = 0;
  double lambda = 0.0;
};

struct SmoteResult {
  std::vector<FeaturePoint> points;  // the originals, unchanged, then the synthetic points
  std::vector<SyntheticOrigin> origins;  // one per synthetic point, in order
  std::size_t original_count = 0;
  int minority_label = 1;
};

// Synthetic minority oversampling. The minority is the label with fewer
// points (label 1 on a tie). Enough synthetic points are added that
// minority / majority reaches target_ratio, with the minority target rounded
// down; nothing is added when the ratio already holds. Parents are taken
// round-robin over the minority points in input order; each synthetic point
// is parent + lambda * (neighbor - parent) with the neighbor drawn uniformly
// from the parent's k nearest minority neighbors (Euclidean, ties by index).
//
// Throws UsageError when the minority has fewer than two points, k is zero
// or k >= minority count, or vector dimensions differ.
SmoteResult smote_upsample(std::span<const FeaturePoint> points, std::size_t k, double target_ratio,
                           Rng& rng);

// Same, with caller-supplied draws: lambda() in [0, 1] and pick(n) in [0, n).
SmoteResult smote_upsample(std::span<const FeaturePoint> points, std::size_t k, double target_ratio,
                           const std::function<double()>& lambda,
                           const std::function<std::size_t(std::size_t)>& pick);

}  // namespace spot
