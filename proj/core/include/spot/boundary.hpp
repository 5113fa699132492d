#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spot/corpus.hpp"
#include "spot/nn/tensor.hpp"

namespace spot {

// Adaptive decision boundaries: one centroid and one radius per class. The
// radius is softplus(raw) so it stays positive for any raw value.
struct BoundaryModel {
  nn::Tensor centroids;  // [K, d]
  nn::Tensor raw_radii;  // [K]

  std::size_t num_classes() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
  std::vector<double> radii() const;
};

// L_b = mean_i |dist_i - delta_{y_i}| written in its two-branch form:
// dist - delta for samples outside their boundary, delta - dist otherwise,
// with dist = ||z_i - c_{y_i}||. Differentiable in z, centroids and raw
// radii. z is [N, d] (or [d] for N = 1). Throws UsageError for labels
// outside [0, K) or mismatched widths.
nn::Tensor boundary_loss(const nn::Tensor& z, std::span<const std::size_t> labels,
                         const nn::Tensor& centroids, const nn::Tensor& raw_radii);

struct BoundaryFitConfig {
  std::size_t epochs = 400;
  double learning_rate = 0.05;
};

// Centroids are the per-class means of the representations (the k-means
// centres once labels are known) and stay fixed; raw radii start at 0 and
// are optimized with Adam on the full-batch boundary loss. Throws DataError
// if some class in [0, num_classes) has no sample.
BoundaryModel fit_boundaries(const std::vector<std::vector<double>>& representations,
                             std::span<const std::size_t> labels, std::size_t num_classes,
                             const BoundaryFitConfig& config = {});

// Index of the nearest centroid; ties go to the lowest index. Radii are not
// consulted (closed-set decision).
std::size_t nearest_centroid(std::span<const double> z, const nn::Tensor& centroids);

// nearest_centroid mapped to a persona type; requires five classes.
PersonaType predict_type(std::span<const double> z, const BoundaryModel& boundaries);

}  // namespace spot
