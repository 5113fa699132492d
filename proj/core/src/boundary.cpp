#include "spot/boundary.hpp"

#include <cmath>
#include <limits>

#include "spot/error.hpp"
#include "spot/nn/ops.hpp"
#include "spot/nn/optim.hpp"

namespace spot {

std::vector<double> BoundaryModel::radii() const {
  std::vector<double> out;
  for (double raw : raw_radii.values()) {
    out.push_back(raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw)));
  }
  return out;
}

nn::Tensor boundary_loss(const nn::Tensor& z, std::span<const std::size_t> labels,
                         const nn::Tensor& centroids, const nn::Tensor& raw_radii) {
  const std::size_t classes = centroids.rows();
  if (raw_radii.size() != classes) throw UsageError("boundary_loss: one radius per centroid required");
  const nn::Tensor zm = z.rank() == 1 ? nn::reshape(z, {1, z.size()}) : z;
  if (zm.cols() != centroids.cols()) throw UsageError("boundary_loss: representation width mismatch");
  if (labels.size() != zm.rows() || labels.empty()) {
    throw UsageError("boundary_loss: need one label per sample and at least one sample");
  }
  for (auto y : labels) {
    if (y >= classes) throw UsageError("boundary_loss: label " + std::to_string(y) + " out of range");
  }
  auto dist = nn::row_norms(nn::sub(zm, nn::gather_rows(centroids, labels)));
  auto delta = nn::gather(nn::softplus(raw_radii), labels);
  // Delta_i = 1 outside the boundary: dist - delta; inside: delta - dist.
  std::vector<double> sign(labels.size());
  for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = dist.at(i) > delta.at(i) ? 1.0 : -1.0;
  const std::size_t n = sign.size();
  auto terms = nn::mul(nn::sub(dist, delta), nn::Tensor::from({n}, std::move(sign)));
  return nn::mean(terms);
}

BoundaryModel fit_boundaries(const std::vector<std::vector<double>>& representations,
                             std::span<const std::size_t> labels, std::size_t num_classes,
                             const BoundaryFitConfig& config) {
  if (representations.empty() || representations.size() != labels.size()) {
    throw UsageError("fit_boundaries: need one label per representation");
  }
  const std::size_t dim = representations[0].size();
  std::vector<double> sums(num_classes * dim, 0.0), flat;
  std::vector<std::size_t> counts(num_classes, 0);
  flat.reserve(representations.size() * dim);
  for (std::size_t i = 0; i < representations.size(); ++i) {
    if (representations[i].size() != dim) throw UsageError("fit_boundaries: ragged representations");
    if (labels[i] >= num_classes) throw UsageError("fit_boundaries: label out of range");
    ++counts[labels[i]];
    for (std::size_t d = 0; d < dim; ++d) sums[labels[i] * dim + d] += representations[i][d];
    flat.insert(flat.end(), representations[i].begin(), representations[i].end());
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw DataError("fit_boundaries: class " + std::to_string(c) + " has no samples");
    for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] /= static_cast<double>(counts[c]);
  }

  BoundaryModel model;
  model.centroids = nn::Tensor::from({num_classes, dim}, std::move(sums));
  model.raw_radii = nn::Tensor::parameter({num_classes}, std::vector<double>(num_classes, 0.0));
  const auto z = nn::Tensor::from({representations.size(), dim}, std::move(flat));
  nn::Adam adam({model.raw_radii}, {.learning_rate = config.learning_rate, .clip_norm = 0.0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    adam.zero_grad();
    boundary_loss(z, labels, model.centroids, model.raw_radii).backward();
    adam.step();
  }
  model.raw_radii.zero_grad();
  return model;
}

std::size_t nearest_centroid(std::span<const double> z, const nn::Tensor& centroids) {
  const std::size_t k = centroids.rows(), d = centroids.cols();
  if (z.size() != d) throw UsageError("nearest_centroid: representation width mismatch");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = z[j] - centroids.at(c, j);
      s += diff * diff;
    }
    if (s < best_dist) {
      best_dist = s;
      best = c;
    }
  }
  return best;
}

PersonaType predict_type(std::span<const double> z, const BoundaryModel& boundaries) {
  if (boundaries.num_classes() != kNumPersonaTypes) {
    throw UsageError("predict_type: boundary model must have one class per persona type");
  }
  return kAllPersonaTypes[nearest_centroid(z, boundaries.centroids)];
}

}  // namespace spot
