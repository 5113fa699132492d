#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spot/nn/tensor.hpp"

namespace spot {
class Rng;
}

namespace spot::nn {

// [m,k] x [k,n] -> [m,n]; a rank-1 left operand gives a rank-1 result.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Same shape, or b of shape [n] broadcast across the rows of a [m,n].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// 1 - a, used by gate interpolation.
Tensor one_minus(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Euclidean norm of each row: [m,n] -> [m]; [n] -> [1].
Tensor row_norms(const Tensor& a);
// Mean over the rows whose mask entry is nonzero: [m,n] -> [n].
Tensor mean_rows(const Tensor& a, std::span<const std::uint8_t> mask = {});

// Softmax along each row. allowed has rows*cols entries (empty: all allowed);
// disallowed entries get probability exactly 0 and a row with nothing
// allowed becomes all zeros.
Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed = {});
Tensor log_softmax_rows(const Tensor& a);
// Mean negative log-likelihood of labels under row-wise softmax of logits.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

// Normalizes each row, then applies gain and bias of shape [cols].
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor reshape(const Tensor& a, Shape shape);
Tensor row(const Tensor& a, std::size_t index);  // rank-1 result
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
Tensor gather(const Tensor& a, std::span<const std::size_t> indices);  // rank-1 a
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
// Stacks rank-1 or rank-2 parts vertically into a rank-2 tensor.
Tensor concat_rows(std::span<const Tensor> parts);

// Inverted dropout; identity when rate is 0 or training is false.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

}  // namespace spot::nn
