#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spot/nn/tensor.hpp"

namespace spot {
class Rng;
}

namespace spot::nn {

// Hyperparameters shared by the encoders. Defaults are desk-scale choices.
struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 1;
  std::size_t num_heads = 2;
  double dropout_rate = 0.0;
  std::size_t max_sequence_length = 48;
  std::uint64_t seed = 13;

  // Throws UsageError on a non-positive dimension, embed_dim not divisible by
  // num_heads or dropout_rate outside [0, 1).
  void validate() const;
};

// Named parameters in lexicographic order. Names are slash-separated paths
// ("discovery/t_u/layer0/attn/w_q").
class ParameterStore {
 public:
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor create(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor create_constant(const std::string& name, Shape shape, double value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::vector<Tensor> with_prefix(const std::string& prefix) const;
  std::size_t parameter_count() const;

  void zero_grad();
  // Overwrites values from another store with identical names and shapes.
  void assign(const ParameterStore& other);

 private:
  std::map<std::string, Tensor> params_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_dim() const { return weight_.rows(); }
  std::size_t out_dim() const { return weight_.cols(); }

 private:
  Tensor weight_;
  Tensor bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor gain_;
  Tensor bias_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, std::size_t count, std::size_t dim,
            Rng& rng);
  Tensor operator()(std::span<const std::int32_t> ids) const;
  const Tensor& table() const { return table_; }
  std::size_t dim() const { return table_.cols(); }

 private:
  Tensor table_;
};

struct AttentionResult {
  Tensor context;  // [d_v]
  Tensor weights;  // [L]
};

// Additive (single hidden layer) attention:
//   score_i = v . tanh(W_q q + W_k k_i + b),  weights = softmax over unmasked i.
class AdditiveAttention {
 public:
  AdditiveAttention() = default;
  AdditiveAttention(ParameterStore& store, const std::string& name, std::size_t query_dim,
                    std::size_t key_dim, std::size_t hidden_dim, Rng& rng);

  // query [d_q], keys [L, d_k], values [L, d_v], mask length L (nonzero =
  // attendable). Throws UsageError on dimension mismatch or when every
  // position is masked.
  AttentionResult operator()(const Tensor& query, const Tensor& keys, const Tensor& values,
                             std::span<const std::uint8_t> mask = {}) const;

 private:
  Linear query_proj_;
  Linear key_proj_;
  Tensor score_;  // [hidden, 1]
};

// One GRU direction:
//   z = s(x W_z + h U_z + b_z), r = s(x W_r + h U_r + b_r)
//   n = tanh(x W_n + b_n + r * (h U_n)),  h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& name, std::size_t input_dim,
          std::size_t hidden_dim, Rng& rng);

  // Runs over the rows of inputs [L, in] from h_0 = 0; returns states [L, h].
  Tensor run(const Tensor& inputs) const;
  std::size_t hidden_dim() const { return recurrent_.rows(); }

 private:
  Tensor input_;      // [in, 3h]
  Tensor recurrent_;  // [h, 3h]
  Tensor bias_;       // [3h]
};

struct BiGruOutput {
  Tensor states;   // [L, 2h]: forward state then backward state per position
  Tensor summary;  // [2h]: final forward state then final backward state
};

class BiGru {
 public:
  BiGru() = default;
  BiGru(ParameterStore& store, const std::string& name, std::size_t input_dim,
        std::size_t hidden_dim, Rng& rng);
  BiGru(GruCell forward, GruCell backward)
      : forward_(std::move(forward)), backward_(std::move(backward)) {}

  // Throws UsageError on an empty sequence.
  BiGruOutput operator()(const Tensor& tokens) const;
  // Backward-direction states aligned to input positions.
  Tensor backward_states(const Tensor& tokens) const;
  const GruCell& forward_cell() const { return forward_; }

 private:
  GruCell forward_;
  GruCell backward_;
};

// Scaled dot-product multi-head attention with input/output projections.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                     std::size_t heads, Rng& rng);

  // queries [Lq, d], memory [Lk, d]. key_mask (length Lk) hides keys;
  // query_mask (length Lq) zeroes the output rows of masked queries; causal
  // restricts query i to keys <= i.
  Tensor operator()(const Tensor& queries, const Tensor& memory,
                    std::span<const std::uint8_t> key_mask = {},
                    std::span<const std::uint8_t> query_mask = {}, bool causal = false) const;

 private:
  std::size_t heads_ = 1;
  Linear q_, k_, v_, o_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t hidden,
              Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Linear in_, out_;
};

// Post-norm encoder layer: h = LN(x + MHA(x)); y = LN(h + FFN(h)).
class TransformerEncoderLayer {
 public:
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(ParameterStore& store, const std::string& name, std::size_t dim,
                          std::size_t heads, std::size_t ffn_dim, Rng& rng);
  Tensor operator()(const Tensor& x, std::span<const std::uint8_t> mask = {}) const;

 private:
  MultiHeadAttention attn_;
  LayerNorm norm1_, norm2_;
  FeedForward ffn_;
};

// Stack of encoder layers with optional learned positional embeddings.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParameterStore& store, const std::string& name, std::size_t dim,
                     std::size_t heads, std::size_t ffn_dim, std::size_t layers,
                     std::size_t max_positions, Rng& rng);

  // seq [L, d]. Positions past the table reuse its last row. Throws
  // UsageError when every position is masked.
  Tensor operator()(const Tensor& seq, std::span<const std::uint8_t> mask = {},
                    bool use_positional = true) const;
  std::size_t max_positions() const { return positions_.rows(); }

 private:
  Tensor positions_;  // [max_positions, d]
  std::vector<TransformerEncoderLayer> layers_;
};

// Post-norm decoder layer: causal self-attention, cross-attention over
// memory, feed-forward.
class TransformerDecoderLayer {
 public:
  TransformerDecoderLayer() = default;
  TransformerDecoderLayer(ParameterStore& store, const std::string& name, std::size_t dim,
                          std::size_t heads, std::size_t ffn_dim, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& memory) const;

 private:
  MultiHeadAttention self_attn_, cross_attn_;
  LayerNorm norm1_, norm2_, norm3_;
  FeedForward ffn_;
};

}  // namespace spot::nn
