#include "spot/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spot/error.hpp"
#include "spot/nn/ops.hpp"
#include "spot/rng.hpp"

namespace spot::nn {

void EncoderConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || hidden_dim == 0 || num_layers == 0 || num_heads == 0 ||
      max_sequence_length == 0) {
    throw UsageError("encoder dimensions must all be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw UsageError("embed_dim (" + std::to_string(embed_dim) + ") must be divisible by num_heads (" +
                     std::to_string(num_heads) + ")");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout_rate must lie in [0, 1)");
  }
}

Tensor ParameterStore::create(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  if (params_.contains(name)) throw UsageError("duplicate parameter name: " + name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(element_count(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  auto t = Tensor::parameter(std::move(shape), std::move(values));
  params_.emplace(name, t);
  return t;
}

Tensor ParameterStore::create_constant(const std::string& name, Shape shape, double value) {
  if (params_.contains(name)) throw UsageError("duplicate parameter name: " + name);
  const auto n = element_count(shape);
  auto t = Tensor::parameter(std::move(shape), std::vector<double>(n, value));
  params_.emplace(name, t);
  return t;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

std::vector<Tensor> ParameterStore::with_prefix(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_)
    if (name.starts_with(prefix)) out.push_back(t);
  return out;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void ParameterStore::assign(const ParameterStore& other) {
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape()) throw UsageError("shape mismatch assigning " + name);
    std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
  }
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, bool bias)
    : weight_(store.create(name + "/w", {in, out}, in, rng)) {
  if (bias) bias_ = store.create_constant(name + "/b", {out}, 0.0);
}

Tensor Linear::operator()(const Tensor& x) const {
  auto y = matmul(x, weight_);
  return bias_.defined() ? add(y, bias_) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim)
    : gain_(store.create_constant(name + "/gain", {dim}, 1.0)),
      bias_(store.create_constant(name + "/bias", {dim}, 0.0)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gain_, bias_); }

Embedding::Embedding(ParameterStore& store, const std::string& name, std::size_t count,
                     std::size_t dim, Rng& rng)
    : table_(store.create(name, {count, dim}, dim, rng)) {}

Tensor Embedding::operator()(std::span<const std::int32_t> ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table_.rows()) {
      throw UsageError("token id " + std::to_string(id) + " outside embedding table");
    }
    rows.push_back(static_cast<std::size_t>(id));
  }
  return gather_rows(table_, rows);
}

AdditiveAttention::AdditiveAttention(ParameterStore& store, const std::string& name,
                                     std::size_t query_dim, std::size_t key_dim,
                                     std::size_t hidden_dim, Rng& rng)
    : query_proj_(store, name + "/query", query_dim, hidden_dim, rng),
      key_proj_(store, name + "/key", key_dim, hidden_dim, rng, false),
      score_(store.create(name + "/score", {hidden_dim, 1}, hidden_dim, rng)) {}

AttentionResult AdditiveAttention::operator()(const Tensor& query, const Tensor& keys,
                                              const Tensor& values,
                                              std::span<const std::uint8_t> mask) const {
  if (query.size() != query_proj_.in_dim()) {
    throw UsageError("attention: query width " + std::to_string(query.size()) + ", expected " +
                     std::to_string(query_proj_.in_dim()));
  }
  if (keys.cols() != key_proj_.in_dim()) throw UsageError("attention: key width mismatch");
  const std::size_t length = keys.rows();
  if (values.rows() != length) throw UsageError("attention: keys and values differ in length");
  if (!mask.empty()) {
    if (mask.size() != length) throw UsageError("attention: mask length mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
      throw UsageError("attention: every position is masked");
    }
  }
  auto hidden = tanh(add(key_proj_(reshape(keys, {length, keys.cols()})), query_proj_(query)));
  auto scores = reshape(matmul(hidden, score_), {1, length});
  auto weights = reshape(softmax_rows(scores, mask), {length});
  auto context = matmul(weights, reshape(values, {length, values.cols()}));
  return {context, weights};
}

GruCell::GruCell(ParameterStore& store, const std::string& name, std::size_t input_dim,
                 std::size_t hidden_dim, Rng& rng)
    : input_(store.create(name + "/w_input", {input_dim, 3 * hidden_dim}, input_dim, rng)),
      recurrent_(store.create(name + "/w_recurrent", {hidden_dim, 3 * hidden_dim}, hidden_dim, rng)),
      bias_(store.create_constant(name + "/b", {3 * hidden_dim}, 0.0)) {}

Tensor GruCell::run(const Tensor& inputs) const {
  const std::size_t h = hidden_dim();
  const std::size_t length = inputs.rows();
  auto projected = add(matmul(reshape(inputs, {length, inputs.cols()}), input_), bias_);
  Tensor state = Tensor::zeros({h});
  std::vector<Tensor> states;
  states.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    auto x = row(projected, t);
    auto r_h = matmul(state, recurrent_);
    auto z = sigmoid(add(slice_cols(x, 0, h), slice_cols(r_h, 0, h)));
    auto r = sigmoid(add(slice_cols(x, h, h), slice_cols(r_h, h, h)));
    auto n = tanh(add(slice_cols(x, 2 * h, h), mul(r, slice_cols(r_h, 2 * h, h))));
    state = add(n, mul(z, sub(state, n)));
    states.push_back(state);
  }
  return concat_rows(states);
}

BiGru::BiGru(ParameterStore& store, const std::string& name, std::size_t input_dim,
             std::size_t hidden_dim, Rng& rng)
    : forward_(store, name + "/fwd", input_dim, hidden_dim, rng),
      backward_(store, name + "/bwd", input_dim, hidden_dim, rng) {}

namespace {
std::vector<std::size_t> reversed_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = n - 1 - i;
  return idx;
}
}  // namespace

Tensor BiGru::backward_states(const Tensor& tokens) const {
  const auto rev = reversed_indices(tokens.rows());
  return gather_rows(backward_.run(gather_rows(tokens, rev)), rev);
}

BiGruOutput BiGru::operator()(const Tensor& tokens) const {
  if (!tokens.defined() || tokens.size() == 0) throw UsageError("bigru: empty sequence");
  const std::size_t length = tokens.rows();
  auto fwd = forward_.run(tokens);
  auto bwd = backward_states(tokens);
  std::vector<Tensor> parts{fwd, bwd};
  std::vector<Tensor> ends{row(fwd, length - 1), row(bwd, 0)};
  return {concat_cols(parts), concat_cols(ends)};
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name,
                                       std::size_t dim, std::size_t heads, Rng& rng)
    : heads_(heads),
      q_(store, name + "/q", dim, dim, rng),
      k_(store, name + "/k", dim, dim, rng),
      v_(store, name + "/v", dim, dim, rng),
      o_(store, name + "/o", dim, dim, rng) {
  if (heads == 0 || dim % heads != 0) throw UsageError("attention heads must divide width");
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& memory,
                                      std::span<const std::uint8_t> key_mask,
                                      std::span<const std::uint8_t> query_mask, bool causal) const {
  const std::size_t lq = queries.rows(), lk = memory.rows();
  const std::size_t dim = q_.out_dim(), dh = dim / heads_;
  if (!key_mask.empty() && key_mask.size() != lk) throw UsageError("key mask length mismatch");
  if (!query_mask.empty() && query_mask.size() != lq) throw UsageError("query mask length mismatch");

  std::vector<std::uint8_t> allowed;
  if (!key_mask.empty() || !query_mask.empty() || causal) {
    allowed.assign(lq * lk, 1);
    for (std::size_t i = 0; i < lq; ++i)
      for (std::size_t j = 0; j < lk; ++j) {
        const bool ok = (key_mask.empty() || key_mask[j]) && (query_mask.empty() || query_mask[i]) &&
                        (!causal || j <= i);
        allowed[i * lk + j] = ok ? 1 : 0;
      }
  }

  auto q = q_(reshape(queries, {lq, queries.cols()}));
  auto k = k_(reshape(memory, {lk, memory.cols()}));
  auto v = v_(reshape(memory, {lk, memory.cols()}));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    auto probs = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt), allowed);
    heads.push_back(matmul(probs, vh));
  }
  return o_(heads_ == 1 ? heads[0] : concat_cols(heads));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t dim,
                         std::size_t hidden, Rng& rng)
    : in_(store, name + "/in", dim, hidden, rng), out_(store, name + "/out", hidden, dim, rng) {}

Tensor FeedForward::operator()(const Tensor& x) const { return out_(relu(in_(x))); }

TransformerEncoderLayer::TransformerEncoderLayer(ParameterStore& store, const std::string& name,
                                                 std::size_t dim, std::size_t heads,
                                                 std::size_t ffn_dim, Rng& rng)
    : attn_(store, name + "/attn", dim, heads, rng),
      norm1_(store, name + "/norm1", dim),
      norm2_(store, name + "/norm2", dim),
      ffn_(store, name + "/ffn", dim, ffn_dim, rng) {}

Tensor TransformerEncoderLayer::operator()(const Tensor& x, std::span<const std::uint8_t> mask) const {
  auto h = norm1_(add(x, attn_(x, x, mask, mask)));
  return norm2_(add(h, ffn_(h)));
}

TransformerEncoder::TransformerEncoder(ParameterStore& store, const std::string& name,
                                       std::size_t dim, std::size_t heads, std::size_t ffn_dim,
                                       std::size_t layers, std::size_t max_positions, Rng& rng)
    : positions_(store.create(name + "/positions", {max_positions, dim}, dim, rng)) {
  for (std::size_t i = 0; i < layers; ++i) {
    layers_.emplace_back(store, name + "/layer" + std::to_string(i), dim, heads, ffn_dim, rng);
  }
}

Tensor TransformerEncoder::operator()(const Tensor& seq, std::span<const std::uint8_t> mask,
                                      bool use_positional) const {
  const std::size_t length = seq.rows();
  if (seq.cols() != positions_.cols()) {
    throw UsageError("transformer: input width " + std::to_string(seq.cols()) + ", expected " +
                     std::to_string(positions_.cols()));
  }
  if (!mask.empty()) {
    if (mask.size() != length) throw UsageError("transformer: mask length mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
      throw UsageError("transformer: every position is masked");
    }
  }
  Tensor x = reshape(seq, {length, seq.cols()});
  if (use_positional) {
    std::vector<std::size_t> idx(length);
    for (std::size_t i = 0; i < length; ++i) idx[i] = std::min(i, positions_.rows() - 1);
    x = add(x, gather_rows(positions_, idx));
  }
  for (const auto& layer : layers_) x = layer(x, mask);
  return x;
}

TransformerDecoderLayer::TransformerDecoderLayer(ParameterStore& store, const std::string& name,
                                                 std::size_t dim, std::size_t heads,
                                                 std::size_t ffn_dim, Rng& rng)
    : self_attn_(store, name + "/self_attn", dim, heads, rng),
      cross_attn_(store, name + "/cross_attn", dim, heads, rng),
      norm1_(store, name + "/norm1", dim),
      norm2_(store, name + "/norm2", dim),
      norm3_(store, name + "/norm3", dim),
      ffn_(store, name + "/ffn", dim, ffn_dim, rng) {}

Tensor TransformerDecoderLayer::operator()(const Tensor& x, const Tensor& memory) const {
  auto h = norm1_(add(x, self_attn_(x, x, {}, {}, true)));
  h = norm2_(add(h, cross_attn_(h, memory)));
  return norm3_(add(h, ffn_(h)));
}

}  // namespace spot::nn
