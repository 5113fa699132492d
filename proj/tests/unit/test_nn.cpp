#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "spot/error.hpp"
#include "spot/nn/checkpoint.hpp"
#include "spot/nn/layers.hpp"
#include "spot/nn/ops.hpp"
#include "spot/nn/optim.hpp"
#include "spot/rng.hpp"
#include "synthetic.hpp"

using namespace spot;
using namespace spot::nn;
using spot::test::check_gradient;

namespace {

Tensor random_leaf(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor random_const(Shape shape, Rng& rng) {
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::from(std::move(shape), std::move(v));
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Tensor probe(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

Tensor reverse_rows(const Tensor& t) {
  std::vector<std::size_t> idx(t.rows());
  std::iota(idx.rbegin(), idx.rend(), 0);
  return gather_rows(t, idx);
}

void expect_grad_ok(const std::function<Tensor()>& loss, const Tensor& leaf, const char* what) {
  const auto r = check_gradient(loss, leaf);
  EXPECT_TRUE(r.passed()) << what << ": " << r.describe();
}

}  // namespace

TEST(Tensor, ShapeAndValueCount) {
  const auto t = Tensor::zeros({3, 4});
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_THROW(Tensor::from({2, 2}, {1.0, 2.0}), UsageError);
  EXPECT_THROW(Tensor::zeros({0}), UsageError);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  auto w = Tensor::parameter({2}, {1.0, 2.0});
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(sum(w).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(sum(w).requires_grad());
}

TEST(Ops, ElementwiseGradients) {
  Rng rng(1);
  auto a = random_leaf({3, 4}, rng);
  auto b = random_leaf({4}, rng);
  const auto w = random_const({3, 4}, rng);
  expect_grad_ok([&] { return probe(tanh(add(a, b)), w); }, a, "tanh(a+b) a");
  expect_grad_ok([&] { return probe(tanh(add(a, b)), w); }, b, "tanh(a+b) b");
  expect_grad_ok([&] { return probe(sigmoid(mul(a, a)), w); }, a, "sigmoid(a*a)");
  expect_grad_ok([&] { return probe(softplus(sub(a, b)), w); }, b, "softplus(a-b)");
  expect_grad_ok([&] { return probe(one_minus(scale(a, 3.0)), w); }, a, "1-3a");
}

TEST(Ops, MatmulAndReshapeGradients) {
  Rng rng(2);
  auto a = random_leaf({3, 5}, rng);
  auto b = random_leaf({5, 2}, rng);
  const auto w = random_const({3, 2}, rng);
  expect_grad_ok([&] { return probe(matmul(a, b), w); }, a, "matmul a");
  expect_grad_ok([&] { return probe(matmul(a, b), w); }, b, "matmul b");
  const auto wt = random_const({5, 3}, rng);
  expect_grad_ok([&] { return probe(transpose(a), wt); }, a, "transpose");
  const auto w15 = random_const({15}, rng);
  expect_grad_ok([&] { return probe(reshape(a, {15}), w15); }, a, "reshape");
}

TEST(Ops, RowOpsGradients) {
  Rng rng(3);
  auto a = random_leaf({4, 3}, rng);
  const std::vector<std::size_t> idx = {2, 0, 2};
  const auto w33 = random_const({3, 3}, rng);
  const auto w4 = random_const({4}, rng);
  const auto w3 = random_const({3}, rng);
  const auto w42 = random_const({4, 2}, rng);
  expect_grad_ok([&] { return probe(gather_rows(a, idx), w33); }, a, "gather_rows");
  expect_grad_ok([&] { return probe(row_norms(a), w4); }, a, "row_norms");
  const std::vector<std::uint8_t> mask = {1, 0, 1, 1};
  expect_grad_ok([&] { return probe(mean_rows(a, mask), w3); }, a, "mean_rows");
  expect_grad_ok([&] { return probe(slice_cols(a, 1, 2), w42); }, a, "slice_cols");
  expect_grad_ok([&] { return probe(row(a, 1), w3); }, a, "row");
}

TEST(Ops, ConcatGradients) {
  Rng rng(4);
  auto a = random_leaf({2, 3}, rng);
  auto b = random_leaf({2, 2}, rng);
  auto c = random_leaf({3}, rng);
  const auto w = random_const({2, 5}, rng);
  const auto wr = random_const({3, 3}, rng);
  expect_grad_ok([&] { return probe(concat_cols(std::vector<Tensor>{a, b}), w); }, b, "concat_cols");
  expect_grad_ok([&] { return probe(concat_rows(std::vector<Tensor>{a, c}), wr); }, c, "concat_rows");
}

TEST(Ops, SoftmaxAndLayerNormGradients) {
  Rng rng(5);
  auto a = random_leaf({3, 4}, rng, 2.0);
  const auto w = random_const({3, 4}, rng);
  expect_grad_ok([&] { return probe(softmax_rows(a), w); }, a, "softmax");
  const std::vector<std::uint8_t> allowed = {1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1};
  expect_grad_ok([&] { return probe(softmax_rows(a, allowed), w); }, a, "masked softmax");
  expect_grad_ok([&] { return probe(log_softmax_rows(a), w); }, a, "log_softmax");
  auto gain = random_leaf({4}, rng);
  auto bias = random_leaf({4}, rng);
  expect_grad_ok([&] { return probe(layer_norm(a, gain, bias), w); }, a, "layer_norm x");
  expect_grad_ok([&] { return probe(layer_norm(a, gain, bias), w); }, gain, "layer_norm gain");
}

TEST(Ops, MaskedSoftmaxIsExactlyZero) {
  const auto a = Tensor::from({1, 3}, {0.3, -1.0, 2.0});
  const std::vector<std::uint8_t> allowed = {1, 0, 1};
  const auto p = softmax_rows(a, allowed);
  EXPECT_EQ(p.at(1), 0.0);
  EXPECT_NEAR(p.at(0) + p.at(2), 1.0, 1e-12);
}

TEST(Ops, CrossEntropyGradientAndValue) {
  Rng rng(6);
  auto logits = random_leaf({4, 5}, rng, 2.0);
  const std::vector<std::size_t> labels = {0, 3, 4, 3};
  expect_grad_ok([&] { return cross_entropy(logits, labels); }, logits, "cross_entropy");

  const auto two = Tensor::from({1, 2}, {0.0, 0.0});
  const std::vector<std::size_t> y = {1};
  EXPECT_NEAR(cross_entropy(two, y).item(), std::log(2.0), 1e-12);
  const std::vector<std::size_t> bad = {5};
  EXPECT_THROW(cross_entropy(two, bad), UsageError);
}

TEST(Ops, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), UsageError);
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), UsageError);
}

TEST(Ops, DropoutIdentityWhenOff) {
  Rng rng(7);
  const auto a = random_const({3, 3}, rng);
  const auto b = dropout(a, 0.5, rng, false);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.at(i), b.at(i));
}

TEST(Attention, SingleKeyReturnsItsValue) {
  Rng rng(8);
  ParameterStore store;
  AdditiveAttention attn(store, "a", 4, 4, 3, rng);
  const auto q = random_const({4}, rng);
  const auto k = random_const({1, 4}, rng);
  const auto v = random_const({1, 2}, rng);
  const auto r = attn(q, k, v);
  EXPECT_DOUBLE_EQ(r.weights.at(0), 1.0);
  EXPECT_NEAR(r.context.at(0), v.at(0), 1e-15);
  EXPECT_NEAR(r.context.at(1), v.at(1), 1e-15);
}

TEST(Attention, IdenticalKeysSplitEvenly) {
  Rng rng(9);
  ParameterStore store;
  AdditiveAttention attn(store, "a", 3, 3, 4, rng);
  const auto q = random_const({3}, rng);
  const auto k = Tensor::from({2, 3}, {0.1, 0.2, 0.3, 0.1, 0.2, 0.3});
  const auto v = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 6.0});
  const auto r = attn(q, k, v);
  EXPECT_NEAR(r.weights.at(0), 0.5, 1e-12);
  EXPECT_NEAR(r.weights.at(1), 0.5, 1e-12);
  EXPECT_NEAR(r.context.at(0), 2.0, 1e-12);
  EXPECT_NEAR(r.context.at(1), 4.0, 1e-12);
}

TEST(Attention, MaskedWeightsZeroAndSumToOne) {
  Rng rng(10);
  ParameterStore store;
  AdditiveAttention attn(store, "a", 4, 4, 4, rng);
  const auto q = random_const({4}, rng);
  const auto k = random_const({5, 4}, rng);
  const auto v = random_const({5, 3}, rng);
  const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0};
  const auto r = attn(q, k, v, mask);
  double s = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    if (!mask[i]) {
      EXPECT_EQ(r.weights.at(i), 0.0);
    }
    s += r.weights.at(i);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  const std::vector<std::uint8_t> none(5, 0);
  EXPECT_THROW(attn(q, k, v, none), UsageError);
  EXPECT_THROW(attn(random_const({3}, rng), k, v), UsageError);
}

TEST(Attention, GradientCheck) {
  Rng rng(11);
  ParameterStore store;
  AdditiveAttention attn(store, "a", 4, 4, 5, rng);
  auto q = random_leaf({4}, rng);
  auto k = random_leaf({3, 4}, rng);
  auto v = random_leaf({3, 2}, rng);
  const auto w = random_const({2}, rng);
  auto loss = [&] { return probe(attn(q, k, v).context, w); };
  expect_grad_ok(loss, q, "query");
  expect_grad_ok(loss, k, "keys");
  expect_grad_ok(loss, v, "values");
  for (const auto& [name, p] : store.all()) expect_grad_ok(loss, p, name.c_str());
}

TEST(BiGru, ShapeContract) {
  Rng rng(12);
  ParameterStore store;
  BiGru gru(store, "g", 4, 3, rng);
  const auto out = gru(random_const({5, 4}, rng));
  EXPECT_EQ(out.states.shape(), (Shape{5, 6}));
  EXPECT_EQ(out.summary.shape(), (Shape{6}));
  EXPECT_THROW(gru(Tensor()), UsageError);
}

TEST(BiGru, ZeroParametersZeroInputGiveZeroSummary) {
  Rng rng(13);
  ParameterStore store;
  BiGru gru(store, "g", 4, 3, rng);
  for (const auto& [name, p] : store.all()) {
    auto t = p;
    for (auto& x : t.mutable_values()) x = 0.0;
  }
  const auto out = gru(Tensor::zeros({6, 4}));
  for (std::size_t i = 0; i < out.summary.size(); ++i) EXPECT_EQ(out.summary.at(i), 0.0);
}

TEST(BiGru, BackwardEqualsForwardOverReversedInput) {
  Rng rng(14);
  ParameterStore store;
  GruCell cell(store, "cell", 4, 3, rng);
  BiGru gru(cell, cell);
  const auto x = random_const({6, 4}, rng);
  const auto backward = gru.backward_states(x);
  const auto oracle = reverse_rows(cell.run(reverse_rows(x)));
  ASSERT_EQ(backward.shape(), oracle.shape());
  for (std::size_t i = 0; i < backward.size(); ++i) EXPECT_NEAR(backward.at(i), oracle.at(i), 1e-9);
  // summary: final forward state then final backward state (position 0)
  const auto out = gru(x);
  const auto fwd = cell.run(x);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(out.summary.at(j), fwd.at(5, j), 1e-12);
    EXPECT_NEAR(out.summary.at(3 + j), backward.at(0, j), 1e-12);
  }
}

TEST(BiGru, GradientCheck) {
  Rng rng(15);
  ParameterStore store;
  BiGru gru(store, "g", 3, 4, rng);
  auto x = random_leaf({4, 3}, rng);
  const auto w = random_const({4, 8}, rng);
  const auto ws = random_const({8}, rng);
  auto loss = [&] {
    const auto out = gru(x);
    return add(probe(out.states, w), probe(out.summary, ws));
  };
  expect_grad_ok(loss, x, "input");
  for (const auto& [name, p] : store.all()) expect_grad_ok(loss, p, name.c_str());
}

TEST(Transformer, ShapeContract) {
  Rng rng(16);
  ParameterStore store;
  TransformerEncoder enc(store, "t", 16, 2, 32, 1, 8, rng);
  EXPECT_EQ(enc(random_const({7, 16}, rng)).shape(), (Shape{7, 16}));
  // longer than the position table: last row reused
  EXPECT_EQ(enc(random_const({10, 16}, rng)).shape(), (Shape{10, 16}));
}

TEST(Transformer, PermutationEquivariantWithoutPositions) {
  Rng rng(17);
  ParameterStore store;
  TransformerEncoder enc(store, "t", 8, 2, 16, 2, 8, rng);
  const auto x = random_const({5, 8}, rng);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  const auto y = enc(x, {}, false);
  const auto yp = enc(gather_rows(x, perm), {}, false);
  const auto expected = gather_rows(y, perm);
  for (std::size_t i = 0; i < yp.size(); ++i) EXPECT_NEAR(yp.at(i), expected.at(i), 1e-6);
}

TEST(Transformer, MaskedPositionsAreNotAttended) {
  Rng rng(18);
  ParameterStore store;
  TransformerEncoder enc(store, "t", 8, 2, 16, 1, 8, rng);
  auto x = random_const({4, 8}, rng);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  const auto a = enc(x, mask);
  auto x2 = Tensor::from(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
  for (std::size_t j = 0; j < 8; ++j) x2.mutable_values()[2 * 8 + j] += 5.0;
  const auto b = enc(x2, mask);
  for (std::size_t r : {0u, 1u, 3u})
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a.at(r, j), b.at(r, j), 1e-12);
  const std::vector<std::uint8_t> none(4, 0);
  EXPECT_THROW(enc(x, none), UsageError);
}

TEST(Transformer, GradientCheck) {
  Rng rng(19);
  ParameterStore store;
  TransformerEncoderLayer layer(store, "l", 8, 2, 16, rng);
  auto x = random_leaf({3, 8}, rng);
  const auto w = random_const({3, 8}, rng);
  auto loss = [&] { return probe(layer(x), w); };
  expect_grad_ok(loss, x, "input");
  for (const auto& [name, p] : store.all()) expect_grad_ok(loss, p, name.c_str());
}

TEST(Transformer, DecoderGradientCheck) {
  Rng rng(20);
  ParameterStore store;
  TransformerDecoderLayer layer(store, "d", 8, 2, 16, rng);
  auto x = random_leaf({3, 8}, rng);
  auto mem = random_leaf({4, 8}, rng);
  const auto w = random_const({3, 8}, rng);
  auto loss = [&] { return probe(layer(x, mem), w); };
  expect_grad_ok(loss, x, "input");
  expect_grad_ok(loss, mem, "memory");
}

TEST(Transformer, CausalSelfAttentionIgnoresFuture) {
  Rng rng(21);
  ParameterStore store;
  MultiHeadAttention mha(store, "m", 8, 2, rng);
  auto x = random_const({4, 8}, rng);
  const auto a = mha(x, x, {}, {}, true);
  auto x2 = Tensor::from(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
  x2.mutable_values()[3 * 8] += 1.0;
  const auto b = mha(x2, x2, {}, {}, true);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a.at(r, j), b.at(r, j), 1e-12);
}

TEST(Encoder, ConfigValidation) {
  EncoderConfig c;
  c.vocab_size = 10;
  EXPECT_NO_THROW(c.validate());
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), UsageError);
  c.num_heads = 2;
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Adam, ReducesQuadratic) {
  auto w = Tensor::parameter({2}, {3.0, -2.0});
  Adam opt({w}, {.learning_rate = 0.1});
  double first = 0, last = 0;
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    const auto l = sum(mul(w, w));
    if (i == 0) first = l.item();
    last = l.item();
    l.backward();
    opt.step();
  }
  EXPECT_LT(last, first * 1e-3);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(22);
  ParameterStore a;
  TransformerEncoder enc(a, "t", 8, 2, 16, 1, 4, rng);
  const auto dir = test::scratch_dir("ckpt");
  save_checkpoint(a, dir / "a.ckpt");

  Rng other(99);
  ParameterStore b;
  TransformerEncoder enc2(b, "t", 8, 2, 16, 1, 4, other);
  load_checkpoint(b, dir / "a.ckpt");
  for (const auto& [name, t] : a.all()) {
    const auto& u = b.get(name);
    ASSERT_EQ(t.shape(), u.shape());
    for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(t.at(i), u.at(i)) << name;
  }
  save_checkpoint(b, dir / "b.ckpt");
  EXPECT_EQ(test::read_file(dir / "a.ckpt"), test::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, ShapeMismatchIsDataError) {
  Rng rng(23);
  ParameterStore a;
  a.create("w", {2, 3}, 3, rng);
  const auto dir = test::scratch_dir("ckpt-bad");
  save_checkpoint(a, dir / "a.ckpt");
  ParameterStore b;
  b.create("w", {3, 2}, 3, rng);
  EXPECT_THROW(load_checkpoint(b, dir / "a.ckpt"), DataError);
  ParameterStore c;
  c.create("w", {2, 3}, 3, rng);
  c.create("extra", {1}, 1, rng);
  EXPECT_THROW(load_checkpoint(c, dir / "a.ckpt"), DataError);
}
