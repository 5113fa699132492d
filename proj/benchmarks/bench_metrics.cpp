#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "spot/boundary.hpp"
#include "spot/corpus.hpp"
#include "spot/metrics.hpp"
#include "spot/rng.hpp"
#include "spot/smote.hpp"

using namespace spot;

namespace {

std::string random_sentence(Rng& rng, std::size_t words) {
  static const std::vector<std::string> lexicon = {"i", "my", "love", "work", "as", "a", "nurse", "the", "city",
                                                   "sister", "pizza", "jazz", "old", "is", "am", "so"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) out += (i ? " " : "") + lexicon[rng.index(lexicon.size())];
  return out;
}

void BM_ScoreGeneration(benchmark::State& state) {
  Rng rng(1);
  const auto words = static_cast<std::size_t>(state.range(0));
  const auto cand = random_sentence(rng, words);
  const auto ref = random_sentence(rng, words);
  for (auto _ : state) benchmark::DoNotOptimize(score_generation(cand, ref));
}
BENCHMARK(BM_ScoreGeneration)->Arg(4)->Arg(16)->Arg(64);

void BM_KrippendorffAlpha(benchmark::State& state) {
  Rng rng(2);
  AnnotationSet set;
  const auto items = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < items; ++i) {
    set.item_ids.push_back(std::to_string(i));
    for (const char* a : {"a", "b", "c"}) set.labels[a].emplace_back(std::to_string(rng.index(5)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(krippendorff_alpha(set));
}
BENCHMARK(BM_KrippendorffAlpha)->Arg(100)->Arg(1000);

void BM_Smote(benchmark::State& state) {
  Rng rng(3);
  std::vector<FeaturePoint> pts;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n; ++i) {
    FeaturePoint p;
    p.label = i % 10 == 0 ? 1 : 0;
    for (int j = 0; j < 64; ++j) p.vector.push_back(rng.normal());
    pts.push_back(std::move(p));
  }
  for (auto _ : state) {
    Rng draw(4);
    benchmark::DoNotOptimize(smote_upsample(pts, 5, 1.0, draw));
  }
}
BENCHMARK(BM_Smote)->Arg(200)->Arg(1000);

void BM_BoundaryLossBackward(benchmark::State& state) {
  Rng rng(5);
  const std::size_t n = 64, d = 32, k = 5;
  std::vector<double> zv(n * d), cv(k * d);
  for (auto& x : zv) x = rng.normal();
  for (auto& x : cv) x = rng.normal();
  std::vector<std::size_t> labels(n);
  for (auto& y : labels) y = rng.index(k);
  const auto z = nn::Tensor::parameter({n, d}, zv);
  const auto c = nn::Tensor::parameter({k, d}, cv);
  const auto raw = nn::Tensor::parameter({k}, std::vector<double>(k, 0.5));
  for (auto _ : state) {
    auto loss = boundary_loss(z, labels, c, raw);
    loss.backward();
  }
}
BENCHMARK(BM_BoundaryLossBackward);

}  // namespace

BENCHMARK_MAIN();
