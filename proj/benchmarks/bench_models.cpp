#include <benchmark/benchmark.h>

#include "spot/corpus.hpp"
#include "spot/discovery.hpp"
#include "spot/typeid.hpp"
#include "spot/valueex.hpp"

using namespace spot;

namespace {

// A 12-utterance, three-speaker dialogue of ordinary length.
Dialogue sample_dialogue() {
  static const char* lines[] = {"hey , how was the trip ?",     "long . i hate flying",
                                "my sister picked me up though", "that is nice of her",
                                "she works as a nurse now",      "oh wow , since when ?",
                                "since march i think",           "i love that for her",
                                "anyway what did you eat ?",     "pizza , as always",
                                "you and your pizza",            "i am who i am"};
  Dialogue d;
  d.id = "bench";
  d.split = Split::Test;
  const char* speakers[] = {"ann", "bo", "cy"};
  for (std::size_t i = 0; i < 12; ++i) {
    Utterance u;
    u.index = i;
    u.speaker_id = speakers[i % 3];
    u.text = lines[i];
    if (i == 4) {
      u.has_persona = true;
      u.persona_type = PersonaType::Occupation;
      u.persona_value = "nurse";
    }
    d.utterances.push_back(u);
  }
  return d;
}

nn::EncoderConfig config() {
  nn::EncoderConfig c;
  c.embed_dim = 32;
  c.hidden_dim = 32;
  c.max_sequence_length = 24;
  return c;
}

void BM_DiscoveryForward(benchmark::State& state) {
  const auto d = sample_dialogue();
  Corpus c;
  c.add(d);
  DiscoveryModel model(config(), build_discovery_vocabulary(c));
  for (auto _ : state) benchmark::DoNotOptimize(discovery_forward(model, d));
}
BENCHMARK(BM_DiscoveryForward)->Unit(benchmark::kMillisecond);

void BM_TypeIdRepresentation(benchmark::State& state) {
  const auto d = sample_dialogue();
  const auto inst = make_instance(d, 4);
  auto cfg = config();
  cfg.hidden_dim = 16;
  TypeIdModel model(cfg, build_instance_vocabulary({inst}));
  const auto ctx = ContextEncoder::trainable();
  for (auto _ : state) benchmark::DoNotOptimize(typeid_representation(model, ctx, inst));
}
BENCHMARK(BM_TypeIdRepresentation)->Unit(benchmark::kMillisecond);

void BM_ValueExGenerate(benchmark::State& state) {
  const auto d = sample_dialogue();
  const auto inst = make_instance(d, 4);
  ValueExOptions opts;
  opts.max_length = 8;
  opts.beam_width = static_cast<std::size_t>(state.range(0));
  ValueExModel model(config(), build_valueex_vocabulary({d}), opts);
  for (auto _ : state) benchmark::DoNotOptimize(generate_value(model, inst, d));
}
BENCHMARK(BM_ValueExGenerate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
