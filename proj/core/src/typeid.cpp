#include "spot/typeid.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spot/error.hpp"
#include "spot/model_io.hpp"
#include "spot/nn/checkpoint.hpp"
#include "spot/nn/ops.hpp"
#include "spot/nn/optim.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {
constexpr std::size_t kMaxUtterancePositions = 64;

std::string_view mode_name(ContextMode m) {
  return m == ContextMode::TrainableSmall ? "trainable-small" : "external-frozen";
}
}  // namespace

std::map<std::string, std::vector<std::size_t>> speaker_partition(const TypedInstance& instance) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < instance.context.size(); ++i) out[instance.context[i].speaker_id].push_back(i);
  out[instance.target.speaker_id].push_back(instance.context.size());
  return out;
}

ContextEncoder ContextEncoder::external(std::unordered_map<std::string, std::vector<double>> vectors) {
  ContextEncoder enc;
  enc.mode_ = ContextMode::ExternalFrozen;
  for (const auto& [id, v] : vectors) {
    if (v.empty()) throw DataError("context vector for " + id + " is empty");
    if (enc.dim_ == 0) enc.dim_ = v.size();
    if (v.size() != enc.dim_) throw DataError("context vector for " + id + " has a different dimension");
  }
  enc.vectors_ = std::move(vectors);
  return enc;
}

ContextEncoder ContextEncoder::load_external(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      vectors[j.at("instance").get<std::string>()] = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return external(std::move(vectors));
}

const std::vector<double>& ContextEncoder::lookup(const std::string& instance_id) const {
  auto it = vectors_.find(instance_id);
  if (it == vectors_.end()) throw DataError("no external context vector for instance " + instance_id);
  return it->second;
}

TypeIdModel::TypeIdModel(nn::EncoderConfig config, Vocabulary vocab, TypeIdOptions options)
    : config_(config), vocab_(std::move(vocab)), options_(options) {
  config_.vocab_size = vocab_.size();
  config_.validate();
  const std::size_t e = config_.embed_dim, h = config_.hidden_dim, s = 2 * h;
  if (s % config_.num_heads != 0) throw UsageError("typeid: 2*hidden_dim must be divisible by num_heads");
  std::size_t ctx_dim = 0;
  if (!options_.disable_pretrained_context) {
    if (options_.context_mode == ContextMode::ExternalFrozen) {
      if (options_.external_context_dim == 0) throw UsageError("typeid: external context needs its dimension");
      ctx_dim = options_.external_context_dim;
    } else {
      ctx_dim = e;
    }
  }
  Rng rng(config_.seed);
  embedding_ = nn::Embedding(store_, "embedding", config_.vocab_size, e, rng);
  gru_u_ = nn::BiGru(store_, "gru_u", e, h, rng);
  dialogue_encoder_ = nn::TransformerEncoder(store_, "t_d", s, config_.num_heads, s, config_.num_layers,
                                             kMaxUtterancePositions, rng);
  if (!options_.disable_speaker_module) {
    speaker_encoder_ = nn::TransformerEncoder(store_, "t_s", s, config_.num_heads, s, config_.num_layers,
                                              kMaxUtterancePositions, rng);
    sar_ = nn::AdditiveAttention(store_, "attn/sar", s, s, h, rng);
  }
  car_ = nn::AdditiveAttention(store_, "attn/car", s, s, h, rng);
  gar_ = nn::AdditiveAttention(store_, "attn/gar", s, s, h, rng);
  if (!options_.disable_pretrained_context && options_.context_mode == ContextMode::TrainableSmall) {
    context_embedding_ = nn::Embedding(store_, "context/embedding", config_.vocab_size, e, rng);
    context_proj_ = nn::Linear(store_, "context/proj", e, e, rng);
  }
  fusion_ = nn::Linear(store_, "fusion", s + ctx_dim, e, rng);
  head_ = nn::Linear(store_, "head", e, kNumPersonaTypes, rng);
}

void TypeIdModel::set_boundaries(BoundaryModel boundaries) {
  if (boundaries.dim() != representation_dim() || boundaries.num_classes() != kNumPersonaTypes) {
    throw UsageError("typeid: boundaries must be [5, " + std::to_string(representation_dim()) + "]");
  }
  boundaries_ = std::move(boundaries);
}

std::vector<TokenId> TypeIdModel::encode(const std::string& text) const {
  auto ids = vocab_.encode(text);
  if (ids.size() > config_.max_sequence_length) ids.resize(config_.max_sequence_length);
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  return ids;
}

TypeIdTrace TypeIdModel::trace(const ContextEncoder& context, const TypedInstance& instance,
                               Rng* dropout_rng) const {
  const bool want_context = !options_.disable_pretrained_context;
  if (want_context && context.mode() != options_.context_mode) {
    throw UsageError(std::string("typeid: model expects a ") + std::string(mode_name(options_.context_mode)) +
                     " context encoder");
  }
  std::vector<const Utterance*> utts;
  for (const auto& u : instance.context) utts.push_back(&u);
  utts.push_back(&instance.target);
  const std::size_t n = utts.size(), target = n - 1;

  TypeIdTrace t;
  std::vector<nn::Tensor> summaries;
  std::vector<TokenId> all_tokens;
  for (const auto* u : utts) {
    const auto ids = encode(u->text);
    all_tokens.insert(all_tokens.end(), ids.begin(), ids.end());
    auto x = embedding_(ids);
    if (dropout_rng) x = nn::dropout(x, config_.dropout_rate, *dropout_rng, true);
    summaries.push_back(gru_u_(x).summary);
  }
  t.utterance_summaries = nn::concat_rows(summaries);
  t.dialogue_states = dialogue_encoder_(t.utterance_summaries);
  const auto query = nn::row(t.dialogue_states, target);

  t.car = car_(query, t.dialogue_states, t.dialogue_states);
  if (!options_.disable_speaker_module) {
    // Only the target speaker's partition feeds H_SAR; T_S is shared, so the
    // other partitions would not change the result.
    const auto parts = speaker_partition(instance);
    const auto& mine = parts.at(instance.target.speaker_id);
    t.speaker_states = speaker_encoder_(nn::gather_rows(t.dialogue_states, mine));
    t.sar = sar_(query, t.speaker_states, t.speaker_states);
    const std::vector<nn::Tensor> pair{t.sar->context, t.car.context};
    const auto keys = nn::concat_rows(pair);
    t.gar = gar_(query, keys, keys);
  } else {
    const std::vector<nn::Tensor> one{t.car.context};
    const auto keys = nn::concat_rows(one);
    t.gar = gar_(query, keys, keys);
  }

  nn::Tensor fused = t.gar.context;
  if (want_context) {
    if (options_.context_mode == ContextMode::TrainableSmall) {
      auto x = context_embedding_(all_tokens);
      if (dropout_rng) x = nn::dropout(x, config_.dropout_rate, *dropout_rng, true);
      t.context = nn::tanh(context_proj_(nn::mean_rows(x)));
    } else {
      const auto& v = context.lookup(instance.id());
      if (v.size() != options_.external_context_dim) {
        throw UsageError("typeid: external context dimension " + std::to_string(v.size()) +
                         " differs from the model's " + std::to_string(options_.external_context_dim));
      }
      t.context = nn::Tensor::from({v.size()}, v);
    }
    const std::vector<nn::Tensor> parts{t.gar.context, *t.context};
    fused = nn::reshape(nn::concat_cols(parts), {t.gar.context.size() + t.context->size()});
  }
  t.z = fusion_(fused);
  return t;
}

namespace {

void save_boundaries(const BoundaryModel& b, const std::filesystem::path& path) {
  nn::ParameterStore store;
  store.create_constant("centroids", b.centroids.shape(), 0.0);
  store.create_constant("raw_radii", b.raw_radii.shape(), 0.0);
  auto c = store.get("centroids");
  auto r = store.get("raw_radii");
  std::ranges::copy(b.centroids.values(), c.mutable_values().begin());
  std::ranges::copy(b.raw_radii.values(), r.mutable_values().begin());
  nn::save_checkpoint(store, path);
}

BoundaryModel load_boundaries(std::size_t classes, std::size_t dim, const std::filesystem::path& path) {
  nn::ParameterStore store;
  store.create_constant("centroids", {classes, dim}, 0.0);
  store.create_constant("raw_radii", {classes}, 0.0);
  nn::load_checkpoint(store, path);
  const auto& c = store.get("centroids");
  const auto& r = store.get("raw_radii");
  BoundaryModel b;
  b.centroids = nn::Tensor::from(c.shape(), {c.values().begin(), c.values().end()});
  b.raw_radii = nn::Tensor::from(r.shape(), {r.values().begin(), r.values().end()});
  return b;
}

}  // namespace

void TypeIdModel::save(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  nn::save_checkpoint(store_, directory / "typeid.ckpt");
  vocab_.save(directory / "typeid.vocab");
  ModelSidecar side;
  write_encoder_config(side, config_);
  side.set("disable_speaker_module", options_.disable_speaker_module);
  side.set("disable_pretrained_context", options_.disable_pretrained_context);
  side.set("context_mode", std::string(mode_name(options_.context_mode)));
  side.set("external_context_dim", static_cast<std::uint64_t>(options_.external_context_dim));
  side.set("has_boundaries", boundaries_.has_value());
  side.save(directory / "typeid.cfg");
  if (boundaries_) save_boundaries(*boundaries_, directory / "boundary.ckpt");
}

TypeIdModel TypeIdModel::load(const std::filesystem::path& directory) {
  const auto side = ModelSidecar::load(directory / "typeid.cfg");
  TypeIdOptions opts;
  opts.disable_speaker_module = side.get_bool("disable_speaker_module");
  opts.disable_pretrained_context = side.get_bool("disable_pretrained_context");
  const auto& mode = side.get("context_mode");
  if (mode == "trainable-small") {
    opts.context_mode = ContextMode::TrainableSmall;
  } else if (mode == "external-frozen") {
    opts.context_mode = ContextMode::ExternalFrozen;
  } else {
    throw DataError("typeid.cfg: unknown context_mode " + mode);
  }
  opts.external_context_dim = side.get_uint("external_context_dim");
  TypeIdModel model(read_encoder_config(side), Vocabulary::load(directory / "typeid.vocab"), opts);
  nn::load_checkpoint(model.store_, directory / "typeid.ckpt");
  if (side.get_bool("has_boundaries")) {
    model.set_boundaries(load_boundaries(kNumPersonaTypes, model.representation_dim(),
                                         directory / "boundary.ckpt"));
  }
  return model;
}

nn::Tensor typeid_representation(const TypeIdModel& model, const ContextEncoder& context,
                                 const TypedInstance& instance) {
  return model.trace(context, instance).z;
}

PersonaType predict_instance_type(const TypeIdModel& model, const ContextEncoder& context,
                                  const TypedInstance& instance) {
  if (!model.boundaries()) throw UsageError("typeid: model has no fitted boundaries");
  nn::NoGradGuard guard;
  const auto z = typeid_representation(model, context, instance);
  return predict_type(z.values(), *model.boundaries());
}

Vocabulary build_instance_vocabulary(const std::vector<TypedInstance>& instances) {
  Vocabulary vocab;
  for (const auto& inst : instances) {
    for (const auto& u : inst.context)
      for (const auto& t : tokenize(u.text)) vocab.add(t);
    for (const auto& t : tokenize(inst.target.text)) vocab.add(t);
  }
  return vocab;
}

TypeIdTrainResult train_typeid(const std::vector<TypedInstance>& instances, nn::EncoderConfig encoder,
                               TypeIdOptions options, const ContextEncoder& context,
                               const TypeIdTrainConfig& config) {
  if (instances.empty()) throw DataError("train_typeid: no training instances");
  std::vector<std::size_t> labels;
  std::array<std::size_t, kNumPersonaTypes> support{};
  for (const auto& inst : instances) {
    if (!inst.gold_type) throw DataError("train_typeid: instance " + inst.id() + " has no gold type");
    labels.push_back(index_of(*inst.gold_type));
    ++support[labels.back()];
  }
  for (auto t : kAllPersonaTypes) {
    if (support[index_of(t)] == 0) {
      throw DataError("train_typeid: persona type '" + std::string(to_string(t)) +
                      "' has no training instance");
    }
  }
  if (options.context_mode == ContextMode::ExternalFrozen && options.external_context_dim == 0) {
    options.external_context_dim = context.dim();
  }
  encoder.seed = config.seed;
  TypeIdTrainResult result{.model = TypeIdModel(encoder, build_instance_vocabulary(instances), options)};
  auto& model = result.model;

  std::vector<nn::Tensor> params;
  for (const auto& [name, t] : model.parameters().all()) params.push_back(t);
  nn::Adam adam(params, {.learning_rate = config.learning_rate, .clip_norm = config.clip_norm});
  Rng rng(config.seed);
  const bool use_dropout = model.config().dropout_rate > 0.0;

  auto full_loss = [&] {
    nn::NoGradGuard guard;
    std::vector<nn::Tensor> zs;
    for (const auto& inst : instances) zs.push_back(typeid_representation(model, context, inst));
    return nn::cross_entropy(model.head(nn::concat_rows(zs)), labels).item();
  };
  result.initial_loss = full_loss();

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<nn::Tensor> zs;
      std::vector<std::size_t> y;
      for (std::size_t i = start; i < end; ++i) {
        zs.push_back(model.trace(context, instances[order[i]], use_dropout ? &rng : nullptr).z);
        y.push_back(labels[order[i]]);
      }
      adam.zero_grad();
      auto loss = nn::cross_entropy(model.head(nn::concat_rows(zs)), y);
      loss.backward();
      adam.step();
      total += loss.item() * static_cast<double>(y.size());
    }
    result.epoch_losses.push_back(total / static_cast<double>(instances.size()));
  }
  model.parameters().zero_grad();

  std::vector<std::vector<double>> reps;
  {
    nn::NoGradGuard guard;
    for (const auto& inst : instances) {
      const auto z = typeid_representation(model, context, inst);
      reps.emplace_back(z.values().begin(), z.values().end());
    }
  }
  auto boundaries = fit_boundaries(reps, labels, kNumPersonaTypes, config.boundary);
  {
    nn::NoGradGuard guard;
    std::vector<double> flat;
    for (const auto& r : reps) flat.insert(flat.end(), r.begin(), r.end());
    result.boundary_loss = boundary_loss(nn::Tensor::from({reps.size(), reps[0].size()}, std::move(flat)), labels,
                                         boundaries.centroids, boundaries.raw_radii)
                               .item();
  }
  model.set_boundaries(std::move(boundaries));
  return result;
}

}  // namespace spot
