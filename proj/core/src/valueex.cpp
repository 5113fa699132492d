#include "spot/valueex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "spot/error.hpp"
#include "spot/model_io.hpp"
#include "spot/nn/checkpoint.hpp"
#include "spot/nn/ops.hpp"
#include "spot/nn/optim.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {
// Long contexts keep their most recent tokens, long dialogues their first.
constexpr std::size_t kSequenceFactor = 4;
constexpr std::size_t kMaxDecoderPositions = 32;
constexpr std::size_t kMaxBeamWidth = 4;
}  // namespace

void ValueExOptions::validate() const {
  if (beam_width == 0 || beam_width > kMaxBeamWidth) throw UsageError("valueex: beam_width must be in 1..4");
}

std::string type_control_token(PersonaType type) { return "<type:" + std::string(to_string(type)) + ">"; }

ValueExModel::ValueExModel(nn::EncoderConfig config, Vocabulary vocab, ValueExOptions options)
    : config_(config), vocab_(std::move(vocab)), options_(options) {
  for (auto t : kAllPersonaTypes) vocab_.add(type_control_token(t));
  config_.vocab_size = vocab_.size();
  config_.validate();
  options_.validate();
  Rng rng(config_.seed);
  const auto e = config_.embed_dim;
  embedding_ = nn::Embedding(store_, "embedding", config_.vocab_size, e, rng);
  encoder_ = nn::TransformerEncoder(store_, "encoder", e, config_.num_heads, config_.hidden_dim, config_.num_layers,
                                    kSequenceFactor * config_.max_sequence_length, rng);
  context_target_ = nn::MultiHeadAttention(store_, "context_target", e, config_.num_heads, rng);
  decoder_positions_ = store_.create("decoder/positions", {kMaxDecoderPositions, e}, e, rng);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    decoder_.emplace_back(store_, "decoder/layer" + std::to_string(l), e, config_.num_heads, config_.hidden_dim,
                          rng);
  }
  output_ = nn::Linear(store_, "decoder/output", e, config_.vocab_size, rng);
}

void ValueExModel::set_options(ValueExOptions options) {
  options.validate();
  options_ = options;
}

std::vector<TokenId> ValueExModel::utterance_tokens(const Utterance& u) const {
  auto ids = vocab_.encode(u.speaker_id);
  ids.push_back(vocab_.id(":"));
  auto text = vocab_.encode(u.text);
  if (text.size() > config_.max_sequence_length) text.resize(config_.max_sequence_length);
  ids.insert(ids.end(), text.begin(), text.end());
  return ids;
}

std::vector<TokenId> ValueExModel::context_tokens(const TypedInstance& instance) const {
  std::vector<TokenId> ids;
  for (const auto& u : instance.context) {
    if (!ids.empty()) ids.push_back(Vocabulary::kSep);
    const auto part = utterance_tokens(u);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  const std::size_t cap = kSequenceFactor * config_.max_sequence_length;
  if (ids.size() > cap) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(cap));
  return ids;
}

std::vector<TokenId> ValueExModel::target_tokens(const TypedInstance& instance,
                                                 std::optional<PersonaType> type) const {
  std::vector<TokenId> ids;
  if (options_.type_control) {
    if (!type) type = instance.gold_type;
    if (type) ids.push_back(vocab_.id(type_control_token(*type)));
  }
  const auto part = utterance_tokens(instance.target);
  ids.insert(ids.end(), part.begin(), part.end());
  return ids;
}

std::vector<TokenId> ValueExModel::dialogue_tokens(const Dialogue& dialogue) const {
  std::vector<TokenId> ids;
  for (const auto& u : dialogue.utterances) {
    if (!ids.empty()) ids.push_back(Vocabulary::kSep);
    const auto part = utterance_tokens(u);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  const std::size_t cap = kSequenceFactor * config_.max_sequence_length;
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

std::vector<TokenId> ValueExModel::value_tokens(const std::string& value) const {
  auto ids = vocab_.encode(value);
  if (ids.size() > options_.max_length) ids.resize(options_.max_length);
  return ids;
}

nn::Tensor ValueExModel::embed(std::span<const TokenId> ids, Rng* dropout_rng) const {
  auto x = embedding_(ids);
  if (dropout_rng) x = nn::dropout(x, config_.dropout_rate, *dropout_rng, true);
  return x;
}

nn::Tensor ValueExModel::encode(const TypedInstance& instance, const Dialogue& dialogue,
                                std::optional<PersonaType> type, Rng* dropout_rng) const {
  if (instance.target.text.empty()) throw UsageError("valueex: instance " + instance.id() + " has an empty target");
  if (instance.dialogue_id != dialogue.id || instance.target.index >= dialogue.utterances.size()) {
    throw UsageError("valueex: instance " + instance.id() + " does not belong to dialogue " + dialogue.id);
  }
  const auto target = encoder_(embed(target_tokens(instance, type), dropout_rng));
  const auto ctx_ids = context_tokens(instance);
  // Without context the target attends over its own encoding.
  const auto context = ctx_ids.empty() ? target : encoder_(embed(ctx_ids, dropout_rng));
  const auto attended = context_target_(target, context);
  const auto whole = encoder_(embed(dialogue_tokens(dialogue), dropout_rng));
  const std::vector<nn::Tensor> parts{attended, whole};
  return nn::concat_rows(parts);
}

nn::Tensor ValueExModel::decode_logits(std::span<const TokenId> inputs, const nn::Tensor& memory,
                                       Rng* dropout_rng) const {
  const std::size_t length = inputs.size();
  std::vector<std::size_t> pos(length);
  for (std::size_t i = 0; i < length; ++i) pos[i] = std::min(i, kMaxDecoderPositions - 1);
  auto x = nn::add(nn::reshape(embed(inputs, dropout_rng), {length, config_.embed_dim}),
                   nn::gather_rows(decoder_positions_, pos));
  for (const auto& layer : decoder_) x = layer(x, memory);
  return output_(x);
}

void ValueExModel::save(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  nn::save_checkpoint(store_, directory / "valueex.ckpt");
  vocab_.save(directory / "valueex.vocab");
  ModelSidecar side;
  write_encoder_config(side, config_);
  side.set("max_length", static_cast<std::uint64_t>(options_.max_length));
  side.set("beam_width", static_cast<std::uint64_t>(options_.beam_width));
  side.set("type_control", options_.type_control);
  side.save(directory / "valueex.cfg");
}

ValueExModel ValueExModel::load(const std::filesystem::path& directory) {
  const auto side = ModelSidecar::load(directory / "valueex.cfg");
  ValueExOptions opts;
  opts.max_length = side.get_uint("max_length");
  opts.beam_width = side.get_uint("beam_width");
  opts.type_control = side.get_bool("type_control");
  ValueExModel model(read_encoder_config(side), Vocabulary::load(directory / "valueex.vocab"), opts);
  nn::load_checkpoint(model.store_, directory / "valueex.ckpt");
  return model;
}

nn::Tensor valueex_encode(const ValueExModel& model, const TypedInstance& instance, const Dialogue& dialogue) {
  return model.encode(instance, dialogue);
}

namespace {

std::vector<bool> banned_tokens(const ValueExModel& model) {
  const auto& vocab = model.vocabulary();
  std::vector<bool> banned(vocab.size(), false);
  banned[Vocabulary::kPad] = banned[Vocabulary::kBos] = banned[Vocabulary::kSep] = true;
  for (auto t : kAllPersonaTypes) banned[static_cast<std::size_t>(vocab.id(type_control_token(t)))] = true;
  return banned;
}

// Log-probabilities of the last row of logits.
std::vector<double> last_log_probs(const nn::Tensor& logits) {
  const std::size_t v = logits.cols(), r = logits.rows() - 1;
  std::vector<double> out(v);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, logits.at(r, j));
  double z = 0.0;
  for (std::size_t j = 0; j < v; ++j) z += std::exp(logits.at(r, j) - mx);
  const double lz = mx + std::log(z);
  for (std::size_t j = 0; j < v; ++j) out[j] = logits.at(r, j) - lz;
  return out;
}

struct Hypothesis {
  std::vector<TokenId> tokens;  // begins with the begin marker
  double score = 0.0;
  bool finished = false;
};

}  // namespace

std::string generate_value(const ValueExModel& model, const TypedInstance& instance, const Dialogue& dialogue,
                           std::optional<PersonaType> type) {
  const auto& opts = model.options();
  if (opts.max_length == 0) return "";
  nn::NoGradGuard guard;
  const auto memory = model.encode(instance, dialogue, type);
  const auto banned = banned_tokens(model);

  std::vector<Hypothesis> beam{{{Vocabulary::kBos}, 0.0, false}};
  for (std::size_t step = 0; step < opts.max_length; ++step) {
    std::vector<Hypothesis> next;
    for (const auto& h : beam) {
      if (h.finished) {
        next.push_back(h);
        continue;
      }
      const auto lp = last_log_probs(model.decode_logits(h.tokens, memory));
      // Best candidates for this hypothesis, ties to the lower id.
      std::vector<TokenId> ids;
      for (std::size_t j = 0; j < lp.size(); ++j)
        if (!banned[j]) ids.push_back(static_cast<TokenId>(j));
      const std::size_t keep = std::min(opts.beam_width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                        [&](TokenId a, TokenId b) { return lp[a] > lp[b] || (lp[a] == lp[b] && a < b); });
      for (std::size_t c = 0; c < keep; ++c) {
        Hypothesis n = h;
        n.score += lp[ids[c]];
        if (ids[c] == Vocabulary::kEos) {
          n.finished = true;
        } else {
          n.tokens.push_back(ids[c]);
        }
        next.push_back(std::move(n));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    if (next.size() > opts.beam_width) next.resize(opts.beam_width);
    beam = std::move(next);
    if (std::all_of(beam.begin(), beam.end(), [](const auto& h) { return h.finished; })) break;
  }
  const auto& best = beam.front();
  return model.vocabulary().decode(std::span(best.tokens).subspan(1));
}

DialogueIndex index_dialogues(const std::vector<Dialogue>& dialogues) {
  DialogueIndex index;
  for (const auto& d : dialogues) index[d.id] = &d;
  return index;
}

const Dialogue& lookup_dialogue(const DialogueIndex& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("unknown dialogue " + id);
  return *it->second;
}

Vocabulary build_valueex_vocabulary(const std::vector<Dialogue>& dialogues) {
  Vocabulary vocab;
  vocab.add(":");
  for (const auto& d : dialogues) {
    for (const auto& u : d.utterances) {
      for (const auto& t : tokenize(u.speaker_id)) vocab.add(t);
      for (const auto& t : tokenize(u.text)) vocab.add(t);
      if (u.persona_value)
        for (const auto& t : tokenize(*u.persona_value)) vocab.add(t);
    }
  }
  for (auto t : kAllPersonaTypes) vocab.add(type_control_token(t));
  return vocab;
}

namespace {

struct TeacherPair {
  std::vector<TokenId> inputs;
  std::vector<std::size_t> targets;
};

TeacherPair teacher_pair(const ValueExModel& model, const TypedInstance& inst) {
  if (!inst.gold_value || inst.gold_value->empty()) {
    throw DataError("train_valueex: instance " + inst.id() + " has no gold value");
  }
  TeacherPair p;
  p.inputs.push_back(Vocabulary::kBos);
  for (auto id : model.value_tokens(*inst.gold_value)) {
    p.inputs.push_back(id);
    p.targets.push_back(static_cast<std::size_t>(id));
  }
  p.targets.push_back(Vocabulary::kEos);
  return p;
}

}  // namespace

double valueex_loss(const ValueExModel& model, const std::vector<TypedInstance>& instances,
                    const DialogueIndex& dialogues) {
  nn::NoGradGuard guard;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& inst : instances) {
    const auto p = teacher_pair(model, inst);
    const auto memory = model.encode(inst, lookup_dialogue(dialogues, inst.dialogue_id));
    total += nn::cross_entropy(model.decode_logits(p.inputs, memory), p.targets).item() *
             static_cast<double>(p.targets.size());
    count += p.targets.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

ValueExTrainResult train_valueex(const std::vector<TypedInstance>& instances, const DialogueIndex& dialogues,
                                 Vocabulary vocab, nn::EncoderConfig encoder, ValueExOptions options,
                                 const ValueExTrainConfig& config) {
  if (instances.empty()) throw DataError("train_valueex: no training instances");
  encoder.seed = config.seed;
  ValueExTrainResult result{.model = ValueExModel(encoder, std::move(vocab), options)};
  auto& model = result.model;
  std::vector<TeacherPair> pairs;
  for (const auto& inst : instances) {
    lookup_dialogue(dialogues, inst.dialogue_id);
    pairs.push_back(teacher_pair(model, inst));
  }

  std::vector<nn::Tensor> params;
  for (const auto& [name, t] : model.parameters().all()) params.push_back(t);
  nn::Adam adam(params, {.learning_rate = config.learning_rate, .clip_norm = config.clip_norm});
  Rng rng(config.seed);
  const bool use_dropout = model.config().dropout_rate > 0.0;
  result.initial_loss = valueex_loss(model, instances, dialogues);

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<nn::Tensor> logits;
      std::vector<std::size_t> y;
      for (std::size_t i = start; i < end; ++i) {
        const auto& inst = instances[order[i]];
        Rng* drop = use_dropout ? &rng : nullptr;
        const auto memory = model.encode(inst, lookup_dialogue(dialogues, inst.dialogue_id), std::nullopt, drop);
        logits.push_back(model.decode_logits(pairs[order[i]].inputs, memory, drop));
        y.insert(y.end(), pairs[order[i]].targets.begin(), pairs[order[i]].targets.end());
      }
      adam.zero_grad();
      auto loss = nn::cross_entropy(nn::concat_rows(logits), y);
      loss.backward();
      adam.step();
      total += loss.item() * static_cast<double>(y.size());
      tokens += y.size();
    }
    result.epoch_losses.push_back(total / static_cast<double>(tokens));
  }
  model.parameters().zero_grad();
  return result;
}

void write_value_predictions(const std::vector<ValuePrediction>& predictions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["instance"] = p.instance;
    j["type"] = p.type;
    j["value"] = p.value;
    out << j.dump() << '\n';
  }
}

std::vector<ValuePrediction> read_value_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ValuePrediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("instance").get<std::string>(), j.at("type").get<std::string>(),
                     j.at("value").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace spot
