#include "spot/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "spot/error.hpp"
#include "spot/model_io.hpp"
#include "spot/nn/checkpoint.hpp"
#include "spot/nn/ops.hpp"
#include "spot/nn/optim.hpp"
#include "spot/rng.hpp"
#include "spot/smote.hpp"

namespace spot {

namespace {
// Upper bound on dialogue length for T_d's positional table; longer
// dialogues reuse the last position.
constexpr std::size_t kMaxUtterancePositions = 64;
}  // namespace

DiscoveryModel::DiscoveryModel(nn::EncoderConfig config, Vocabulary vocab, double decision_threshold)
    : config_(config), vocab_(std::move(vocab)), threshold_(decision_threshold) {
  config_.vocab_size = vocab_.size();
  config_.validate();
  set_decision_threshold(decision_threshold);
  Rng rng(config_.seed);
  const auto d = config_.embed_dim;
  embedding_ = nn::Embedding(store_, "embedding", config_.vocab_size, d, rng);
  utterance_encoder_ = nn::TransformerEncoder(store_, "t_u", d, config_.num_heads, config_.hidden_dim,
                                              config_.num_layers, config_.max_sequence_length, rng);
  dialogue_encoder_ = nn::TransformerEncoder(store_, "t_d", d, config_.num_heads, config_.hidden_dim,
                                             config_.num_layers, kMaxUtterancePositions, rng);
  hidden_ = nn::Linear(store_, "head/hidden", d, config_.hidden_dim, rng);
  output_ = nn::Linear(store_, "head/output", config_.hidden_dim, 2, rng);
}

void DiscoveryModel::set_decision_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw UsageError("decision threshold must lie in (0, 1)");
  threshold_ = t;
}

std::vector<TokenId> DiscoveryModel::encode_utterance(const std::string& text) const {
  auto ids = vocab_.encode(text);
  if (ids.size() > config_.max_sequence_length) ids.resize(config_.max_sequence_length);
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  return ids;
}

nn::Tensor DiscoveryModel::features(const Dialogue& dialogue, Rng* dropout_rng) const {
  if (dialogue.utterances.empty()) throw UsageError("discovery: dialogue " + dialogue.id + " is empty");
  const bool training = dropout_rng != nullptr;
  std::vector<nn::Tensor> pooled;
  pooled.reserve(dialogue.utterances.size());
  for (const auto& u : dialogue.utterances) {
    auto x = embedding_(encode_utterance(u.text));
    if (training) x = nn::dropout(x, config_.dropout_rate, *dropout_rng, true);
    pooled.push_back(nn::mean_rows(utterance_encoder_(x)));
  }
  return dialogue_encoder_(nn::concat_rows(pooled));
}

nn::Tensor DiscoveryModel::head(const nn::Tensor& features) const {
  return output_(nn::tanh(hidden_(features)));
}

void DiscoveryModel::save(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  nn::save_checkpoint(store_, directory / "discovery.ckpt");
  vocab_.save(directory / "discovery.vocab");
  ModelSidecar side;
  write_encoder_config(side, config_);
  side.set("decision_threshold", threshold_);
  side.save(directory / "discovery.cfg");
}

DiscoveryModel DiscoveryModel::load(const std::filesystem::path& directory) {
  const auto side = ModelSidecar::load(directory / "discovery.cfg");
  DiscoveryModel model(read_encoder_config(side), Vocabulary::load(directory / "discovery.vocab"),
                       side.get_double("decision_threshold"));
  nn::load_checkpoint(model.store_, directory / "discovery.ckpt");
  return model;
}

std::vector<double> discovery_forward(const DiscoveryModel& model, const Dialogue& dialogue) {
  nn::NoGradGuard guard;
  auto probs = nn::softmax_rows(model.head(model.features(dialogue)));
  std::vector<double> out(dialogue.utterances.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probs.at(i, 1);
  return out;
}

std::vector<bool> apply_threshold(std::span<const double> probabilities, double threshold) {
  std::vector<bool> out;
  out.reserve(probabilities.size());
  for (double p : probabilities) out.push_back(p >= threshold);
  return out;
}

DiscoveryPrediction predict_discovery(const DiscoveryModel& model, const Dialogue& dialogue) {
  DiscoveryPrediction p;
  p.probability = discovery_forward(model, dialogue);
  p.positive = apply_threshold(p.probability, model.decision_threshold());
  return p;
}

Vocabulary build_discovery_vocabulary(const Corpus& corpus) {
  Vocabulary vocab;
  for (const auto& d : corpus.split(Split::Train))
    for (const auto& u : d.utterances)
      for (const auto& t : tokenize(u.text)) vocab.add(t);
  return vocab;
}

namespace {

std::vector<std::size_t> utterance_labels(const Dialogue& d) {
  std::vector<std::size_t> y;
  for (const auto& u : d.utterances) y.push_back(u.has_persona ? 1 : 0);
  return y;
}

double mean_loss(const DiscoveryModel& model, const std::vector<Dialogue>& dialogues) {
  nn::NoGradGuard guard;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& d : dialogues) {
    const auto y = utterance_labels(d);
    total += nn::cross_entropy(model.head(model.features(d)), y).item() * static_cast<double>(y.size());
    count += y.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

DiscoveryTrainResult train_discovery(const Corpus& corpus, nn::EncoderConfig encoder,
                                     const DiscoveryTrainConfig& config) {
  const auto& train = corpus.split(Split::Train);
  if (train.empty()) throw DataError("train_discovery: the train split is empty");
  encoder.seed = config.seed;
  DiscoveryTrainResult result{.model = DiscoveryModel(encoder, build_discovery_vocabulary(corpus),
                                                     config.decision_threshold)};
  auto& model = result.model;

  std::size_t positives = 0;
  for (const auto& d : train)
    for (const auto& u : d.utterances) positives += u.has_persona ? 1 : 0;
  bool smote = config.use_smote;
  std::size_t k = config.smote_k;
  if (smote && positives < 2) {
    result.warnings.push_back("train split has " + std::to_string(positives) +
                              " persona utterances; SMOTE upsampling disabled");
    smote = false;
  } else if (smote && k >= positives) {
    k = positives - 1;
    result.warnings.push_back("smote_k reduced to " + std::to_string(k) + " (only " +
                              std::to_string(positives) + " persona utterances)");
  }

  nn::AdamOptions opts{.learning_rate = config.learning_rate, .clip_norm = config.clip_norm};
  std::vector<nn::Tensor> all;
  for (const auto& [name, t] : model.parameters().all()) all.push_back(t);
  nn::Adam full(all, opts);
  nn::Adam head(model.head_parameters(), opts);
  Rng rng(config.seed);
  const bool use_dropout = model.config().dropout_rate > 0.0;

  result.initial_loss = mean_loss(model, train);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (smote) {
      std::vector<FeaturePoint> points;
      {
        nn::NoGradGuard guard;
        for (const auto& d : train) {
          const auto f = model.features(d);
          for (std::size_t i = 0; i < d.utterances.size(); ++i) {
            const auto r = f.values().subspan(i * f.cols(), f.cols());
            points.push_back({std::vector<double>(r.begin(), r.end()), d.utterances[i].has_persona ? 1 : 0});
          }
          result.smote_dialogues.insert(d.id);
        }
      }
      const auto augmented = smote_upsample(points, k, config.smote_ratio, rng);
      result.synthetic_points += augmented.origins.size();
      std::vector<std::size_t> idx(augmented.points.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      rng.shuffle(idx.begin(), idx.end());
      const std::size_t dim = points.front().vector.size();
      for (std::size_t start = 0; start < idx.size(); start += config.head_batch) {
        const std::size_t end = std::min(idx.size(), start + config.head_batch);
        std::vector<double> flat;
        std::vector<std::size_t> y;
        for (std::size_t i = start; i < end; ++i) {
          const auto& p = augmented.points[idx[i]];
          flat.insert(flat.end(), p.vector.begin(), p.vector.end());
          y.push_back(static_cast<std::size_t>(p.label));
        }
        head.zero_grad();
        nn::cross_entropy(model.head(nn::Tensor::from({y.size(), dim}, std::move(flat))), y).backward();
        head.step();
      }
    }

    rng.shuffle(order.begin(), order.end());
    double epoch_total = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_dialogues) {
      const std::size_t end = std::min(order.size(), start + config.batch_dialogues);
      std::vector<nn::Tensor> logits;
      std::vector<std::size_t> y;
      for (std::size_t i = start; i < end; ++i) {
        const auto& d = train[order[i]];
        logits.push_back(model.head(model.features(d, use_dropout ? &rng : nullptr)));
        const auto dy = utterance_labels(d);
        y.insert(y.end(), dy.begin(), dy.end());
      }
      full.zero_grad();
      auto loss = nn::cross_entropy(nn::concat_rows(logits), y);
      loss.backward();
      full.step();
      epoch_total += loss.item() * static_cast<double>(y.size());
      epoch_count += y.size();
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(epoch_count));
  }
  model.parameters().zero_grad();
  return result;
}

}  // namespace spot
