#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "spot/corpus.hpp"
#include "spot/nn/layers.hpp"
#include "spot/text.hpp"

namespace spot {

// Utterance-level transformer T_u (mean-pooled per utterance), dialogue-level
// transformer T_d over the pooled vectors, and a two-layer head producing
// two logits per utterance.
class DiscoveryModel {
 public:
  DiscoveryModel(nn::EncoderConfig config, Vocabulary vocab, double decision_threshold = 0.5);
  DiscoveryModel(DiscoveryModel&&) = default;
  DiscoveryModel& operator=(DiscoveryModel&&) = default;
  DiscoveryModel(const DiscoveryModel&) = delete;
  DiscoveryModel& operator=(const DiscoveryModel&) = delete;

  const nn::EncoderConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  double decision_threshold() const { return threshold_; }
  void set_decision_threshold(double t);

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  std::vector<nn::Tensor> head_parameters() const { return store_.with_prefix("head/"); }

  // Token ids for one utterance, truncated to max_sequence_length; an
  // utterance with no tokens maps to a single unknown token.
  std::vector<TokenId> encode_utterance(const std::string& text) const;

  // [n, embed_dim] contextual vectors from T_d: the head's input space.
  nn::Tensor features(const Dialogue& dialogue, Rng* dropout_rng = nullptr) const;
  // [n, 2] logits from head input features.
  nn::Tensor head(const nn::Tensor& features) const;

  void save(const std::filesystem::path& directory) const;
  static DiscoveryModel load(const std::filesystem::path& directory);

 private:
  nn::EncoderConfig config_;
  Vocabulary vocab_;
  double threshold_;
  nn::ParameterStore store_;
  nn::Embedding embedding_;
  nn::TransformerEncoder utterance_encoder_;
  nn::TransformerEncoder dialogue_encoder_;
  nn::Linear hidden_;
  nn::Linear output_;
};

// Positive-class probability per utterance. Throws UsageError on an empty
// dialogue.
std::vector<double> discovery_forward(const DiscoveryModel& model, const Dialogue& dialogue);

struct DiscoveryPrediction {
  std::vector<bool> positive;
  std::vector<double> probability;
};

// positive[i] = probability[i] >= threshold.
std::vector<bool> apply_threshold(std::span<const double> probabilities, double threshold);
DiscoveryPrediction predict_discovery(const DiscoveryModel& model, const Dialogue& dialogue);

struct DiscoveryTrainConfig {
  std::size_t epochs = 40;
  double learning_rate = 3e-3;
  std::size_t batch_dialogues = 4;
  bool use_smote = true;
  std::size_t smote_k = 5;
  double smote_ratio = 1.0;
  std::size_t head_batch = 32;
  double clip_norm = 5.0;
  double decision_threshold = 0.5;
  std::uint64_t seed = 13;
};

struct DiscoveryTrainResult {
  DiscoveryModel model;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses{};  // mean cross-entropy over real utterances
  std::vector<std::string> warnings{};
  std::set<std::string> smote_dialogues{};  // dialogues whose features entered SMOTE
  std::size_t synthetic_points = 0;       // summed over epochs
};

// Vocabulary over the train split's utterance texts.
Vocabulary build_discovery_vocabulary(const Corpus& corpus);

// Each epoch: features of every training utterance are computed with the
// current encoders, positives are SMOTE-upsampled in that space and the head
// takes a pass over the augmented set; then the whole network takes a
// cross-entropy pass over the training dialogues. Without at least two
// positives SMOTE is skipped with a warning. Throws DataError when the train
// split is empty.
DiscoveryTrainResult train_discovery(const Corpus& corpus, nn::EncoderConfig encoder,
                                     const DiscoveryTrainConfig& config);

}  // namespace spot
