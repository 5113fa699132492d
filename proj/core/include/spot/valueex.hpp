#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spot/corpus.hpp"
#include "spot/nn/layers.hpp"
#include "spot/text.hpp"

namespace spot {

class Rng;

struct ValueExOptions {
  std::size_t max_length = 16;  // generated tokens, end marker excluded
  std::size_t beam_width = 1;   // 1 = greedy; at most 4
  bool type_control = false;    // prepend a <type:x> token to the target sequence

  void validate() const;
};

// Shared transformer encoder over the context, target and whole-dialogue
// token sequences; the target encoding queries the context encoding (keys
// and values), and the attended sequence is stacked with the dialogue
// encoding to form the decoder memory. An autoregressive transformer decoder
// with causal self-attention generates the value.
class ValueExModel {
 public:
  ValueExModel(nn::EncoderConfig config, Vocabulary vocab, ValueExOptions options = {});
  ValueExModel(ValueExModel&&) = default;
  ValueExModel& operator=(ValueExModel&&) = default;
  ValueExModel(const ValueExModel&) = delete;
  ValueExModel& operator=(const ValueExModel&) = delete;

  const nn::EncoderConfig& config() const { return config_; }
  const ValueExOptions& options() const { return options_; }
  void set_options(ValueExOptions options);
  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t memory_width() const { return config_.embed_dim; }

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  // Speaker-prefixed utterance tokens ("speaker : text"), utterances joined
  // by the separator token.
  std::vector<TokenId> context_tokens(const TypedInstance& instance) const;
  std::vector<TokenId> target_tokens(const TypedInstance& instance, std::optional<PersonaType> type) const;
  std::vector<TokenId> dialogue_tokens(const Dialogue& dialogue) const;
  // Value tokens truncated to max_length, without markers.
  std::vector<TokenId> value_tokens(const std::string& value) const;

  // [Lt + Ld, E]. Throws UsageError on an empty target text or when the
  // instance does not belong to the dialogue.
  nn::Tensor encode(const TypedInstance& instance, const Dialogue& dialogue,
                    std::optional<PersonaType> type = std::nullopt, Rng* dropout_rng = nullptr) const;
  // Next-token logits [L, V] for decoder inputs (starting with the begin marker).
  nn::Tensor decode_logits(std::span<const TokenId> inputs, const nn::Tensor& memory,
                           Rng* dropout_rng = nullptr) const;

  void save(const std::filesystem::path& directory) const;
  static ValueExModel load(const std::filesystem::path& directory);

 private:
  std::vector<TokenId> utterance_tokens(const Utterance& u) const;
  nn::Tensor embed(std::span<const TokenId> ids, Rng* dropout_rng) const;

  nn::EncoderConfig config_;
  Vocabulary vocab_;
  ValueExOptions options_;
  nn::ParameterStore store_;
  nn::Embedding embedding_;
  nn::TransformerEncoder encoder_;
  nn::MultiHeadAttention context_target_;
  nn::Tensor decoder_positions_;
  std::vector<nn::TransformerDecoderLayer> decoder_;
  nn::Linear output_;
};

// Control token for a persona type, e.g. "<type:likes>".
std::string type_control_token(PersonaType type);

nn::Tensor valueex_encode(const ValueExModel& model, const TypedInstance& instance, const Dialogue& dialogue);

// Greedy (or beam, per the model options) decoding; stops at the end marker
// or max_length. The type feeds the control token when enabled; it defaults
// to the instance's gold type.
std::string generate_value(const ValueExModel& model, const TypedInstance& instance, const Dialogue& dialogue,
                           std::optional<PersonaType> type = std::nullopt);

using DialogueIndex = std::unordered_map<std::string, const Dialogue*>;
DialogueIndex index_dialogues(const std::vector<Dialogue>& dialogues);
// Throws DataError for an unknown dialogue id.
const Dialogue& lookup_dialogue(const DialogueIndex& index, const std::string& id);

// Speakers, utterance texts and gold values of the given dialogues, plus the
// five control tokens.
Vocabulary build_valueex_vocabulary(const std::vector<Dialogue>& dialogues);

struct ValueExTrainConfig {
  std::size_t epochs = 60;
  double learning_rate = 3e-3;
  std::size_t batch_size = 8;
  double clip_norm = 5.0;
  std::uint64_t seed = 13;
};

struct ValueExTrainResult {
  ValueExModel model;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses{};  // mean token cross-entropy
};

// Teacher-forced token cross-entropy. Throws DataError when an instance has
// no gold value (or an empty one) or names an unknown dialogue.
ValueExTrainResult train_valueex(const std::vector<TypedInstance>& instances, const DialogueIndex& dialogues,
                                 Vocabulary vocab, nn::EncoderConfig encoder, ValueExOptions options,
                                 const ValueExTrainConfig& config);

// Mean teacher-forced cross-entropy over the instances (no gradient).
double valueex_loss(const ValueExModel& model, const std::vector<TypedInstance>& instances,
                    const DialogueIndex& dialogues);

struct ValuePrediction {
  std::string instance;
  std::string type;
  std::string value;
  bool operator==(const ValuePrediction&) const = default;
};

// {"instance", "type", "value"} per line.
void write_value_predictions(const std::vector<ValuePrediction>& predictions, const std::filesystem::path& path);
std::vector<ValuePrediction> read_value_predictions(const std::filesystem::path& path);

}  // namespace spot
