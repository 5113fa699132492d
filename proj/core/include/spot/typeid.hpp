#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spot/boundary.hpp"
#include "spot/corpus.hpp"
#include "spot/nn/layers.hpp"
#include "spot/text.hpp"

namespace spot {

class Rng;

// Speaker id -> indices into context + {target} (the target is the last
// index), each list in utterance order.
std::map<std::string, std::vector<std::size_t>> speaker_partition(const TypedInstance& instance);

enum class ContextMode { TrainableSmall, ExternalFrozen };

// Source of the whole-instance context vector. In trainable-small mode the
// vector is computed by parameters inside TypeIdModel; in external-frozen
// mode it is looked up by instance id from precomputed vectors.
class ContextEncoder {
 public:
  static ContextEncoder trainable() { return ContextEncoder(); }
  // {"instance": str, "vector": [real, ...]} per line; dimension constant.
  static ContextEncoder load_external(const std::filesystem::path& path);
  static ContextEncoder external(std::unordered_map<std::string, std::vector<double>> vectors);

  ContextMode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  // Throws DataError when the instance has no vector.
  const std::vector<double>& lookup(const std::string& instance_id) const;

 private:
  ContextMode mode_ = ContextMode::TrainableSmall;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct TypeIdOptions {
  bool disable_speaker_module = false;     // drops H_SAR from the global attention
  bool disable_pretrained_context = false;  // drops the context vector from the fusion
  ContextMode context_mode = ContextMode::TrainableSmall;
  std::size_t external_context_dim = 0;  // required in external-frozen mode
};

// Intermediate representations of one forward pass; exposed for tests.
struct TypeIdTrace {
  nn::Tensor utterance_summaries;  // h^_u, [n, 2h]
  nn::Tensor dialogue_states;      // h^_d, [n, 2h]
  nn::Tensor speaker_states;       // T_S over the target speaker's utterances
  std::optional<nn::AttentionResult> sar;
  nn::AttentionResult car;
  nn::AttentionResult gar;
  std::optional<nn::Tensor> context;
  nn::Tensor z;
};

// BiGRU utterance encoder, dialogue transformer T^_d, speaker transformer T_S
// (one parameter set shared by every speaker partition), additive attentions
// for H_SAR, H_CAR and H_GAR, a context-vector adapter and the fusion
// projection to z. The cross-entropy head is used only while learning
// representations; prediction goes through the attached boundaries.
class TypeIdModel {
 public:
  TypeIdModel(nn::EncoderConfig config, Vocabulary vocab, TypeIdOptions options = {});
  TypeIdModel(TypeIdModel&&) = default;
  TypeIdModel& operator=(TypeIdModel&&) = default;
  TypeIdModel(const TypeIdModel&) = delete;
  TypeIdModel& operator=(const TypeIdModel&) = delete;

  const nn::EncoderConfig& config() const { return config_; }
  const TypeIdOptions& options() const { return options_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t representation_dim() const { return config_.embed_dim; }
  std::size_t state_dim() const { return 2 * config_.hidden_dim; }

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  nn::Tensor head(const nn::Tensor& z) const { return head_(z); }

  const std::optional<BoundaryModel>& boundaries() const { return boundaries_; }
  // Throws UsageError when the centroid width differs from z's.
  void set_boundaries(BoundaryModel boundaries);

  TypeIdTrace trace(const ContextEncoder& context, const TypedInstance& instance,
                    Rng* dropout_rng = nullptr) const;

  void save(const std::filesystem::path& directory) const;
  static TypeIdModel load(const std::filesystem::path& directory);

 private:
  std::vector<TokenId> encode(const std::string& text) const;

  nn::EncoderConfig config_;
  Vocabulary vocab_;
  TypeIdOptions options_;
  nn::ParameterStore store_;
  nn::Embedding embedding_;
  nn::BiGru gru_u_;
  nn::TransformerEncoder dialogue_encoder_;
  nn::TransformerEncoder speaker_encoder_;
  nn::AdditiveAttention sar_, car_, gar_;
  nn::Embedding context_embedding_;
  nn::Linear context_proj_;
  nn::Linear fusion_;
  nn::Linear head_;
  std::optional<BoundaryModel> boundaries_;
};

// z for one instance. Throws DataError when an external context encoder has
// no vector for the instance and UsageError when the encoder's mode or
// dimension disagrees with the model.
nn::Tensor typeid_representation(const TypeIdModel& model, const ContextEncoder& context,
                                 const TypedInstance& instance);

// Nearest-centroid type under the attached boundaries; throws UsageError if
// the model has none.
PersonaType predict_instance_type(const TypeIdModel& model, const ContextEncoder& context,
                                  const TypedInstance& instance);

struct TypeIdTrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 3e-3;
  std::size_t batch_size = 8;
  double clip_norm = 5.0;
  BoundaryFitConfig boundary{};
  std::uint64_t seed = 13;
};

struct TypeIdTrainResult {
  TypeIdModel model;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses{};  // phase-one cross-entropy
  double boundary_loss = 0.0;           // phase-two loss at the fitted radii
};

Vocabulary build_instance_vocabulary(const std::vector<TypedInstance>& instances);

// Phase one trains every parameter with softmax cross-entropy through the
// head; phase two freezes the network, takes class means of z as centroids
// and fits the radii with the boundary loss. Throws DataError when an
// instance lacks a gold type or some persona type has no instance.
TypeIdTrainResult train_typeid(const std::vector<TypedInstance>& instances, nn::EncoderConfig encoder,
                               TypeIdOptions options, const ContextEncoder& context,
                               const TypeIdTrainConfig& config);

}  // namespace spot
