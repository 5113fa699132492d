#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spot/corpus.hpp"
#include "spot/metrics.hpp"

namespace spot {

class DiscoveryModel;
class TypeIdModel;
class ContextEncoder;
class ValueExModel;

// Stage seams. Each has a model-backed implementation and a gold oracle that
// echoes the annotation, so either can be injected at any stage.
class DiscoveryStage {
 public:
  virtual ~DiscoveryStage() = default;
  virtual std::string name() const = 0;
  virtual std::vector<bool> predict(const Dialogue& dialogue) const = 0;
};

class TypeStage {
 public:
  virtual ~TypeStage() = default;
  virtual std::string name() const = 0;
  virtual PersonaType predict(const TypedInstance& instance) const = 0;
};

class ValueStage {
 public:
  virtual ~ValueStage() = default;
  virtual std::string name() const = 0;
  virtual std::string generate(const TypedInstance& instance, const Dialogue& dialogue, PersonaType type) const = 0;
};

class ModelDiscoveryStage final : public DiscoveryStage {
 public:
  explicit ModelDiscoveryStage(const DiscoveryModel& model) : model_(model) {}
  std::string name() const override { return "model"; }
  std::vector<bool> predict(const Dialogue& dialogue) const override;

 private:
  const DiscoveryModel& model_;
};

class GoldDiscoveryStage final : public DiscoveryStage {
 public:
  std::string name() const override { return "gold"; }
  std::vector<bool> predict(const Dialogue& dialogue) const override;
};

class ModelTypeStage final : public TypeStage {
 public:
  ModelTypeStage(const TypeIdModel& model, const ContextEncoder& context) : model_(model), context_(context) {}
  std::string name() const override { return "model"; }
  PersonaType predict(const TypedInstance& instance) const override;

 private:
  const TypeIdModel& model_;
  const ContextEncoder& context_;
};

// Throws DataError for an instance without a gold type (a discovery false
// positive reaching a gold type stage).
class GoldTypeStage final : public TypeStage {
 public:
  std::string name() const override { return "gold"; }
  PersonaType predict(const TypedInstance& instance) const override;
};

class ModelValueStage final : public ValueStage {
 public:
  explicit ModelValueStage(const ValueExModel& model) : model_(model) {}
  std::string name() const override { return "model"; }
  std::string generate(const TypedInstance& instance, const Dialogue& dialogue, PersonaType type) const override;

 private:
  const ValueExModel& model_;
};

// The gold value, or "" when the instance has none.
class GoldValueStage final : public ValueStage {
 public:
  std::string name() const override { return "gold"; }
  std::string generate(const TypedInstance& instance, const Dialogue& dialogue, PersonaType type) const override;
};

struct Stages {
  const DiscoveryStage* discovery = nullptr;
  const TypeStage* type = nullptr;
  const ValueStage* value = nullptr;
};

enum class EvalMode { Standalone, Pipeline };
std::string_view to_string(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(std::string_view name);

// Which inputs each stage consumed and which implementation produced it.
struct Provenance {
  std::string discovery_stage;
  std::string type_stage;
  std::string value_stage;
  bool type_inputs_gold = true;   // stage 2 fed gold persona utterances
  bool value_inputs_gold = true;  // stage 3 fed gold types
};

struct StageInstance {
  std::string dialogue_id;
  std::size_t index = 0;
  PersonaType type = PersonaType::Trait;
  std::string value;
};

struct StageOutputs {
  std::vector<std::pair<std::string, std::vector<bool>>> discovery;  // per dialogue, split order
  std::vector<StageInstance> instances;                              // dialogue order, then index
  Provenance provenance;
};

struct Exemplar {
  std::string dialogue_id;
  std::size_t index = 0;
  std::string speaker;
  std::string text;  // verbatim
  std::string gold;
  std::string predicted;
  bool operator==(const Exemplar&) const = default;
};

struct DiscoveryResults {
  BinaryScores scores;
  ConfusionMatrix confusion;  // labels "no", "yes"
};

struct TypeResults {
  MultiClassScores scores;    // over every gold persona utterance
  ConfusionMatrix confusion;  // over the utterances that received a type
  std::size_t evaluated = 0;
  std::size_t missed = 0;  // gold persona utterances the pipeline never typed
};

struct ValueResults {
  GenerationScores scores;  // over gold-valued instances
  std::size_t missed = 0;   // scored as empty generations
};

struct EvalResults {
  DiscoveryResults discovery;
  TypeResults type;
  ValueResults value;
  std::vector<Exemplar> false_positives;
  std::vector<Exemplar> false_negatives;
};

struct EvalReport {
  EvalMode mode = EvalMode::Standalone;
  std::string split = "test";
  Provenance provenance;
  std::vector<std::pair<std::string, std::string>> config;  // snapshot, key order
  EvalResults results;
};

struct EvalOptions {
  Split split = Split::Test;
  std::size_t exemplar_limit = 10;  // per list
  std::size_t threads = 1;          // dialogues scored concurrently
};

// Each stage on gold inputs: discovery over every utterance, typing over the
// gold persona utterances, generation over gold-valued utterances with gold
// types. Throws UsageError when a stage is missing and DataError when the
// split is empty.
EvalReport run_standalone(const Corpus& corpus, const Stages& stages, const EvalOptions& options = {},
                          StageOutputs* outputs = nullptr);

// Stage 2 sees only stage-1 positives and stage 3 receives stage-2 types.
// Gold persona utterances dropped by stage 1 count as untyped (a miss for
// their class) and as empty generations. Discovery false positives are typed
// and generated for the profiles but only enter the discovery scores.
EvalReport run_pipeline(const Corpus& corpus, const Stages& stages, const EvalOptions& options = {},
                        StageOutputs* outputs = nullptr);

struct ProfileEntry {
  PersonaType type = PersonaType::Trait;
  std::string value;
  std::size_t evidence = 0;  // utterance index in the dialogue
  bool operator==(const ProfileEntry&) const = default;
};

struct SpeakerProfile {
  std::string speaker_id;
  std::vector<ProfileEntry> entries;  // by evidence index
  bool operator==(const SpeakerProfile&) const = default;
};

// One profile per speaker with at least one typed utterance, ordered by first
// evidence. Throws UsageError when an instance points outside the dialogue
// or at an utterance stage 1 did not mark positive.
std::vector<SpeakerProfile> assemble_profiles(const Dialogue& dialogue, const StageOutputs& outputs);
std::string profiles_to_json(const std::string& dialogue_id, const std::vector<SpeakerProfile>& profiles);

// Machine-readable report. results_to_json covers the scored results only
// (no mode, provenance or config), the part two runs can agree on.
std::string report_to_json(const EvalReport& report);
std::string results_to_json(const EvalResults& results);
EvalReport report_from_json(const std::string& text);

// Human-readable table with the published reference numbers beside the
// measured ones.
std::string render_report(const EvalReport& report);

// Writes <stem>.json and <stem>.txt into directory; returns both paths.
std::pair<std::filesystem::path, std::filesystem::path> emit_report(const EvalReport& report,
                                                                     const std::filesystem::path& directory,
                                                                     const std::string& stem = "report");

}  // namespace spot
