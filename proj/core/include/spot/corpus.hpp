#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spot {

enum class PersonaType { Trait = 0, Likes, Relation, Occupation, Misc };

inline constexpr std::size_t kNumPersonaTypes = 5;
inline constexpr std::array<PersonaType, kNumPersonaTypes> kAllPersonaTypes = {
    PersonaType::Trait, PersonaType::Likes, PersonaType::Relation, PersonaType::Occupation,
    PersonaType::Misc};

// Lowercase wire names: "trait", "likes", "relation", "occupation", "misc".
std::string_view to_string(PersonaType type);
std::optional<PersonaType> parse_persona_type(std::string_view name);
inline std::size_t index_of(PersonaType type) { return static_cast<std::size_t>(type); }

enum class Split { Train = 0, Dev, Test };
inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Dev, Split::Test};
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view name);

struct Utterance {
  std::size_t index = 0;
  std::string speaker_id;
  std::string text;
  bool has_persona = false;
  std::optional<PersonaType> persona_type;
  std::optional<std::string> persona_value;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  Split split = Split::Train;

  std::vector<std::string> speakers() const;  // distinct, first-appearance order
  bool operator==(const Dialogue&) const = default;
};

// Dialogues grouped by split, each group in file order.
class Corpus {
 public:
  std::vector<Dialogue>& split(Split s) { return splits_[static_cast<std::size_t>(s)]; }
  const std::vector<Dialogue>& split(Split s) const {
    return splits_[static_cast<std::size_t>(s)];
  }
  void add(Dialogue dialogue) { split(dialogue.split).push_back(std::move(dialogue)); }
  std::size_t dialogue_count() const;
  bool empty() const { return dialogue_count() == 0; }
  const Dialogue* find(std::string_view id) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::array<std::vector<Dialogue>, 3> splits_;
};

// The utterances u_1..u_m of a dialogue ending at a target utterance.
struct TypedInstance {
  std::string dialogue_id;
  std::vector<Utterance> context;
  Utterance target;
  std::optional<PersonaType> gold_type;
  std::optional<std::string> gold_value;

  // "<dialogue id>#<target index>"; keys external vectors and prediction files.
  std::string id() const;
};

// Context is every utterance from the start of the dialogue up to the target.
// Gold fields are copied from the target's annotation.
TypedInstance make_instance(const Dialogue& dialogue, std::size_t target_index);

struct Violation {
  std::string dialogue_id;
  std::optional<std::size_t> utterance_index;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

// Strict load: throws DataError on I/O failure, malformed JSON (with line
// number) or any annotation invariant violation (with dialogue id and
// utterance index).
Corpus load_corpus(const std::filesystem::path& path);

// Parses the schema but accepts annotation inconsistencies, so they can be
// listed by validate_annotations. Still throws on malformed lines.
Corpus read_corpus_unchecked(const std::filesystem::path& path);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_dialogue(const Dialogue& dialogue);

// Rules: "empty-dialogue", "index-gap", "empty-speaker", "empty-text",
// "duplicate-id", "type-missing", "type-without-persona", "value-missing",
// "value-without-type", "empty-value".
std::vector<Violation> validate_annotations(const Corpus& corpus);

struct SplitStats {
  bool present = false;
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  double mean_speakers_per_dialogue = 0.0;
  std::size_t persona_utterances = 0;
  double mean_persona_per_dialogue = 0.0;
  std::array<std::size_t, kNumPersonaTypes> type_counts{};
};

struct CorpusStats {
  std::array<SplitStats, 3> splits;
  const SplitStats& of(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string render_stats(const CorpusStats& stats);

// Nominal labels per annotator aligned to item_ids; nullopt marks a missing
// label.
struct AnnotationSet {
  std::vector<std::string> item_ids;
  std::map<std::string, std::vector<std::optional<std::string>>> labels;
};

// Reads {"item", "annotator", "label"} lines. Items keep first-appearance order.
AnnotationSet load_annotations(const std::filesystem::path& path);

// Krippendorff's alpha for nominal data via the coincidence matrix. Items
// with fewer than two labels are skipped. Throws UsageError with fewer than
// two annotators and DataError when no item has two labels. When every
// pairable label falls in a single category the expected disagreement is zero
// and 1.0 is returned by convention.
double krippendorff_alpha(const AnnotationSet& annotations);

}  // namespace spot
