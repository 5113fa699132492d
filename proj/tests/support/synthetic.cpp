#include "synthetic.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "spot/rng.hpp"

namespace spot::test {

namespace {

Utterance plain(std::size_t index, const std::string& speaker, const std::string& text) {
  Utterance u;
  u.index = index;
  u.speaker_id = speaker;
  u.text = text;
  return u;
}

Utterance persona(std::size_t index, const std::string& speaker, const std::string& text, PersonaType type,
                  const std::string& value) {
  auto u = plain(index, speaker, text);
  u.has_persona = true;
  u.persona_type = type;
  u.persona_value = value;
  return u;
}

template <typename T, std::size_t N>
const T& pick(const std::array<T, N>& items, Rng& rng) {
  return items[rng.index(N)];
}

}  // namespace

std::filesystem::path fixture_corpus_path() { return std::filesystem::path(SPOT_TEST_DATA_DIR) / "fixture_corpus.jsonl"; }

std::filesystem::path golden_path(const std::string& name) { return std::filesystem::path(SPOT_GOLDEN_DIR) / name; }

std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("spot-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string hex_values(std::span<const double> values, std::size_t per_line) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", values[i]);
    out += buf;
    out += (i + 1) % per_line == 0 || i + 1 == values.size() ? '\n' : ' ';
  }
  return out;
}

std::optional<std::string> golden_mismatch(const std::string& name, const std::string& text) {
  const auto path = golden_path(name);
  const char* update = std::getenv("SPOT_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    write_file(path, text);
    return std::nullopt;
  }
  if (!std::filesystem::exists(path)) return "missing golden file " + path.string();
  const auto expected = read_file(path);
  if (expected == text) return std::nullopt;
  std::size_t i = 0;
  while (i < expected.size() && i < text.size() && expected[i] == text[i]) ++i;
  return name + " differs at byte " + std::to_string(i) + " (expected " + std::to_string(expected.size()) +
         " bytes, got " + std::to_string(text.size()) + ")";
}

Dialogue table_iv_dialogue() {
  Dialogue d;
  d.id = "table-iv";
  d.split = Split::Test;
  d.utterances = {
      plain(0, "Chandler", "What've you been up to?"),
      persona(1, "Jade", "Oh, you know, the usual, teaching aerobics, partying way too much.", PersonaType::Occupation,
              "Teaches aerobics"),
      persona(2, "Jade", "Oh, and in case you were wondering, those are my legs on the new James Bond poster.",
              PersonaType::Trait, "Boastful"),
      persona(3, "Chandler", "Can you hold on a moment? I have another call.  I love her.", PersonaType::Likes, "Jade"),
  };
  return d;
}

Corpus separable_discovery_corpus(std::size_t dialogues, std::uint64_t seed) {
  static constexpr std::array<const char*, 6> nouns = {"guitar", "garden", "sister", "job", "dog", "city"};
  static constexpr std::array<const char*, 6> adjs = {"great", "old", "loud", "far", "new", "small"};
  static constexpr std::array<const char*, 5> chatter = {"where did you park the car ?", "what time is it now ?",
                                                         "can you pass the salt ?", "did you hear that noise ?",
                                                         "let us go outside ."};
  Rng rng(seed);
  Corpus corpus;
  for (std::size_t i = 0; i < dialogues; ++i) {
    Dialogue d;
    d.id = "syn-" + std::to_string(i);
    d.split = Split::Train;
    const std::size_t n = 4 + rng.index(3);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string speaker = j % 2 == 0 ? "ana" : "ben";
      // roughly one in three is a persona utterance, at least one per dialogue
      if (j == 1 || rng.index(3) == 0) {
        const std::string noun = pick(nouns, rng);
        const auto type = kAllPersonaTypes[rng.index(kNumPersonaTypes)];
        d.utterances.push_back(persona(j, speaker, "my " + noun + " is " + pick(adjs, rng), type, noun));
      } else {
        d.utterances.push_back(plain(j, speaker, pick(chatter, rng)));
      }
    }
    corpus.add(std::move(d));
  }
  return corpus;
}

std::vector<Dialogue> separable_type_dialogues(std::size_t per_class, std::uint64_t seed) {
  static constexpr std::array<const char*, 4> adjs = {"stubborn", "cheerful", "lazy", "honest"};
  static constexpr std::array<const char*, 4> likes = {"pizza", "jazz", "hiking", "chess"};
  static constexpr std::array<const char*, 4> kin = {"brother", "cousin", "aunt", "uncle"};
  static constexpr std::array<const char*, 4> jobs = {"nurse", "pilot", "baker", "lawyer"};
  static constexpr std::array<const char*, 4> places = {"ohio", "paris", "texas", "rome"};
  static constexpr std::array<const char*, 3> openers = {"how are you ?", "tell me about yourself .",
                                                         "what is new ?"};
  Rng rng(seed);
  std::vector<Dialogue> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (const auto type : kAllPersonaTypes) {
      std::string text, value;
      switch (type) {
        case PersonaType::Trait: value = pick(adjs, rng); text = "honestly i am always so " + value; break;
        case PersonaType::Likes: value = pick(likes, rng); text = "i really love " + value; break;
        case PersonaType::Relation: value = pick(kin, rng); text = "my " + value + " visits every week"; break;
        case PersonaType::Occupation: value = pick(jobs, rng); text = "i work as a " + value; break;
        case PersonaType::Misc: value = pick(places, rng); text = "i was born in " + value; break;
      }
      Dialogue d;
      d.id = "type-" + std::string(to_string(type)) + "-" + std::to_string(i);
      d.split = Split::Train;
      d.utterances.push_back(plain(0, "cara", pick(openers, rng)));
      if (rng.index(2) == 0) d.utterances.push_back(plain(1, "dev", "well , let me think ."));
      d.utterances.push_back(persona(d.utterances.size(), "dev", text, type, value));
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<TypedInstance> persona_instances(const std::vector<Dialogue>& dialogues) {
  std::vector<TypedInstance> out;
  for (const auto& d : dialogues)
    for (const auto& u : d.utterances)
      if (u.has_persona) out.push_back(make_instance(d, u.index));
  return out;
}

std::vector<Dialogue> copy_task_dialogues() {
  static constexpr std::array<const char*, 10> spans = {
      "teaches aerobics", "plays violin",  "loves lasagna", "sister jill", "works nights",
      "owns horses",      "hates spiders", "reads poetry",  "fixes bikes", "speaks french"};
  static constexpr std::array<const char*, 5> types = {"occupation", "likes", "likes", "relation", "occupation"};
  std::vector<Dialogue> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    Dialogue d;
    d.id = "copy-" + std::to_string(i);
    d.split = Split::Train;
    d.utterances.push_back(plain(0, "eve", "so what about you ?"));
    d.utterances.push_back(persona(1, "finn", std::string("well , [ ") + spans[i] + " ] is my thing",
                                   *parse_persona_type(types[i % types.size()]), spans[i]));
    out.push_back(std::move(d));
  }
  return out;
}

Cluster2d gaussian_clusters(std::size_t per_class, double sigma, std::uint64_t seed) {
  static constexpr std::array<std::array<double, 2>, 5> centres = {
      {{0.0, 0.0}, {6.0, 0.0}, {0.0, 6.0}, {6.0, 6.0}, {12.0, 3.0}}};
  Rng rng(seed);
  Cluster2d out;
  for (std::size_t k = 0; k < centres.size(); ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      out.points.push_back({centres[k][0] + sigma * rng.normal(), centres[k][1] + sigma * rng.normal()});
      out.labels.push_back(k);
    }
  }
  return out;
}

AnnotationSet random_annotations(std::size_t items, std::size_t annotators, std::size_t categories, double missing,
                                 std::uint64_t seed) {
  Rng rng(seed);
  AnnotationSet set;
  for (std::size_t i = 0; i < items; ++i) set.item_ids.push_back("item-" + std::to_string(i));
  for (std::size_t a = 0; a < annotators; ++a) {
    auto& labels = set.labels["coder-" + std::to_string(a)];
    for (std::size_t i = 0; i < items; ++i) {
      if (rng.uniform() < missing)
        labels.emplace_back(std::nullopt);
      else
        labels.emplace_back(std::string(1, static_cast<char>('a' + rng.index(categories))));
    }
  }
  return set;
}

}  // namespace spot::test
