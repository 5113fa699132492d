#include "spot/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spot/error.hpp"

namespace spot {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PersonaType type) {
  switch (type) {
    case PersonaType::Trait: return "trait";
    case PersonaType::Likes: return "likes";
    case PersonaType::Relation: return "relation";
    case PersonaType::Occupation: return "occupation";
    case PersonaType::Misc: return "misc";
  }
  return "?";
}

std::optional<PersonaType> parse_persona_type(std::string_view name) {
  for (auto t : kAllPersonaTypes)
    if (to_string(t) == name) return t;
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  for (auto s : kAllSplits)
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::vector<std::string> Dialogue::speakers() const {
  std::vector<std::string> out;
  for (const auto& u : utterances)
    if (std::find(out.begin(), out.end(), u.speaker_id) == out.end()) out.push_back(u.speaker_id);
  return out;
}

std::size_t Corpus::dialogue_count() const {
  std::size_t n = 0;
  for (const auto& s : splits_) n += s.size();
  return n;
}

const Dialogue* Corpus::find(std::string_view id) const {
  for (const auto& s : splits_)
    for (const auto& d : s)
      if (d.id == id) return &d;
  return nullptr;
}

std::string TypedInstance::id() const { return dialogue_id + "#" + std::to_string(target.index); }

TypedInstance make_instance(const Dialogue& dialogue, std::size_t target_index) {
  if (target_index >= dialogue.utterances.size()) {
    throw UsageError("instance target " + std::to_string(target_index) + " outside dialogue " +
                     dialogue.id);
  }
  TypedInstance inst;
  inst.dialogue_id = dialogue.id;
  inst.context.assign(dialogue.utterances.begin(),
                      dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(target_index));
  inst.target = dialogue.utterances[target_index];
  inst.gold_type = inst.target.persona_type;
  inst.gold_value = inst.target.persona_value;
  return inst;
}

namespace {

void check_utterance(const std::string& dialogue_id, const Utterance& u, std::size_t position,
                     std::vector<Violation>& out) {
  auto flag = [&](const char* rule) { out.push_back({dialogue_id, position, rule}); };
  if (u.index != position) flag("index-gap");
  if (u.speaker_id.empty()) flag("empty-speaker");
  if (u.text.empty()) flag("empty-text");
  if (u.has_persona && !u.persona_type) flag("type-missing");
  if (!u.has_persona && u.persona_type) flag("type-without-persona");
  if (u.persona_type && !u.persona_value) flag("value-missing");
  if (!u.persona_type && u.persona_value) flag("value-without-type");
  if (u.persona_value && u.persona_value->empty()) flag("empty-value");
}

void check_dialogue(const Dialogue& d, std::vector<Violation>& out) {
  if (d.utterances.empty()) out.push_back({d.id, std::nullopt, "empty-dialogue"});
  for (std::size_t i = 0; i < d.utterances.size(); ++i) check_utterance(d.id, d.utterances[i], i, out);
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

const json& require_field(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(ctx + "missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  const auto& v = require_field(obj, key, ctx);
  if (!v.is_string()) throw DataError(ctx + "field '" + key + "' must be a string");
  return v.get<std::string>();
}

Dialogue parse_dialogue(const json& obj, const std::string& ctx) {
  if (!obj.is_object()) throw DataError(ctx + "expected a JSON object");
  Dialogue d;
  d.id = require_string(obj, "id", ctx);
  const auto split_name = require_string(obj, "split", ctx);
  const auto split = parse_split(split_name);
  if (!split) throw DataError(ctx + "unknown split '" + split_name + "'");
  d.split = *split;
  const auto& utts = require_field(obj, "utterances", ctx);
  if (!utts.is_array()) throw DataError(ctx + "field 'utterances' must be an array");
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto uctx = ctx + "dialogue " + d.id + " utterance " + std::to_string(i) + ": ";
    const auto& u = utts[i];
    if (!u.is_object()) throw DataError(uctx + "expected a JSON object");
    Utterance out;
    out.index = i;
    out.speaker_id = require_string(u, "speaker", uctx);
    out.text = require_string(u, "text", uctx);
    const auto& persona = require_field(u, "persona", uctx);
    if (!persona.is_boolean()) throw DataError(uctx + "field 'persona' must be a boolean");
    out.has_persona = persona.get<bool>();
    if (auto it = u.find("type"); it != u.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(uctx + "field 'type' must be a string or null");
      const auto name = it->get<std::string>();
      out.persona_type = parse_persona_type(name);
      if (!out.persona_type) throw DataError(uctx + "unknown persona type '" + name + "'");
    }
    if (auto it = u.find("value"); it != u.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(uctx + "field 'value' must be a string or null");
      out.persona_value = it->get<std::string>();
    }
    d.utterances.push_back(std::move(out));
  }
  return d;
}

Corpus read_corpus(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path.string());
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where(path, line_no) + "malformed JSON: " + e.what());
    }
    auto d = parse_dialogue(obj, where(path, line_no));
    if (strict) {
      if (!ids.insert(d.id).second) throw DataError(where(path, line_no) + "duplicate dialogue id " + d.id);
      std::vector<Violation> v;
      check_dialogue(d, v);
      if (!v.empty()) {
        std::string loc = "dialogue " + d.id;
        if (v[0].utterance_index) loc += " utterance " + std::to_string(*v[0].utterance_index);
        throw DataError(where(path, line_no) + "invariant violation (" + v[0].rule + ") in " + loc);
      }
    }
    corpus.add(std::move(d));
  }
  return corpus;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) { return read_corpus(path, true); }

Corpus read_corpus_unchecked(const std::filesystem::path& path) { return read_corpus(path, false); }

std::string serialize_dialogue(const Dialogue& d) {
  ordered_json obj;
  obj["id"] = d.id;
  obj["split"] = to_string(d.split);
  auto utts = ordered_json::array();
  for (const auto& u : d.utterances) {
    ordered_json o;
    o["speaker"] = u.speaker_id;
    o["text"] = u.text;
    o["persona"] = u.has_persona;
    o["type"] = u.persona_type ? ordered_json(std::string(to_string(*u.persona_type))) : ordered_json();
    o["value"] = u.persona_value ? ordered_json(*u.persona_value) : ordered_json();
    utts.push_back(std::move(o));
  }
  obj["utterances"] = std::move(utts);
  return obj.dump();
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path.string());
  for (auto s : kAllSplits)
    for (const auto& d : corpus.split(s)) out << serialize_dialogue(d) << '\n';
}

std::vector<Violation> validate_annotations(const Corpus& corpus) {
  std::vector<Violation> out;
  std::set<std::string> ids;
  for (auto s : kAllSplits) {
    for (const auto& d : corpus.split(s)) {
      if (!ids.insert(d.id).second) out.push_back({d.id, std::nullopt, "duplicate-id"});
      check_dialogue(d, out);
    }
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (auto s : kAllSplits) {
    const auto& dialogues = corpus.split(s);
    auto& st = stats.splits[static_cast<std::size_t>(s)];
    st.present = !dialogues.empty();
    st.dialogues = dialogues.size();
    std::size_t speakers = 0;
    for (const auto& d : dialogues) {
      st.utterances += d.utterances.size();
      speakers += d.speakers().size();
      for (const auto& u : d.utterances) {
        if (!u.has_persona) continue;
        ++st.persona_utterances;
        if (u.persona_type) ++st.type_counts[index_of(*u.persona_type)];
      }
    }
    if (st.dialogues > 0) {
      const auto n = static_cast<double>(st.dialogues);
      st.mean_speakers_per_dialogue = static_cast<double>(speakers) / n;
      st.mean_persona_per_dialogue = static_cast<double>(st.persona_utterances) / n;
    }
  }
  return stats;
}

std::string render_stats(const CorpusStats& stats) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "set" << std::right << std::setw(8) << "#dlg" << std::setw(8)
     << "#utt" << std::setw(12) << "avg#sp/dlg" << std::setw(12) << "#persona" << std::setw(14)
     << "avg#pers/dlg";
  for (auto t : kAllPersonaTypes) os << std::setw(12) << to_string(t);
  os << '\n';
  for (auto s : kAllSplits) {
    const auto& st = stats.of(s);
    os << std::left << std::setw(6) << to_string(s) << std::right;
    if (!st.present) {
      os << std::setw(8) << "absent" << '\n';
      continue;
    }
    os << std::setw(8) << st.dialogues << std::setw(8) << st.utterances << std::setw(12) << std::fixed
       << std::setprecision(2) << st.mean_speakers_per_dialogue << std::setw(12) << st.persona_utterances
       << std::setw(14) << st.mean_persona_per_dialogue;
    for (auto c : st.type_counts) os << std::setw(12) << c;
    os << '\n';
  }
  return os.str();
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open annotation file: " + path.string());
  AnnotationSet set;
  std::map<std::string, std::size_t> item_index;
  std::vector<std::tuple<std::size_t, std::string, std::optional<std::string>>> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where(path, line_no) + "malformed JSON: " + e.what());
    }
    const auto ctx = where(path, line_no);
    if (!obj.is_object()) throw DataError(ctx + "expected a JSON object");
    const auto item = require_string(obj, "item", ctx);
    const auto annotator = require_string(obj, "annotator", ctx);
    std::optional<std::string> label;
    const auto& l = require_field(obj, "label", ctx);
    if (l.is_string()) {
      label = l.get<std::string>();
    } else if (!l.is_null()) {
      throw DataError(ctx + "field 'label' must be a string or null");
    }
    auto [it, inserted] = item_index.emplace(item, set.item_ids.size());
    if (inserted) set.item_ids.push_back(item);
    records.emplace_back(it->second, annotator, std::move(label));
  }
  for (const auto& [item, annotator, label] : records) {
    auto& labels = set.labels[annotator];
    labels.resize(set.item_ids.size());
    if (labels[item]) {
      throw DataError(path.string() + ": annotator " + annotator + " labels item " +
                      set.item_ids[item] + " twice");
    }
    labels[item] = label;
  }
  for (auto& [annotator, labels] : set.labels) labels.resize(set.item_ids.size());
  return set;
}

double krippendorff_alpha(const AnnotationSet& annotations) {
  if (annotations.labels.size() < 2) throw UsageError("agreement needs at least two annotators");
  const std::size_t items = annotations.item_ids.size();
  for (const auto& [annotator, labels] : annotations.labels) {
    if (labels.size() != items) {
      throw UsageError("annotator " + annotator + " has " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(items) + " items");
    }
  }

  std::map<std::string, std::size_t> category;
  for (const auto& [annotator, labels] : annotations.labels)
    for (const auto& l : labels)
      if (l) category.emplace(*l, 0);
  std::size_t next = 0;
  for (auto& [name, idx] : category) idx = next++;
  const std::size_t k = category.size();

  // Coincidence matrix: every ordered pair of labels within an item adds
  // 1 / (m_u - 1), where m_u is the item's label count.
  std::vector<double> coincidence(k * k, 0.0);
  bool any_pairable = false;
  for (std::size_t item = 0; item < items; ++item) {
    std::vector<std::size_t> values;
    for (const auto& [annotator, labels] : annotations.labels)
      if (labels[item]) values.push_back(category.at(*labels[item]));
    if (values.size() < 2) continue;
    any_pairable = true;
    const double w = 1.0 / static_cast<double>(values.size() - 1);
    for (std::size_t i = 0; i < values.size(); ++i)
      for (std::size_t j = 0; j < values.size(); ++j)
        if (i != j) coincidence[values[i] * k + values[j]] += w;
  }
  if (!any_pairable) throw DataError("agreement undefined: no item carries two or more labels");

  std::vector<double> marginal(k, 0.0);
  double n = 0.0;
  double observed = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < k; ++j) {
      marginal[c] += coincidence[c * k + j];
      if (c != j) observed += coincidence[c * k + j];
    }
  for (double m : marginal) n += m;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < k; ++j)
      if (c != j) expected += marginal[c] * marginal[j];
  if (expected == 0.0) return 1.0;
  return 1.0 - (n - 1.0) * observed / expected;
}

}  // namespace spot
