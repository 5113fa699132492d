#include "spot/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "spot/discovery.hpp"
#include "spot/error.hpp"
#include "spot/typeid.hpp"
#include "spot/valueex.hpp"

namespace spot {

using ojson = nlohmann::ordered_json;

std::vector<bool> ModelDiscoveryStage::predict(const Dialogue& dialogue) const {
  return predict_discovery(model_, dialogue).positive;
}

std::vector<bool> GoldDiscoveryStage::predict(const Dialogue& dialogue) const {
  std::vector<bool> out;
  for (const auto& u : dialogue.utterances) out.push_back(u.has_persona);
  return out;
}

PersonaType ModelTypeStage::predict(const TypedInstance& instance) const {
  return predict_instance_type(model_, context_, instance);
}

PersonaType GoldTypeStage::predict(const TypedInstance& instance) const {
  if (!instance.gold_type) throw DataError("gold type stage: instance " + instance.id() + " has no gold type");
  return *instance.gold_type;
}

std::string ModelValueStage::generate(const TypedInstance& instance, const Dialogue& dialogue,
                                      PersonaType type) const {
  return generate_value(model_, instance, dialogue, type);
}

std::string GoldValueStage::generate(const TypedInstance& instance, const Dialogue&, PersonaType) const {
  return instance.gold_value.value_or("");
}

std::string_view to_string(EvalMode mode) { return mode == EvalMode::Standalone ? "standalone" : "pipeline"; }

std::optional<EvalMode> parse_eval_mode(std::string_view name) {
  if (name == "standalone") return EvalMode::Standalone;
  if (name == "pipeline") return EvalMode::Pipeline;
  return std::nullopt;
}

namespace {

const std::vector<std::string>& type_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> l;
    for (auto t : kAllPersonaTypes) l.emplace_back(to_string(t));
    return l;
  }();
  return labels;
}

const std::vector<std::string> kBinaryLabels = {"no", "yes"};

std::string yes_no(bool b) { return b ? "yes" : "no"; }

// Everything one dialogue contributes; reduced in split order afterwards.
struct DialogueWork {
  std::vector<bool> discovered;
  std::vector<StageInstance> instances;
  std::vector<std::optional<std::size_t>> type_preds;  // per gold persona utterance
  std::vector<std::size_t> type_golds;
  std::vector<std::string> candidates, references;
  std::size_t value_missed = 0;
  std::vector<Exemplar> false_positives, false_negatives;
};

DialogueWork score_dialogue(const Dialogue& d, const Stages& stages, EvalMode mode) {
  DialogueWork w;
  w.discovered = stages.discovery->predict(d);
  if (w.discovered.size() != d.utterances.size()) {
    throw UsageError("discovery stage returned " + std::to_string(w.discovered.size()) + " labels for " +
                     std::to_string(d.utterances.size()) + " utterances in " + d.id);
  }
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    const auto& u = d.utterances[i];
    if (w.discovered[i] != u.has_persona) {
      auto& list = w.discovered[i] ? w.false_positives : w.false_negatives;
      list.push_back({d.id, i, u.speaker_id, u.text, yes_no(u.has_persona), yes_no(w.discovered[i])});
    }
  }

  if (mode == EvalMode::Standalone) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      const auto& u = d.utterances[i];
      if (!u.has_persona) continue;
      const auto inst = make_instance(d, i);
      if (!inst.gold_type) throw DataError("utterance " + inst.id() + " has persona but no type");
      const auto t = stages.type->predict(inst);
      w.type_preds.emplace_back(index_of(t));
      w.type_golds.push_back(index_of(*inst.gold_type));
      std::string value;
      if (inst.gold_value) {
        value = stages.value->generate(inst, d, *inst.gold_type);
        w.candidates.push_back(value);
        w.references.push_back(*inst.gold_value);
      }
      w.instances.push_back({d.id, i, t, value});
    }
    return w;
  }

  std::map<std::size_t, std::size_t> reached;  // utterance -> position in instances
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    if (!w.discovered[i]) continue;
    const auto inst = make_instance(d, i);
    const auto t = stages.type->predict(inst);
    reached[i] = w.instances.size();
    w.instances.push_back({d.id, i, t, stages.value->generate(inst, d, t)});
  }
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    const auto& u = d.utterances[i];
    if (!u.has_persona) continue;
    if (!u.persona_type) throw DataError("utterance " + d.id + "#" + std::to_string(i) + " has persona but no type");
    w.type_golds.push_back(index_of(*u.persona_type));
    auto it = reached.find(i);
    if (it != reached.end()) {
      w.type_preds.emplace_back(index_of(w.instances[it->second].type));
    } else {
      w.type_preds.emplace_back(std::nullopt);
    }
    if (u.persona_value) {
      if (it != reached.end()) {
        w.candidates.push_back(w.instances[it->second].value);
      } else {
        w.candidates.emplace_back();
        ++w.value_missed;
      }
      w.references.push_back(*u.persona_value);
    }
  }
  return w;
}

std::vector<DialogueWork> score_all(const std::vector<Dialogue>& dialogues, const Stages& stages, EvalMode mode,
                                    std::size_t threads) {
  std::vector<DialogueWork> work(dialogues.size());
  std::vector<std::exception_ptr> errors(dialogues.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dialogues.size(); i = next++) {
      try {
        work[i] = score_dialogue(dialogues[i], stages, mode);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, dialogues.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return work;
}

EvalReport evaluate(const Corpus& corpus, const Stages& stages, const EvalOptions& options, EvalMode mode,
                    StageOutputs* outputs) {
  if (!stages.discovery || !stages.type || !stages.value) throw UsageError("evaluation needs all three stages");
  const auto& dialogues = corpus.split(options.split);
  if (dialogues.empty()) {
    throw DataError("the " + std::string(to_string(options.split)) + " split is empty");
  }
  const auto work = score_all(dialogues, stages, mode, options.threads);

  EvalReport report;
  report.mode = mode;
  report.split = std::string(to_string(options.split));
  report.provenance = {stages.discovery->name(), stages.type->name(), stages.value->name(),
                       mode == EvalMode::Standalone, mode == EvalMode::Standalone};

  std::vector<bool> preds, golds;
  std::vector<std::optional<std::size_t>> type_preds;
  std::vector<std::size_t> type_golds;
  std::vector<std::string> cands, refs;
  auto& r = report.results;
  StageOutputs out;
  out.provenance = report.provenance;
  for (std::size_t k = 0; k < dialogues.size(); ++k) {
    const auto& w = work[k];
    for (std::size_t i = 0; i < w.discovered.size(); ++i) {
      preds.push_back(w.discovered[i]);
      golds.push_back(dialogues[k].utterances[i].has_persona);
    }
    type_preds.insert(type_preds.end(), w.type_preds.begin(), w.type_preds.end());
    type_golds.insert(type_golds.end(), w.type_golds.begin(), w.type_golds.end());
    cands.insert(cands.end(), w.candidates.begin(), w.candidates.end());
    refs.insert(refs.end(), w.references.begin(), w.references.end());
    r.value.missed += w.value_missed;
    for (const auto& e : w.false_positives)
      if (r.false_positives.size() < options.exemplar_limit) r.false_positives.push_back(e);
    for (const auto& e : w.false_negatives)
      if (r.false_negatives.size() < options.exemplar_limit) r.false_negatives.push_back(e);
    out.discovery.emplace_back(dialogues[k].id, w.discovered);
    out.instances.insert(out.instances.end(), w.instances.begin(), w.instances.end());
  }

  {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i]) {
        ++(golds[i] ? tp : fp);
      } else {
        ++(golds[i] ? fn : tn);
      }
    }
    r.discovery.scores = prf1_from_counts(tp, fp, fn, tn);
  }
  {
    std::vector<std::string> p, g;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      p.push_back(yes_no(preds[i]));
      g.push_back(yes_no(golds[i]));
    }
    r.discovery.confusion = confusion(p, g, kBinaryLabels);
  }

  const auto& labels = type_labels();
  r.type.evaluated = type_golds.size();
  if (type_golds.empty()) {
    for (const auto& l : labels) r.type.scores.per_class.push_back({l});
  } else {
    r.type.scores = multiclass_scores(type_preds, type_golds, labels);
  }
  {
    std::vector<std::string> p, g;
    for (std::size_t i = 0; i < type_golds.size(); ++i) {
      if (!type_preds[i]) {
        ++r.type.missed;
        continue;
      }
      p.push_back(labels[*type_preds[i]]);
      g.push_back(labels[type_golds[i]]);
    }
    r.type.confusion = confusion(p, g, labels);
  }
  r.value.scores = mean_generation_scores(cands, refs);
  if (outputs) *outputs = std::move(out);
  return report;
}

}  // namespace

EvalReport run_standalone(const Corpus& corpus, const Stages& stages, const EvalOptions& options,
                          StageOutputs* outputs) {
  return evaluate(corpus, stages, options, EvalMode::Standalone, outputs);
}

EvalReport run_pipeline(const Corpus& corpus, const Stages& stages, const EvalOptions& options,
                        StageOutputs* outputs) {
  return evaluate(corpus, stages, options, EvalMode::Pipeline, outputs);
}

std::vector<SpeakerProfile> assemble_profiles(const Dialogue& dialogue, const StageOutputs& outputs) {
  const std::vector<bool>* discovered = nullptr;
  for (const auto& [id, flags] : outputs.discovery)
    if (id == dialogue.id) discovered = &flags;

  std::vector<const StageInstance*> mine;
  for (const auto& inst : outputs.instances) {
    if (inst.dialogue_id != dialogue.id) continue;
    if (inst.index >= dialogue.utterances.size()) {
      throw UsageError("profile: instance " + inst.dialogue_id + "#" + std::to_string(inst.index) +
                       " is outside the dialogue");
    }
    if (discovered && !(*discovered)[inst.index]) {
      throw UsageError("profile: utterance " + std::to_string(inst.index) + " of " + dialogue.id +
                       " was not discovered");
    }
    mine.push_back(&inst);
  }
  std::stable_sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->index < b->index; });

  std::vector<SpeakerProfile> profiles;
  for (const auto* inst : mine) {
    const auto& speaker = dialogue.utterances[inst->index].speaker_id;
    auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.speaker_id == speaker; });
    if (it == profiles.end()) {
      profiles.push_back({speaker, {}});
      it = profiles.end() - 1;
    }
    it->entries.push_back({inst->type, inst->value, inst->index});
  }
  return profiles;
}

std::string profiles_to_json(const std::string& dialogue_id, const std::vector<SpeakerProfile>& profiles) {
  ojson j;
  j["dialogue"] = dialogue_id;
  j["profiles"] = ojson::array();
  for (const auto& p : profiles) {
    ojson entries = ojson::array();
    for (const auto& e : p.entries) {
      entries.push_back({{"type", std::string(to_string(e.type))}, {"value", e.value}, {"evidence", e.evidence}});
    }
    j["profiles"].push_back({{"speaker", p.speaker_id}, {"entries", entries}});
  }
  return j.dump();
}

namespace {

ojson binary_json(const BinaryScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn},
          {"tn", s.tn}};
}

ojson confusion_json(const ConfusionMatrix& m) {
  ojson rows = ojson::array();
  const std::size_t k = m.labels.size();
  for (std::size_t i = 0; i < k; ++i) {
    ojson row = ojson::array();
    for (std::size_t j = 0; j < k; ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return {{"labels", m.labels}, {"counts", rows}};
}

ojson exemplars_json(const std::vector<Exemplar>& list) {
  ojson a = ojson::array();
  for (const auto& e : list) {
    a.push_back({{"dialogue", e.dialogue_id},
                 {"index", e.index},
                 {"speaker", e.speaker},
                 {"utterance", e.text},
                 {"gold", e.gold},
                 {"predicted", e.predicted}});
  }
  return a;
}

ojson results_ojson(const EvalResults& r) {
  ojson per_class = ojson::array();
  for (const auto& c : r.type.scores.per_class) {
    per_class.push_back({{"label", c.label},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support}});
  }
  const auto& g = r.value.scores;
  return {{"discovery", {{"scores", binary_json(r.discovery.scores)}, {"confusion", confusion_json(r.discovery.confusion)}}},
          {"type",
           {{"per_class", per_class},
            {"weighted_f1", r.type.scores.weighted_f1},
            {"evaluated", r.type.evaluated},
            {"missed", r.type.missed},
            {"confusion", confusion_json(r.type.confusion)}}},
          {"value",
           {{"rouge1", g.rouge1},
            {"rouge2", g.rouge2},
            {"bleu1", g.bleu1},
            {"bleu2", g.bleu2},
            {"bleu3", g.bleu3},
            {"count", g.count},
            {"missed", r.value.missed}}},
          {"exemplars", {{"false_positives", exemplars_json(r.false_positives)},
                         {"false_negatives", exemplars_json(r.false_negatives)}}}};
}

ConfusionMatrix confusion_from(const ojson& j) {
  ConfusionMatrix m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& row : j.at("counts"))
    for (const auto& c : row) m.counts.push_back(c.get<std::size_t>());
  if (m.counts.size() != m.labels.size() * m.labels.size()) throw DataError("report: malformed confusion matrix");
  return m;
}

std::vector<Exemplar> exemplars_from(const ojson& a) {
  std::vector<Exemplar> out;
  for (const auto& e : a) {
    out.push_back({e.at("dialogue").get<std::string>(), e.at("index").get<std::size_t>(),
                   e.at("speaker").get<std::string>(), e.at("utterance").get<std::string>(),
                   e.at("gold").get<std::string>(), e.at("predicted").get<std::string>()});
  }
  return out;
}

}  // namespace

std::string results_to_json(const EvalResults& results) { return results_ojson(results).dump(2); }

std::string report_to_json(const EvalReport& report) {
  ojson config = ojson::object();
  for (const auto& [k, v] : report.config) config[k] = v;
  const auto& p = report.provenance;
  ojson j = {{"mode", std::string(to_string(report.mode))},
             {"split", report.split},
             {"provenance",
              {{"discovery_stage", p.discovery_stage},
               {"type_stage", p.type_stage},
               {"value_stage", p.value_stage},
               {"type_inputs", p.type_inputs_gold ? "gold" : "predicted"},
               {"value_inputs", p.value_inputs_gold ? "gold" : "predicted"}}},
             {"scoring",
              "pipeline: gold persona utterances missed by discovery count as untyped and as empty "
              "generations; generation is scored over gold-valued utterances only"},
             {"config", config},
             {"results", results_ojson(report.results)}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = ojson::parse(text);
    EvalReport r;
    const auto mode = parse_eval_mode(j.at("mode").get<std::string>());
    if (!mode) throw DataError("report: unknown mode");
    r.mode = *mode;
    r.split = j.at("split").get<std::string>();
    const auto& p = j.at("provenance");
    r.provenance = {p.at("discovery_stage").get<std::string>(), p.at("type_stage").get<std::string>(),
                    p.at("value_stage").get<std::string>(), p.at("type_inputs").get<std::string>() == "gold",
                    p.at("value_inputs").get<std::string>() == "gold"};
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    const auto& res = j.at("results");
    auto& out = r.results;
    const auto& ds = res.at("discovery").at("scores");
    out.discovery.scores = {ds.at("precision").get<double>(), ds.at("recall").get<double>(),
                            ds.at("f1").get<double>(),        ds.at("tp").get<std::size_t>(),
                            ds.at("fp").get<std::size_t>(),   ds.at("fn").get<std::size_t>(),
                            ds.at("tn").get<std::size_t>()};
    out.discovery.confusion = confusion_from(res.at("discovery").at("confusion"));
    const auto& t = res.at("type");
    for (const auto& c : t.at("per_class")) {
      out.type.scores.per_class.push_back({c.at("label").get<std::string>(), c.at("precision").get<double>(),
                                           c.at("recall").get<double>(), c.at("f1").get<double>(),
                                           c.at("support").get<std::size_t>()});
    }
    out.type.scores.weighted_f1 = t.at("weighted_f1").get<double>();
    out.type.evaluated = t.at("evaluated").get<std::size_t>();
    out.type.missed = t.at("missed").get<std::size_t>();
    out.type.confusion = confusion_from(t.at("confusion"));
    const auto& v = res.at("value");
    out.value.scores = {v.at("rouge1").get<double>(), v.at("rouge2").get<double>(), v.at("bleu1").get<double>(),
                        v.at("bleu2").get<double>(),  v.at("bleu3").get<double>(),  v.at("count").get<std::size_t>()};
    out.value.missed = v.at("missed").get<std::size_t>();
    out.false_positives = exemplars_from(res.at("exemplars").at("false_positives"));
    out.false_negatives = exemplars_from(res.at("exemplars").at("false_negatives"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

namespace {

// Published reference numbers for the full-size system, per mode.
struct Reference {
  double precision, recall, f1;
  double type_f1[kNumPersonaTypes];  // persona type order
  double weighted;
  double r1, r2, b1, b2, b3;  // x100
};

constexpr Reference kStandaloneReference{0.30, 0.50, 0.38, {0.59, 0.60, 0.46, 0.28, 0.32}, 0.51,
                                         29.51, 2.97, 27.16, 2.27, 0.60};
constexpr Reference kPipelineReference{0.30, 0.50, 0.38, {0.56, 0.50, 0.35, 0.21, 0.26}, 0.43,
                                       23.40, 0.60, 22.12, 1.12, 0.08};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string row(const std::string& name, const std::string& measured, const std::string& reference) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "  %-22s %10s %10s\n", name.c_str(), measured.c_str(), reference.c_str());
  return buf;
}

void render_confusion(std::ostringstream& os, const ConfusionMatrix& m) {
  char buf[64];
  os << "  " << std::string(12, ' ');
  for (const auto& l : m.labels) {
    std::snprintf(buf, sizeof buf, "%11s", l.c_str());
    os << buf;
  }
  os << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    std::snprintf(buf, sizeof buf, "  %-12s", m.labels[i].c_str());
    os << buf;
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%11zu", m.at(i, j));
      os << buf;
    }
    os << '\n';
  }
}

void render_exemplars(std::ostringstream& os, const std::vector<Exemplar>& list) {
  if (list.empty()) {
    os << "  none\n";
    return;
  }
  for (const auto& e : list) {
    os << "  [" << e.dialogue_id << " #" << e.index << "] " << e.speaker << ": " << e.text << "\n"
       << "      true: " << e.gold << "  predicted: " << e.predicted << '\n';
  }
}

}  // namespace

std::string render_report(const EvalReport& report) {
  const auto& ref = report.mode == EvalMode::Standalone ? kStandaloneReference : kPipelineReference;
  const auto& r = report.results;
  std::ostringstream os;
  os << "SPOT evaluation: " << to_string(report.mode) << " (" << report.split << " split)\n";
  const auto& p = report.provenance;
  os << "stages: discovery=" << p.discovery_stage << " type=" << p.type_stage << " value=" << p.value_stage
     << "; type inputs " << (p.type_inputs_gold ? "gold" : "predicted") << ", value inputs "
     << (p.value_inputs_gold ? "gold" : "predicted") << "\n\n";

  os << "Persona discovery\n" << row("", "measured", "reference");
  os << row("precision", fmt("%.4f", r.discovery.scores.precision), fmt("%.2f", ref.precision));
  os << row("recall", fmt("%.4f", r.discovery.scores.recall), fmt("%.2f", ref.recall));
  os << row("f1", fmt("%.4f", r.discovery.scores.f1), fmt("%.2f", ref.f1));

  os << "\nPersona-type identification (F1)\n" << row("", "measured", "reference");
  for (std::size_t k = 0; k < r.type.scores.per_class.size() && k < kNumPersonaTypes; ++k) {
    const auto& c = r.type.scores.per_class[k];
    os << row(c.label + " (n=" + std::to_string(c.support) + ")", fmt("%.4f", c.f1), fmt("%.2f", ref.type_f1[k]));
  }
  os << row("weighted", fmt("%.4f", r.type.scores.weighted_f1), fmt("%.2f", ref.weighted));
  os << "  gold persona utterances: " << r.type.evaluated << ", never typed: " << r.type.missed << '\n';

  const auto& g = r.value.scores;
  os << "\nPersona-value extraction (x100)\n" << row("", "measured", "reference");
  os << row("ROUGE-1", fmt("%.2f", 100 * g.rouge1), fmt("%.2f", ref.r1));
  os << row("ROUGE-2", fmt("%.2f", 100 * g.rouge2), fmt("%.2f", ref.r2));
  os << row("BLEU-1", fmt("%.2f", 100 * g.bleu1), fmt("%.2f", ref.b1));
  os << row("BLEU-2", fmt("%.2f", 100 * g.bleu2), fmt("%.2f", ref.b2));
  os << row("BLEU-3", fmt("%.2f", 100 * g.bleu3), fmt("%.2f", ref.b3));
  os << "  gold values scored: " << g.count << ", never generated: " << r.value.missed << '\n';

  os << "\nDiscovery confusion (rows true, columns predicted)\n";
  render_confusion(os, r.discovery.confusion);
  os << "\nType confusion (rows true, columns predicted)\n";
  render_confusion(os, r.type.confusion);

  os << "\nFalse positives (discovery)\n";
  render_exemplars(os, r.false_positives);
  os << "\nFalse negatives (discovery)\n";
  render_exemplars(os, r.false_negatives);

  os << "\nScoring convention: in pipeline mode gold persona utterances that discovery misses count as\n"
        "untyped and as empty generations; generation metrics cover gold-valued utterances only.\n"
        "Reference columns are the published full-scale numbers, shown for comparison only.\n";
  return os.str();
}

std::pair<std::filesystem::path, std::filesystem::path> emit_report(const EvalReport& report,
                                                                     const std::filesystem::path& directory,
                                                                     const std::string& stem) {
  std::filesystem::create_directories(directory);
  const auto json_path = directory / (stem + ".json");
  const auto text_path = directory / (stem + ".txt");
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + json_path.string());
    out << report_to_json(report);
  }
  {
    std::ofstream out(text_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + text_path.string());
    out << render_report(report);
  }
  return {json_path, text_path};
}

}  // namespace spot
