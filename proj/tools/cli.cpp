#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "spot/corpus.hpp"
#include "spot/discovery.hpp"
#include "spot/error.hpp"
#include "spot/pipeline.hpp"
#include "spot/typeid.hpp"
#include "spot/valueex.hpp"

namespace spot::cli {

namespace {

using ojson = nlohmann::ordered_json;

// Flags shared by every subcommand that takes a RunConfig.
struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::string> seed, corpus, output, split, threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config,-c", f.config, "key = value config file");
  cmd->add_option("--set", f.overrides, "override a config key (section.key=value)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--corpus", f.corpus, "corpus JSONL");
  cmd->add_option("--output,-o", f.output, "output directory");
  cmd->add_option("--split", f.split, "train, dev or test");
  cmd->add_option("--threads", f.threads, "dialogues evaluated concurrently");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig c;
  if (!f.config.empty()) c.load_file(f.config);
  for (const auto& o : f.overrides) c.apply_override(o);
  if (f.seed) c.set("seed", *f.seed);
  if (f.corpus) c.set("corpus", *f.corpus);
  if (f.output) c.set("output", *f.output);
  if (f.split) c.set("split", *f.split);
  if (f.threads) c.set("threads", *f.threads);
  c.seed();  // mandatory
  return c;
}

Split config_split(const RunConfig& c) {
  const auto s = parse_split(c.get("split"));
  if (!s) throw UsageError("unknown split '" + c.get("split") + "'");
  return *s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string losses_json(const RunConfig& c, double initial, const std::vector<double>& losses,
                        const std::vector<std::string>& warnings) {
  ojson j;
  j["initial_loss"] = initial;
  j["epoch_losses"] = losses;
  j["warnings"] = warnings;
  ojson cfg = ojson::object();
  for (const auto& [k, v] : c.snapshot()) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

std::vector<TypedInstance> persona_instances(const std::vector<Dialogue>& dialogues, bool need_value) {
  std::vector<TypedInstance> out;
  for (const auto& d : dialogues)
    for (std::size_t i = 0; i < d.utterances.size(); ++i)
      if (d.utterances[i].has_persona && (!need_value || d.utterances[i].persona_value))
        out.push_back(make_instance(d, i));
  return out;
}

ContextEncoder context_encoder(const RunConfig& c) {
  const auto& path = c.get("typeid.context_vectors");
  return path.empty() ? ContextEncoder::trainable() : ContextEncoder::load_external(path);
}

std::filesystem::path models_dir(const RunConfig& c) {
  const auto& m = c.get("evaluate.models");
  return m.empty() ? c.output_dir() : std::filesystem::path(m);
}

int cmd_stats(const std::string& corpus, std::ostream& out) {
  out << render_stats(corpus_stats(load_corpus(corpus)));
  return kSuccess;
}

int cmd_validate(const std::string& corpus, std::ostream& out, std::ostream& err) {
  const auto violations = validate_annotations(read_corpus_unchecked(corpus));
  if (violations.empty()) {
    out << "ok: no annotation violations\n";
    return kSuccess;
  }
  for (const auto& v : violations) {
    err << v.dialogue_id;
    if (v.utterance_index) err << " utterance " << *v.utterance_index;
    err << ": " << v.rule << '\n';
  }
  err << violations.size() << " violation(s)\n";
  return kDataError;
}

int cmd_agreement(const std::string& path, std::ostream& out) {
  const auto set = load_annotations(path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", krippendorff_alpha(set));
  out << "items: " << set.item_ids.size() << "\nannotators: " << set.labels.size() << "\nalpha: " << buf << '\n';
  return kSuccess;
}

int cmd_train_discovery(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(c.corpus_path());
  auto result = train_discovery(corpus, c.encoder("discovery"), c.discovery_training());
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  const auto dir = c.output_dir() / "discovery";
  result.model.save(dir);
  write_text(dir / "train_log.json", losses_json(c, result.initial_loss, result.epoch_losses, result.warnings));
  out << "discovery model written to " << dir.string() << " (final loss "
      << (result.epoch_losses.empty() ? result.initial_loss : result.epoch_losses.back()) << ")\n";
  return kSuccess;
}

int cmd_train_typeid(const RunConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(c.corpus_path());
  const auto instances = persona_instances(corpus.split(Split::Train), false);
  const auto context = context_encoder(c);
  auto result = train_typeid(instances, c.encoder("typeid"), c.typeid_options(), context, c.typeid_training());
  const auto dir = c.output_dir() / "typeid";
  result.model.save(dir);
  write_text(dir / "train_log.json", losses_json(c, result.initial_loss, result.epoch_losses, {}));
  out << "typeid model written to " << dir.string() << " (" << instances.size() << " instances)\n";
  return kSuccess;
}

int cmd_train_valueex(const RunConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(c.corpus_path());
  const auto& train = corpus.split(Split::Train);
  const auto instances = persona_instances(train, true);
  auto result = train_valueex(instances, index_dialogues(train), build_valueex_vocabulary(train),
                              c.encoder("valueex"), c.valueex_options(), c.valueex_training());
  const auto dir = c.output_dir() / "valueex";
  result.model.save(dir);
  write_text(dir / "train_log.json", losses_json(c, result.initial_loss, result.epoch_losses, {}));
  out << "valueex model written to " << dir.string() << " (" << instances.size() << " instances)\n";
  return kSuccess;
}

// Stage objects for evaluate/profile, either loaded models or gold oracles.
struct StageSet {
  std::optional<DiscoveryModel> discovery_model;
  std::optional<TypeIdModel> type_model;
  std::optional<ValueExModel> value_model;
  std::optional<ContextEncoder> context;
  std::unique_ptr<DiscoveryStage> discovery;
  std::unique_ptr<TypeStage> type;
  std::unique_ptr<ValueStage> value;

  Stages view() const { return {discovery.get(), type.get(), value.get()}; }
};

std::string stage_kind(const RunConfig& c, const std::string& key) {
  const auto& v = c.get(key);
  if (v != "model" && v != "gold") throw UsageError(key + " must be 'model' or 'gold'");
  return v;
}

std::unique_ptr<StageSet> build_stages(const RunConfig& c) {
  auto s = std::make_unique<StageSet>();
  const auto dir = models_dir(c);
  if (stage_kind(c, "evaluate.discovery_stage") == "gold") {
    s->discovery = std::make_unique<GoldDiscoveryStage>();
  } else {
    s->discovery_model.emplace(DiscoveryModel::load(dir / "discovery"));
    s->discovery = std::make_unique<ModelDiscoveryStage>(*s->discovery_model);
  }
  if (stage_kind(c, "evaluate.type_stage") == "gold") {
    s->type = std::make_unique<GoldTypeStage>();
  } else {
    s->type_model.emplace(TypeIdModel::load(dir / "typeid"));
    s->context.emplace(context_encoder(c));
    s->type = std::make_unique<ModelTypeStage>(*s->type_model, *s->context);
  }
  if (stage_kind(c, "evaluate.value_stage") == "gold") {
    s->value = std::make_unique<GoldValueStage>();
  } else {
    s->value_model.emplace(ValueExModel::load(dir / "valueex"));
    auto opts = s->value_model->options();
    opts.max_length = c.get_size("valueex.max_length");
    opts.beam_width = c.get_size("valueex.beam_width");
    s->value_model->set_options(opts);
    s->value = std::make_unique<ModelValueStage>(*s->value_model);
  }
  return s;
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions o;
  o.split = config_split(c);
  o.exemplar_limit = c.get_size("evaluate.exemplar_limit");
  o.threads = std::max<std::size_t>(1, c.get_size("threads"));
  return o;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const auto mode = parse_eval_mode(c.get("mode"));
  if (!mode) throw UsageError("mode must be standalone or pipeline");
  const auto corpus = load_corpus(c.corpus_path());
  const auto stages = build_stages(c);
  auto report = *mode == EvalMode::Standalone ? run_standalone(corpus, stages->view(), eval_options(c))
                                              : run_pipeline(corpus, stages->view(), eval_options(c));
  report.config = c.snapshot();
  const auto [json_path, text_path] = emit_report(report, c.output_dir(), "report-" + std::string(to_string(*mode)));
  out << render_report(report) << "\nwritten: " << json_path.string() << ", " << text_path.string() << '\n';
  return kSuccess;
}

int cmd_profile(const RunConfig& c, const std::string& only, std::ostream& out) {
  const auto corpus = load_corpus(c.corpus_path());
  const auto stages = build_stages(c);
  StageOutputs outputs;
  run_pipeline(corpus, stages->view(), eval_options(c), &outputs);
  std::ostringstream lines;
  bool found = only.empty();
  for (const auto& d : corpus.split(config_split(c))) {
    if (!only.empty() && d.id != only) continue;
    found = true;
    lines << profiles_to_json(d.id, assemble_profiles(d, outputs)) << '\n';
  }
  if (!found) throw DataError("dialogue " + only + " is not in the " + c.get("split") + " split");
  const auto path = c.output_dir() / "profiles.jsonl";
  write_text(path, lines.str());
  out << lines.str();
  return kSuccess;
}

int cmd_report(const std::string& input, std::ostream& out) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw DataError("cannot open " + input);
  std::stringstream buf;
  buf << in.rdbuf();
  out << render_report(report_from_json(buf.str()));
  return kSuccess;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker profiling in multiparty dialogue", "spot"};
  app.require_subcommand(1);

  std::string corpus_arg, annotations, input, dialogue;
  auto* stats = app.add_subcommand("stats", "corpus statistics per split");
  stats->add_option("--corpus", corpus_arg, "corpus JSONL")->required();
  auto* validate = app.add_subcommand("validate", "list annotation violations");
  validate->add_option("--corpus", corpus_arg, "corpus JSONL")->required();
  auto* agreement = app.add_subcommand("agreement", "Krippendorff's alpha over an annotation file");
  agreement->add_option("--annotations", annotations, "{item, annotator, label} JSONL")->required();

  CommonFlags flags;
  std::optional<std::string> mode;
  auto* train_d = app.add_subcommand("train-discovery", "train the persona discovery model");
  auto* train_t = app.add_subcommand("train-typeid", "train the persona-type model and its boundaries");
  auto* train_v = app.add_subcommand("train-valueex", "train the persona-value generator");
  auto* evaluate = app.add_subcommand("evaluate", "score the three stages (standalone or pipeline)");
  auto* profile = app.add_subcommand("profile", "assemble speaker profiles from pipeline predictions");
  for (auto* cmd : {train_d, train_t, train_v, evaluate, profile}) add_common(cmd, flags);
  evaluate->add_option("--mode", mode, "standalone or pipeline");
  profile->add_option("--dialogue", dialogue, "only this dialogue");
  auto* report = app.add_subcommand("report", "render a report JSON file as a table");
  report->add_option("--input", input, "report JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "spot: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (stats->parsed()) return cmd_stats(corpus_arg, out);
    if (validate->parsed()) return cmd_validate(corpus_arg, out, err);
    if (agreement->parsed()) return cmd_agreement(annotations, out);
    if (report->parsed()) return cmd_report(input, out);
    auto config = build_config(flags);
    if (mode) config.set("mode", *mode);
    if (train_d->parsed()) return cmd_train_discovery(config, out, err);
    if (train_t->parsed()) return cmd_train_typeid(config, out);
    if (train_v->parsed()) return cmd_train_valueex(config, out);
    if (evaluate->parsed()) return cmd_evaluate(config, out);
    if (profile->parsed()) return cmd_profile(config, dialogue, out);
  } catch (const UsageError& e) {
    err << "spot: " << e.what() << '\n';
    return kUsageError;
  } catch (const DataError& e) {
    err << "spot: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "spot: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  err << "spot: no subcommand\n";
  return kUsageError;
}

}  // namespace spot::cli
