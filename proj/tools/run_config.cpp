#include "run_config.hpp"

#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "spot/error.hpp"

namespace spot::cli {

namespace {

std::string default_output() {
  const char* env = std::getenv("SPOT_OUTPUT_DIR");
  return env && *env ? env : "spot-out";
}

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"corpus", ""},
      {"mode", "standalone"},
      {"split", "test"},
      {"threads", "1"},
      {"discovery.embed_dim", "32"},
      {"discovery.hidden_dim", "32"},
      {"discovery.num_layers", "1"},
      {"discovery.num_heads", "2"},
      {"discovery.dropout", "0"},
      {"discovery.max_sequence_length", "48"},
      {"discovery.epochs", "40"},
      {"discovery.learning_rate", "0.003"},
      {"discovery.batch_dialogues", "4"},
      {"discovery.use_smote", "true"},
      {"discovery.smote_k", "5"},
      {"discovery.smote_ratio", "1.0"},
      {"discovery.head_batch", "32"},
      {"discovery.threshold", "0.5"},
      {"typeid.embed_dim", "32"},
      {"typeid.hidden_dim", "16"},
      {"typeid.num_layers", "1"},
      {"typeid.num_heads", "2"},
      {"typeid.dropout", "0"},
      {"typeid.max_sequence_length", "48"},
      {"typeid.epochs", "30"},
      {"typeid.learning_rate", "0.003"},
      {"typeid.batch_size", "8"},
      {"typeid.boundary_epochs", "400"},
      {"typeid.boundary_learning_rate", "0.05"},
      {"typeid.disable_speaker_module", "false"},
      {"typeid.disable_pretrained_context", "false"},
      {"typeid.context_vectors", ""},
      {"valueex.embed_dim", "32"},
      {"valueex.hidden_dim", "64"},
      {"valueex.num_layers", "1"},
      {"valueex.num_heads", "2"},
      {"valueex.dropout", "0"},
      {"valueex.max_sequence_length", "48"},
      {"valueex.epochs", "60"},
      {"valueex.learning_rate", "0.003"},
      {"valueex.batch_size", "8"},
      {"valueex.max_length", "16"},
      {"valueex.beam_width", "1"},
      {"valueex.type_control", "false"},
      {"evaluate.models", ""},
      {"evaluate.discovery_stage", "model"},
      {"evaluate.type_stage", "model"},
      {"evaluate.value_stage", "model"},
      {"evaluate.exemplar_limit", "10"},
  };
  return d;
}

bool known(const std::string& key) { return key == "seed" || key == "output" || defaults().contains(key); }

}  // namespace

RunConfig::RunConfig() : values_(defaults()) { values_["output"] = default_output(); }

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw UsageError("unknown config key '" + key + "'");
  values_[key] = value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError("config " + path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) set(name + "." + key, leaf.data());
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override must look like key=value: " + assignment);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("config key '" + key + "' is not set");
  return it->second;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const auto& v = get(key);
  char* end = nullptr;
  const auto n = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || v[0] == '-') throw UsageError("config '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(n);
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw UsageError("config '" + key + "' must be a number");
  return d;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config '" + key + "' must be true or false");
}

std::uint64_t RunConfig::seed() const {
  if (!values_.contains("seed")) throw UsageError("a seed is required (config 'seed' or --seed)");
  const auto& v = values_.at("seed");
  char* end = nullptr;
  const auto s = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || v[0] == '-') throw UsageError("seed must be a non-negative integer");
  return s;
}

std::filesystem::path RunConfig::corpus_path() const {
  const auto& c = get("corpus");
  if (c.empty()) throw UsageError("no corpus given (config 'corpus' or --corpus)");
  return c;
}

nn::EncoderConfig RunConfig::encoder(const std::string& section) const {
  nn::EncoderConfig c;
  c.embed_dim = get_size(section + ".embed_dim");
  c.hidden_dim = get_size(section + ".hidden_dim");
  c.num_layers = get_size(section + ".num_layers");
  c.num_heads = get_size(section + ".num_heads");
  c.dropout_rate = get_double(section + ".dropout");
  c.max_sequence_length = get_size(section + ".max_sequence_length");
  c.seed = seed();
  c.vocab_size = 1;
  c.validate();
  return c;
}

DiscoveryTrainConfig RunConfig::discovery_training() const {
  DiscoveryTrainConfig t;
  t.epochs = get_size("discovery.epochs");
  t.learning_rate = get_double("discovery.learning_rate");
  t.batch_dialogues = get_size("discovery.batch_dialogues");
  t.use_smote = get_bool("discovery.use_smote");
  t.smote_k = get_size("discovery.smote_k");
  t.smote_ratio = get_double("discovery.smote_ratio");
  t.head_batch = get_size("discovery.head_batch");
  t.decision_threshold = get_double("discovery.threshold");
  t.seed = seed();
  if (t.batch_dialogues == 0 || t.head_batch == 0) throw UsageError("discovery batch sizes must be positive");
  return t;
}

TypeIdTrainConfig RunConfig::typeid_training() const {
  TypeIdTrainConfig t;
  t.epochs = get_size("typeid.epochs");
  t.learning_rate = get_double("typeid.learning_rate");
  t.batch_size = get_size("typeid.batch_size");
  t.boundary.epochs = get_size("typeid.boundary_epochs");
  t.boundary.learning_rate = get_double("typeid.boundary_learning_rate");
  t.seed = seed();
  return t;
}

TypeIdOptions RunConfig::typeid_options() const {
  TypeIdOptions o;
  o.disable_speaker_module = get_bool("typeid.disable_speaker_module");
  o.disable_pretrained_context = get_bool("typeid.disable_pretrained_context");
  o.context_mode = get("typeid.context_vectors").empty() ? ContextMode::TrainableSmall : ContextMode::ExternalFrozen;
  return o;
}

ValueExTrainConfig RunConfig::valueex_training() const {
  ValueExTrainConfig t;
  t.epochs = get_size("valueex.epochs");
  t.learning_rate = get_double("valueex.learning_rate");
  t.batch_size = get_size("valueex.batch_size");
  t.seed = seed();
  return t;
}

ValueExOptions RunConfig::valueex_options() const {
  ValueExOptions o;
  o.max_length = get_size("valueex.max_length");
  o.beam_width = get_size("valueex.beam_width");
  o.type_control = get_bool("valueex.type_control");
  o.validate();
  return o;
}

std::vector<std::pair<std::string, std::string>> RunConfig::snapshot() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : values_)
    if (k != "output") out.emplace_back(k, v);
  return out;
}

std::string RunConfig::snapshot_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : snapshot()) os << k << " = " << v << '\n';
  return os.str();
}

}  // namespace spot::cli
