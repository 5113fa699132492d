#include "spot/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "spot/error.hpp"

namespace spot {

void ModelSidecar::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  entries_[key] = buf;
}

const std::string& ModelSidecar::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw DataError("model config is missing '" + key + "'");
  return it->second;
}

double ModelSidecar::get_double(const std::string& key) const {
  const auto& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw DataError("model config '" + key + "' is not a number: " + v);
  return d;
}

std::uint64_t ModelSidecar::get_uint(const std::string& key) const {
  const auto& v = get(key);
  char* end = nullptr;
  const auto u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw DataError("model config '" + key + "' is not an integer: " + v);
  return u;
}

bool ModelSidecar::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw DataError("model config '" + key + "' is not a boolean: " + v);
}

void ModelSidecar::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

ModelSidecar ModelSidecar::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ModelSidecar side;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError(path.string() + ": malformed line: " + line);
    side.entries_[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return side;
}

void write_encoder_config(ModelSidecar& side, const nn::EncoderConfig& c) {
  side.set("vocab_size", static_cast<std::uint64_t>(c.vocab_size));
  side.set("embed_dim", static_cast<std::uint64_t>(c.embed_dim));
  side.set("hidden_dim", static_cast<std::uint64_t>(c.hidden_dim));
  side.set("num_layers", static_cast<std::uint64_t>(c.num_layers));
  side.set("num_heads", static_cast<std::uint64_t>(c.num_heads));
  side.set("dropout_rate", c.dropout_rate);
  side.set("max_sequence_length", static_cast<std::uint64_t>(c.max_sequence_length));
  side.set("seed", c.seed);
}

nn::EncoderConfig read_encoder_config(const ModelSidecar& side) {
  nn::EncoderConfig c;
  c.vocab_size = side.get_uint("vocab_size");
  c.embed_dim = side.get_uint("embed_dim");
  c.hidden_dim = side.get_uint("hidden_dim");
  c.num_layers = side.get_uint("num_layers");
  c.num_heads = side.get_uint("num_heads");
  c.dropout_rate = side.get_double("dropout_rate");
  c.max_sequence_length = side.get_uint("max_sequence_length");
  c.seed = side.get_uint("seed");
  return c;
}

}  // namespace spot
