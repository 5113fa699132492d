#include "spot/nn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "spot/error.hpp"

namespace spot::nn {

namespace {
std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}
}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << "spot-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [name, t] : store.all()) {
    out << "param " << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << hex(values[i]);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "spot-checkpoint") throw DataError(path.string() + ": not a spot checkpoint");
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::set<std::string> seen;
  std::string word;
  while (in >> word) {
    if (word == "end") break;
    if (word != "param") throw DataError(path.string() + ": expected 'param', got '" + word + "'");
    std::string name;
    std::size_t rank = 0;
    in >> name >> rank;
    Shape shape(rank);
    for (auto& d : shape) in >> d;
    if (!in) throw DataError(path.string() + ": truncated header for " + name);
    if (!store.contains(name)) throw DataError(path.string() + ": unexpected parameter " + name);
    Tensor t = store.get(name);
    if (t.shape() != shape) {
      throw DataError(path.string() + ": shape mismatch for " + name + ": file " + to_string(shape) +
                      ", model " + to_string(t.shape()));
    }
    auto values = t.mutable_values();
    for (auto& v : values) {
      std::string token;
      in >> token;
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (token.empty() || *end != '\0') throw DataError(path.string() + ": bad value in " + name);
    }
    seen.insert(name);
  }
  if (word != "end") throw DataError(path.string() + ": missing end marker");
  for (const auto& [name, t] : store.all()) {
    if (!seen.contains(name)) throw DataError(path.string() + ": missing parameter " + name);
  }
}

}  // namespace spot::nn
