#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spot/discovery.hpp"
#include "spot/nn/layers.hpp"
#include "spot/typeid.hpp"
#include "spot/valueex.hpp"

namespace spot::cli {

// Flat key -> value settings. Top-level keys (seed, corpus, output, mode,
// split, threads) sit outside any section; model settings live in
// [discovery], [typeid], [valueex] and [evaluate]. Every known key has a
// default except seed, which must be given.
class RunConfig {
 public:
  RunConfig();

  // INI file ("key = value", "[section]", ';' or '#' comments). Unknown keys
  // are a UsageError.
  void load_file(const std::filesystem::path& path);
  // "section.key=value" or "key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // UsageError when seed is missing or not an unsigned integer.
  std::uint64_t seed() const;
  std::filesystem::path output_dir() const { return get("output"); }
  std::filesystem::path corpus_path() const;

  nn::EncoderConfig encoder(const std::string& section) const;
  DiscoveryTrainConfig discovery_training() const;
  TypeIdTrainConfig typeid_training() const;
  TypeIdOptions typeid_options() const;
  ValueExTrainConfig valueex_training() const;
  ValueExOptions valueex_options() const;

  // Every key with its effective value, sorted by key. The output directory
  // is left out so runs written to different places compare equal.
  std::vector<std::pair<std::string, std::string>> snapshot() const;
  std::string snapshot_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace spot::cli
