#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "spot/nn/layers.hpp"

namespace spot {

// "key = value" side-car written next to each checkpoint, one entry per line
// in key order. Holds everything needed to rebuild a model before its
// parameters are loaded.
class ModelSidecar {
 public:
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  bool contains(const std::string& key) const { return entries_.contains(key); }

  void save(const std::filesystem::path& path) const;
  static ModelSidecar load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> entries_;
};

void write_encoder_config(ModelSidecar& side, const nn::EncoderConfig& config);
nn::EncoderConfig read_encoder_config(const ModelSidecar& side);

}  // namespace spot
