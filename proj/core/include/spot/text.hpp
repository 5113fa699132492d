#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spot {

// Lowercases and splits on whitespace; every punctuation character becomes a
// token of its own. Apostrophes between letters stay inside the word
// ("what've" is one token).
std::vector<std::string> tokenize(std::string_view text);

using TokenId = std::int32_t;

// Token <-> id table. Ids 0..4 are reserved for padding, unknown,
// begin-of-sequence, end-of-sequence and separator; ids 5 onwards follow
// insertion order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kSep = 4;

  Vocabulary();

  TokenId add(const std::string& token);
  TokenId id(const std::string& token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  bool contains(const std::string& token) const { return index_.contains(token); }
  std::size_t size() const { return tokens_.size(); }

  std::vector<TokenId> encode(std::string_view text) const;
  std::vector<TokenId> encode_tokens(std::span<const std::string> tokens) const;
  // Joins tokens with single spaces; reserved tokens are dropped.
  std::string decode(std::span<const TokenId> ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace spot
