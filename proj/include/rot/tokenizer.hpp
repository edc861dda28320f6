#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rot::model {

using TokenId = std::uint32_t;

// Whitespace word-level tokenizer over a fixed lexicon. Punctuation marks
// split off as their own tokens; words outside the lexicon become <unk>.
class Tokenizer {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kUnk = "<unk>";

  // Ids are positions in `vocabulary`. Requires the three special tokens and
  // no duplicates (InvalidConfig otherwise).
  explicit Tokenizer(std::vector<std::string> vocabulary);

  // Lexicon file: UTF-8, one token per line, line number (from 0) = id.
  static Tokenizer from_lexicon_file(const std::string& path);
  static Tokenizer from_lexicon_text(std::string_view text);
  // Specials, punctuation, the numerals 0..999, then every other token seen
  // in `texts` in byte order.
  static Tokenizer from_corpus(std::span<const std::string> texts);

  std::string to_lexicon_text() const;

  static std::vector<std::string> pretokenize(std::string_view text);

  std::vector<TokenId> encode(std::string_view text) const;
  // Joins tokens with single spaces; <bos> and <eos> are dropped.
  std::string decode(std::span<const TokenId> ids) const;

  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return vocabulary_.at(id); }
  std::size_t size() const noexcept { return vocabulary_.size(); }

  TokenId bos() const noexcept { return bos_; }
  TokenId eos() const noexcept { return eos_; }
  TokenId unk() const noexcept { return unk_; }

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, TokenId> ids_;
  TokenId bos_ = 0;
  TokenId eos_ = 0;
  TokenId unk_ = 0;
};

}  // namespace rot::model
