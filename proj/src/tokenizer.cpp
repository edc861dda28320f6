#include "rot/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "rot/binio.hpp"
#include "rot/error.hpp"

namespace rot::model {

namespace {

constexpr std::string_view kPunctuation = ".,?!:;\"()[]{}$%*/+-=<>^&#@_~|'`\\";

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c == '\'' || c >= 0x80;
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> vocabulary) : vocabulary_(std::move(vocabulary)) {
  ids_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (vocabulary_[i].empty()) throw Error(Errc::InvalidConfig, "empty token at line " + std::to_string(i));
    if (!ids_.emplace(vocabulary_[i], static_cast<TokenId>(i)).second) {
      throw Error(Errc::InvalidConfig, "duplicate token '" + vocabulary_[i] + "'");
    }
  }
  auto special = [&](std::string_view s) {
    auto id = find(s);
    if (!id) throw Error(Errc::InvalidConfig, "lexicon lacks " + std::string(s));
    return *id;
  };
  bos_ = special(kBos);
  eos_ = special(kEos);
  unk_ = special(kUnk);
}

Tokenizer Tokenizer::from_lexicon_text(std::string_view text) {
  std::vector<std::string> vocab;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.push_back(line);
  }
  return Tokenizer(std::move(vocab));
}

Tokenizer Tokenizer::from_lexicon_file(const std::string& path) {
  return from_lexicon_text(binio::read_text(path));
}

Tokenizer Tokenizer::from_corpus(std::span<const std::string> texts) {
  std::vector<std::string> vocab{std::string(kBos), std::string(kEos), std::string(kUnk)};
  for (char c : kPunctuation) vocab.emplace_back(1, c);
  for (int n = 0; n < 1000; ++n) vocab.push_back(std::to_string(n));
  std::set<std::string> seen(vocab.begin(), vocab.end());
  std::set<std::string> extra;
  for (const auto& t : texts)
    for (auto& w : pretokenize(t))
      if (!seen.contains(w)) extra.insert(std::move(w));
  vocab.insert(vocab.end(), extra.begin(), extra.end());
  return Tokenizer(std::move(vocab));
}

std::string Tokenizer::to_lexicon_text() const {
  std::string out;
  for (const auto& t : vocabulary_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::vector<std::string> Tokenizer::pretokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c) != 0) {
      flush();
    } else if (is_word_byte(c)) {
      word.push_back(static_cast<char>(c));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : pretokenize(text)) ids.push_back(find(w).value_or(unk_));
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == bos_ || id == eos_) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::optional<TokenId> Tokenizer::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

}  // namespace rot::model
