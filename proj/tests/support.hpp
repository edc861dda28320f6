#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "rot/linalg.hpp"
#include "rot/model.hpp"
#include "rot/rng.hpp"
#include "rot/tokenizer.hpp"

namespace rot::testing {

inline model::ModelConfig small_config(int vocab = 64) {
  model::ModelConfig c;
  c.layers = 4;
  c.hidden = 16;
  c.heads = 2;
  c.vocab = vocab;
  c.context = 128;
  return c;
}

// Fresh per-process scratch directory under the system temp dir.
inline std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("rot-tests-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline linalg::Vector random_vector(Rng& rng, std::size_t d, double sigma = 1.0) {
  linalg::Vector v(d);
  for (auto& x : v) x = sigma * rng.normal();
  return v;
}

inline linalg::Vector random_unit(Rng& rng, std::size_t d) {
  return linalg::normalized(random_vector(rng, d));
}

inline std::vector<model::TokenId> random_tokens(Rng& rng, std::size_t n, int vocab) {
  std::vector<model::TokenId> out(n);
  for (auto& t : out) t = static_cast<model::TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  return out;
}

inline model::Tokenizer tiny_tokenizer() {
  const std::vector<std::string> texts = {
      "USER: ASSISTANT: Q: A: Let's think step by step.",
      "Let's think about this logically. Let's solve this problem by splitting it into steps.",
      "A coin is heads up. Ka flips the coin. Is the coin still heads up? yes no",
      "Therefore, the answer (Yes or No) is"};
  return model::Tokenizer::from_corpus(texts);
}

}  // namespace rot::testing
