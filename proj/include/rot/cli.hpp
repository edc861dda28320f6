#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rot::cli {

// Every tunable of the command-line pipeline. Defaults follow the reference
// settings: N = 128, last five layers, M = 1, delta = 10, greedy decoding
// with 512 new tokens.
struct RunConfig {
  std::string model;  // ROTM path; empty builds the toy model from seed
  std::uint64_t seed = 1;
  int depth = 6;
  int hidden = 64;
  int heads = 4;
  int context = 1024;
  std::string lexicon;    // default <data>/lexicon.txt
  std::string templates;  // default <data>/templates.conf
  std::string layers = "last:5";
  int n_samples = 128;
  std::string select = "high-ppl";
  std::string stimuli = "zero";
  int variant = 1;
  int m = 1;
  bool center = true;
  double delta = 10.0;
  double alpha = 1.0;
  std::string sign = "proj";
  int max_new_tokens = 512;
  int answer_tokens = 8;
  std::string template_id;  // empty: zero_shot / few_shot by stimulus kind
  std::string task;
  std::string kind;  // task kind for bare .jsonl task files
  std::string out = "out";
  std::string format = "all";
  int workers = 0;  // 0: all available cores

  // Keys set by the config file, environment or flags (not defaults).
  std::set<std::string> explicit_keys;

  bool is_explicit(const std::string& key) const { return explicit_keys.contains(key); }
};

// Applies one "key = value" setting; keys use the long flag names.
// ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
// Config file: "key = value" lines, '#' comments, blank lines ignored.
void apply_config_text(RunConfig& config, const std::string& text);

// Parses and runs one command line (args[0] is the program name). Returns
// the process exit code: 0 ok, 2 config, 3 data, 4 missing artifact,
// 5 model/layer mismatch, 6 corrupt file.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rot::cli
