#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rot/model.hpp"
#include "rot/populations.hpp"
#include "rot/reading.hpp"

namespace rot::localization {

using model::TokenId;

// Position 0 is the prompt-only baseline T_0; position i >= 1 is T_i, the
// prompt followed by the first i response tokens.
struct PrefixScores {
  double delta = 0.0;
  std::vector<int> layers;
  std::vector<std::vector<double>> per_layer;  // [position][layer index]
  std::vector<double> mean;                    // [position]

  std::size_t response_length() const { return mean.empty() ? 0 : mean.size() - 1; }
};

// activation(layer, i) returns h_k(T_i) for i in 0..positions-1.
using ActivationFn = std::function<std::vector<double>(int layer, std::size_t position)>;

PrefixScores score_activations(const ActivationFn& activation, std::size_t positions,
                               const reading::ReadingVectorSet& readers, double delta);

// One forward over prompt ++ response. `prompt` already carries <bos>.
// LayerMismatch when a reader layer is outside the model; EmptyResponse for
// an empty response.
PrefixScores score_prefixes(const model::ToyTransformer& model, std::span<const TokenId> prompt,
                            std::span<const TokenId> response,
                            const reading::ReadingVectorSet& readers, double delta);

// Dump records "<item>@<i>" (polarity '+') hold h_k(T_i) for i = 0..m.
std::string prefix_record_id(const std::string& item, std::size_t i);
PrefixScores score_prefixes(const populations::ActivationDump& dump, const std::string& item,
                            std::size_t response_length,
                            const reading::ReadingVectorSet& readers, double delta);

// marks[i-1] set iff mean[i] < 0 and mean[i-1] >= 0, for i = 1..m.
std::vector<bool> zero_crossings(std::span<const double> mean);

enum class Mark { Ok, ReasoningError };

struct TokenEntry {
  std::string text;
  double score = 0.0;
  Mark mark = Mark::Ok;
};

struct SalienceReport {
  std::string prompt;
  double baseline = 0.0;
  double delta = 0.0;
  std::vector<int> layers;
  std::vector<TokenEntry> tokens;

  std::size_t mark_count() const;
};

// LengthMismatch when tokens.size() != scores.response_length().
SalienceReport localize(const PrefixScores& scores, const std::vector<std::string>& tokens,
                        const std::string& prompt = {});

enum class Format { Plain, Ansi, Html };
Format parse_format(const std::string& name);  // ConfigError for unknown names
const char* format_extension(Format f);        // "tsv" | "txt" | "html"
std::string render_report(const SalienceReport& report, Format format);

}  // namespace rot::localization
