#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rot/model.hpp"

namespace rot::stimuli {

enum class StimulusKind { ZeroShot, FewShot };

std::string_view kind_name(StimulusKind kind);

struct Demonstration {
  std::string question;
  std::string answer;
};

// s+ for one prompt family: an instruction appended after "ASSISTANT:"
// (zero-shot) or a list of worked examples placed before the question
// (few-shot). The negative prompt is always the same template with the
// stimulus omitted.
struct Stimulus {
  StimulusKind kind = StimulusKind::ZeroShot;
  std::string label;  // e.g. "Z1", "F2"
  std::string instruction;
  std::vector<Demonstration> demonstrations;

  static Stimulus zero_shot(std::string instruction, std::string label = {});
  static Stimulus few_shot(std::vector<Demonstration> demos, std::string label = {});
  // InvalidConfig unless the payload is nonempty.
  void validate() const;
};

// The three zero-shot instructions used for robustness comparisons (Z1-Z3).
std::vector<Stimulus> bundled_zero_shot();

// Same demonstrations in a seeded random order.
Stimulus shuffled(const Stimulus& few_shot, std::uint64_t seed, std::string label);

struct Query {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<Demonstration> demonstrations;
};

// Task file: JSON lines {id, question, answer, demonstrations?: [{q, a}]}.
// Blank lines are skipped; anything else malformed is TaskFileInvalid.
std::vector<Query> parse_task_jsonl(std::string_view text);
std::vector<Query> load_task_file(const std::string& path);
// Demonstration file: JSON lines {q, a}.
std::vector<Demonstration> load_demonstrations(const std::string& path);

// template_id -> layout with {question}, {stimulus} and {demos} placeholders.
class TemplateRegistry {
 public:
  // zero_shot and few_shot layouts.
  static TemplateRegistry builtin();
  // "id = layout" lines, '#' comments, "\n" inside a layout is a newline.
  static TemplateRegistry parse(std::string_view text);
  static TemplateRegistry from_file(const std::string& path);

  const std::string& layout(const std::string& template_id) const;
  bool contains(const std::string& template_id) const { return layouts_.contains(template_id); }

  // Positive prompt when stimulus is given, negative prompt otherwise.
  std::string render(const std::string& template_id, const Stimulus* stimulus,
                     std::string_view question) const;

  // Text substituted for the stimulus placeholder in a positive prompt.
  static std::string stimulus_text(const Stimulus& stimulus);

 private:
  std::map<std::string, std::string> layouts_;
};

struct PromptPair {
  std::string query_id;
  std::size_t stimulus_index = 0;
  std::string template_id;
  std::string positive;
  std::string negative;

  // "<query_id>/<stimulus_index>", the key used in activation dumps.
  std::string pair_id() const;
};

struct StimulusSet {
  std::vector<PromptPair> pairs;  // query-major, then stimulus index
  std::size_t query_count = 0;
  std::size_t stimuli_count = 0;
  StimulusKind kind = StimulusKind::ZeroShot;

  std::uint64_t digest() const;
};

StimulusSet build_stimulus_set(const std::vector<Query>& queries,
                               const std::vector<Stimulus>& stimuli, std::size_t m,
                               const std::string& template_id, const TemplateRegistry& templates);

enum class Selection { Random, LowPerplexity, HighPerplexity };

struct SelectionStrategy {
  Selection kind = Selection::HighPerplexity;
  std::uint64_t seed = 0;
};

std::optional<Selection> parse_selection(std::string_view name);

// Perplexity of the bare question text, <bos> prepended.
double query_perplexity(const model::ToyTransformer& model, const model::Tokenizer& tokenizer,
                        const Query& query);

// Exactly n queries, returned in ascending id order. Perplexity strategies
// take the n lowest / highest scores, breaking ties by id.
std::vector<Query> select_queries(const std::vector<Query>& corpus, std::size_t n,
                                  const SelectionStrategy& strategy,
                                  const model::ToyTransformer* model = nullptr,
                                  const model::Tokenizer* tokenizer = nullptr, int workers = 1);

}  // namespace rot::stimuli
