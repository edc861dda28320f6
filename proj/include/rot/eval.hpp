#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rot/control.hpp"
#include "rot/model.hpp"
#include "rot/stimuli.hpp"
#include "rot/tokenizer.hpp"

namespace rot::eval {

enum class TaskKind { YesNo, MultipleChoice, Number, Letters };

TaskKind parse_task_kind(std::string_view name);  // yes_no | multiple_choice | number | letters
const char* task_kind_name(TaskKind kind);

struct ExtractionTemplate {
  TaskKind kind = TaskKind::YesNo;
  std::string trigger;
  std::string rule;  // equals task_kind_name(kind)

  static ExtractionTemplate for_kind(TaskKind kind);
  void validate() const;
};

// Parses the text after the last trigger occurrence (else after the last
// "answer is", else the whole response). nullopt is NoAnswer.
std::optional<std::string> extract_answer(std::string_view response, const ExtractionTemplate& tmpl);

// Gold answers go through the same normalisation; numbers compare by value.
std::string normalize_gold(std::string_view gold, TaskKind kind);
bool answers_match(const std::optional<std::string>& extracted, std::string_view gold, TaskKind kind);

struct RunRecord {
  std::string query_id;
  std::string condition;
  std::string response;
  std::optional<std::string> extracted;
  std::string gold;
  bool correct = false;
};

// 100 * correct / total, unrounded. EmptyInput on an empty list.
double accuracy(const std::vector<RunRecord>& records);
// Half-up rounding of 100 * correct / total to two decimals, exact in
// integer arithmetic.
double accuracy_rounded(std::size_t correct, std::size_t total);
double round2(double value);

// Sum over i < j of |a_i - a_j|. TooFewRuns for fewer than two values.
double robustness_score(const std::vector<double>& accuracies);

// Text-in, text-out model used by the benchmark runner.
class TextModel {
 public:
  virtual ~TextModel() = default;
  virtual std::string complete(const std::string& prompt, const control::SteeringPolicy* policy,
                               int max_new_tokens) const = 0;
};

class ToyTextModel final : public TextModel {
 public:
  ToyTextModel(const model::ToyTransformer& model, const model::Tokenizer& tokenizer)
      : model_(&model), tokenizer_(&tokenizer) {}
  std::string complete(const std::string& prompt, const control::SteeringPolicy* policy,
                       int max_new_tokens) const override;

 private:
  const model::ToyTransformer* model_;
  const model::Tokenizer* tokenizer_;
};

// base, cot_z<i>, rot_z<i>, cot_f<j>, rot_f<j>.
struct Condition {
  enum class Kind { Base, CotZ, RotZ, CotF, RotF } kind = Kind::Base;
  int variant = 0;  // 1-based; 0 for base

  static Condition parse(std::string_view name);  // ConfigError on junk
  std::string name() const;
  std::string group() const;  // "base", "cot_z", ...
  bool steered() const { return kind == Kind::RotZ || kind == Kind::RotF; }
  bool few_shot() const { return kind == Kind::CotF || kind == Kind::RotF; }
};

struct BenchmarkTask {
  std::string name;
  TaskKind kind = TaskKind::YesNo;
  std::vector<stimuli::Query> queries;
  std::vector<stimuli::Stimulus> zero_shot;  // variant i -> zero_shot[i-1]
  std::vector<stimuli::Stimulus> few_shot;   // variant j -> few_shot[j-1]
};

struct BenchmarkConfig {
  int max_new_tokens = 512;
  int answer_tokens = 8;
  std::string zero_shot_template = "zero_shot";
  std::string few_shot_template = "few_shot";
  stimuli::TemplateRegistry templates = stimuli::TemplateRegistry::builtin();
  int workers = 1;
};

struct ConditionSummary {
  std::string condition;
  double accuracy = 0.0;  // rounded
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t no_answer = 0;
};

struct GroupSummary {
  std::string group;
  std::vector<std::string> conditions;
  double robustness = 0.0;  // over rounded accuracies, rounded
};

struct BenchmarkResult {
  std::string task;
  std::vector<ConditionSummary> conditions;
  std::vector<GroupSummary> groups;  // groups with >= 2 variants
  std::vector<RunRecord> records;    // ordered by (condition, query id)

  std::string summary_jsonl() const;
  std::string records_jsonl() const;
};

// Prompt for one query under one condition (positive prompt for CoT and
// RoT, the stimulus-free prompt for base).
std::string condition_prompt(const BenchmarkTask& task, const Condition& condition,
                             const stimuli::Query& query, const BenchmarkConfig& config);

// Two-stage run per query: reasoning, then the trigger phrase and a short
// answer continuation; extraction reads the combined text. MissingPolicy when
// a steered condition has no policy.
BenchmarkResult run_benchmark(const BenchmarkTask& task, const TextModel& model,
                              const std::vector<Condition>& conditions,
                              const std::map<std::string, control::SteeringPolicy>& policies,
                              const BenchmarkConfig& config);

}  // namespace rot::eval
