#include "rot/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <json.hpp>

#include "rot/error.hpp"
#include "rot/parallel.hpp"

namespace rot::eval {

TaskKind parse_task_kind(std::string_view name) {
  if (name == "yes_no") return TaskKind::YesNo;
  if (name == "multiple_choice") return TaskKind::MultipleChoice;
  if (name == "number") return TaskKind::Number;
  if (name == "letters") return TaskKind::Letters;
  throw Error(Errc::ConfigError, "unknown task kind '" + std::string(name) + "'");
}

const char* task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::YesNo: return "yes_no";
    case TaskKind::MultipleChoice: return "multiple_choice";
    case TaskKind::Number: return "number";
    case TaskKind::Letters: return "letters";
  }
  return "yes_no";
}

ExtractionTemplate ExtractionTemplate::for_kind(TaskKind kind) {
  switch (kind) {
    case TaskKind::YesNo: return {kind, "Therefore, the answer (Yes or No) is", "yes_no"};
    case TaskKind::MultipleChoice: return {kind, "Therefore, among A through E, the answer is", "multiple_choice"};
    case TaskKind::Number: return {kind, "Therefore, the answer (arabic numerals) is", "number"};
    case TaskKind::Letters: return {kind, "Therefore, the answer is", "letters"};
  }
  return {};
}

void ExtractionTemplate::validate() const {
  if (trigger.empty()) throw Error(Errc::InvalidConfig, "extraction trigger is empty");
  if (rule != task_kind_name(kind)) throw Error(Errc::InvalidConfig, "parse rule does not match the task kind");
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string_view answer_region(std::string_view response, std::string_view trigger) {
  const std::string low = lower(response);
  const std::string trig = lower(trim(trigger));
  auto at = trig.empty() ? std::string::npos : low.rfind(trig);
  if (at != std::string::npos) return response.substr(at + trig.size());
  at = low.rfind("answer is");
  if (at != std::string::npos) return response.substr(at + 9);
  return response;
}

std::optional<std::string> parse_yes_no(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_alpha(s[i])) { ++i; continue; }
    std::size_t j = i;
    while (j < s.size() && is_alpha(s[j])) ++j;
    const std::string w = lower(s.substr(i, j - i));
    if (w == "yes" || w == "no") return w;
    i = j;
  }
  return std::nullopt;
}

std::optional<std::string> parse_choice(std::string_view s) {
  std::string bare;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '.' && c != ':' && c != ',' && c != ';') bare += c;
  }
  if (bare.size() == 1) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(bare[0])));
    if (c >= 'a' && c <= 'e') return std::string(1, c);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(' && i + 2 < s.size() && s[i + 2] == ')') {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i + 1])));
      if (c >= 'a' && c <= 'e') return std::string(1, c);
    }
    if (s[i] >= 'A' && s[i] <= 'E' && (i == 0 || !is_alnum(s[i - 1])) &&
        (i + 1 == s.size() || !is_alnum(s[i + 1]))) {
      return std::string(1, static_cast<char>(s[i] - 'A' + 'a'));
    }
  }
  return std::nullopt;
}

std::optional<std::string> parse_number(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_digit(s[i])) continue;
    std::string out;
    if (i > 0 && s[i - 1] == '-') out += '-';
    std::size_t j = i;
    while (j < s.size()) {
      if (is_digit(s[j])) {
        out += s[j++];
      } else if (s[j] == ',' && j + 3 < s.size() && is_digit(s[j + 1]) && is_digit(s[j + 2]) &&
                 is_digit(s[j + 3]) && (j + 4 >= s.size() || !is_digit(s[j + 4]))) {
        ++j;
      } else {
        break;
      }
    }
    if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
      out += s[j++];
      while (j < s.size() && is_digit(s[j])) out += s[j++];
    }
    return out;
  }
  return std::nullopt;
}

std::optional<std::string> parse_letters(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && !is_alpha(s[i])) ++i;
  if (i == s.size()) return std::nullopt;
  std::size_t j = i;
  while (j < s.size() && is_alpha(s[j])) ++j;
  return lower(s.substr(i, j - i));
}

}  // namespace

std::optional<std::string> extract_answer(std::string_view response, const ExtractionTemplate& tmpl) {
  const auto region = answer_region(response, tmpl.trigger);
  std::optional<std::string> out;
  switch (tmpl.kind) {
    case TaskKind::YesNo: out = parse_yes_no(region); break;
    case TaskKind::MultipleChoice: out = parse_choice(region); break;
    case TaskKind::Number: out = parse_number(region); break;
    case TaskKind::Letters: out = parse_letters(region); break;
  }
  if (out) *out = lower(trim(*out));
  return out;
}

std::string normalize_gold(std::string_view gold, TaskKind kind) {
  std::string g = lower(trim(gold));
  if (kind == TaskKind::MultipleChoice && g.size() == 3 && g.front() == '(' && g.back() == ')') {
    return g.substr(1, 1);
  }
  if (kind == TaskKind::Number) {
    std::string out;
    for (char c : g)
      if (c != ',' && c != '$') out += c;
    while (!out.empty() && out.back() == '.') out.pop_back();
    return out;
  }
  return g;
}

bool answers_match(const std::optional<std::string>& extracted, std::string_view gold, TaskKind kind) {
  if (!extracted) return false;
  const std::string g = normalize_gold(gold, kind);
  if (kind == TaskKind::Number) {
    double a = 0, b = 0;
    const auto ra = std::from_chars(extracted->data(), extracted->data() + extracted->size(), a);
    const auto rb = std::from_chars(g.data(), g.data() + g.size(), b);
    if (ra.ec != std::errc() || rb.ec != std::errc()) return false;
    return a == b;
  }
  return *extracted == g;
}

double accuracy(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "accuracy of an empty record list");
  const auto correct = std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.correct; });
  return 100.0 * static_cast<double>(correct) / static_cast<double>(records.size());
}

double accuracy_rounded(std::size_t correct, std::size_t total) {
  if (total == 0) throw Error(Errc::EmptyInput, "accuracy of an empty record list");
  const std::uint64_t hundredths = (20000ull * correct + total) / (2ull * total);
  return static_cast<double>(hundredths) / 100.0;
}

double round2(double value) { return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0; }

double robustness_score(const std::vector<double>& acc) {
  if (acc.size() < 2) throw Error(Errc::TooFewRuns, "robustness needs at least two runs");
  double sum = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i)
    for (std::size_t j = i + 1; j < acc.size(); ++j) sum += std::abs(acc[i] - acc[j]);
  return sum;
}

std::string ToyTextModel::complete(const std::string& prompt, const control::SteeringPolicy* policy,
                                   int max_new_tokens) const {
  std::vector<model::TokenId> ids{tokenizer_->bos()};
  const auto body = tokenizer_->encode(prompt);
  ids.insert(ids.end(), body.begin(), body.end());
  if (ids.size() >= static_cast<std::size_t>(model_->config().context)) {
    throw Error(Errc::InvalidConfig, "prompt does not fit the model context");
  }
  std::vector<model::TokenId> out;
  if (policy != nullptr) {
    out = control::steered_generate(*model_, ids, *policy, max_new_tokens, tokenizer_->eos()).tokens;
  } else {
    out = model::generate(*model_, ids, max_new_tokens, tokenizer_->eos());
  }
  return tokenizer_->decode(out);
}

Condition Condition::parse(std::string_view name) {
  if (name == "base") return {Kind::Base, 0};
  const std::pair<std::string_view, Kind> prefixes[] = {
      {"cot_z", Kind::CotZ}, {"rot_z", Kind::RotZ}, {"cot_f", Kind::CotF}, {"rot_f", Kind::RotF}};
  for (const auto& [p, k] : prefixes) {
    if (!name.starts_with(p)) continue;
    const auto rest = name.substr(p.size());
    int v = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (!rest.empty() && ec == std::errc() && ptr == rest.data() + rest.size() && v >= 1) return {k, v};
  }
  throw Error(Errc::ConfigError, "unknown condition '" + std::string(name) + "'");
}

std::string Condition::group() const {
  switch (kind) {
    case Kind::Base: return "base";
    case Kind::CotZ: return "cot_z";
    case Kind::RotZ: return "rot_z";
    case Kind::CotF: return "cot_f";
    case Kind::RotF: return "rot_f";
  }
  return "base";
}

std::string Condition::name() const {
  return kind == Kind::Base ? "base" : group() + std::to_string(variant);
}

std::string condition_prompt(const BenchmarkTask& task, const Condition& c, const stimuli::Query& q,
                             const BenchmarkConfig& config) {
  if (c.kind == Condition::Kind::Base) {
    return config.templates.render(config.zero_shot_template, nullptr, q.question);
  }
  const auto& pool = c.few_shot() ? task.few_shot : task.zero_shot;
  if (c.variant < 1 || static_cast<std::size_t>(c.variant) > pool.size()) {
    throw Error(Errc::ConfigError, "condition " + c.name() + " has no stimulus variant");
  }
  const auto& stim = pool[static_cast<std::size_t>(c.variant - 1)];
  if (c.few_shot() && !q.demonstrations.empty()) {
    const auto own = stimuli::Stimulus::few_shot(q.demonstrations);
    return config.templates.render(config.few_shot_template, &own, q.question);
  }
  return config.templates.render(c.few_shot() ? config.few_shot_template : config.zero_shot_template,
                                 &stim, q.question);
}

BenchmarkResult run_benchmark(const BenchmarkTask& task, const TextModel& model,
                              const std::vector<Condition>& conditions,
                              const std::map<std::string, control::SteeringPolicy>& policies,
                              const BenchmarkConfig& config) {
  if (task.queries.empty()) throw Error(Errc::TaskFileInvalid, "task has no queries");
  if (conditions.empty()) throw Error(Errc::ConfigError, "no conditions requested");
  for (const auto& c : conditions) {
    if (c.steered() && !policies.contains(c.name())) {
      throw Error(Errc::MissingPolicy, "condition " + c.name() + " needs a steering policy");
    }
  }
  const auto tmpl = ExtractionTemplate::for_kind(task.kind);

  std::vector<stimuli::Query> queries = task.queries;
  std::sort(queries.begin(), queries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<Condition> ordered = conditions;
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.name() < b.name(); });
  ordered.erase(std::unique(ordered.begin(), ordered.end(),
                            [](const auto& a, const auto& b) { return a.name() == b.name(); }),
                ordered.end());

  BenchmarkResult out;
  out.task = task.name;
  out.records.resize(ordered.size() * queries.size());
  parallel_for(out.records.size(), config.workers, [&](std::size_t idx) {
    const auto& c = ordered[idx / queries.size()];
    const auto& q = queries[idx % queries.size()];
    const control::SteeringPolicy* policy = c.steered() ? &policies.at(c.name()) : nullptr;
    const std::string prompt = condition_prompt(task, c, q, config);
    const std::string reasoning = model.complete(prompt, policy, config.max_new_tokens);
    const std::string second = prompt + " " + reasoning + "\n" + tmpl.trigger;
    const std::string answer = model.complete(second, policy, config.answer_tokens);
    RunRecord r;
    r.query_id = q.id;
    r.condition = c.name();
    r.response = reasoning + "\n" + tmpl.trigger + " " + answer;
    r.extracted = extract_answer(r.response, tmpl);
    r.gold = q.answer;
    r.correct = answers_match(r.extracted, q.answer, task.kind);
    out.records[idx] = std::move(r);
  });

  std::map<std::string, std::vector<std::pair<std::string, double>>> groups;
  for (std::size_t ci = 0; ci < ordered.size(); ++ci) {
    ConditionSummary s;
    s.condition = ordered[ci].name();
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto& r = out.records[ci * queries.size() + qi];
      ++s.total;
      s.correct += r.correct ? 1 : 0;
      s.no_answer += r.extracted ? 0 : 1;
    }
    s.accuracy = accuracy_rounded(s.correct, s.total);
    groups[ordered[ci].group()].emplace_back(s.condition, s.accuracy);
    out.conditions.push_back(s);
  }
  for (const auto& [g, members] : groups) {
    if (members.size() < 2) continue;
    GroupSummary gs;
    gs.group = g;
    std::vector<double> acc;
    for (const auto& [name, a] : members) {
      gs.conditions.push_back(name);
      acc.push_back(a);
    }
    gs.robustness = round2(robustness_score(acc));
    out.groups.push_back(gs);
  }
  return out;
}

std::string BenchmarkResult::summary_jsonl() const {
  std::string out;
  for (const auto& c : conditions) {
    nlohmann::ordered_json j;
    j["condition"] = c.condition;
    j["task"] = task;
    j["accuracy"] = c.accuracy;
    j["correct"] = c.correct;
    j["total"] = c.total;
    j["no_answer"] = c.no_answer;
    out += j.dump() + "\n";
  }
  for (const auto& g : groups) {
    nlohmann::ordered_json j;
    j["condition"] = g.group;
    j["task"] = task;
    std::vector<double> acc;
    for (const auto& name : g.conditions) {
      for (const auto& c : conditions)
        if (c.condition == name) acc.push_back(c.accuracy);
    }
    double mean = 0.0;
    for (double a : acc) mean += a;
    j["accuracy"] = round2(mean / static_cast<double>(acc.size()));
    j["robustness"] = g.robustness;
    j["variants"] = g.conditions;
    out += j.dump() + "\n";
  }
  return out;
}

std::string BenchmarkResult::records_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["query_id"] = r.query_id;
    j["condition"] = r.condition;
    j["response"] = r.response;
    j["extracted"] = r.extracted ? nlohmann::ordered_json(*r.extracted) : nlohmann::ordered_json(nullptr);
    j["gold"] = r.gold;
    j["correct"] = r.correct;
    j["no_answer"] = !r.extracted.has_value();
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace rot::eval
