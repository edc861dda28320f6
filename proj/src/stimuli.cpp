#include "rot/stimuli.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rot/binio.hpp"
#include "rot/error.hpp"
#include "rot/parallel.hpp"
#include "rot/rng.hpp"

namespace rot::stimuli {

using nlohmann::json;

std::string_view kind_name(StimulusKind kind) {
  return kind == StimulusKind::ZeroShot ? "zero_shot" : "few_shot";
}

Stimulus Stimulus::zero_shot(std::string instruction, std::string label) {
  Stimulus s;
  s.kind = StimulusKind::ZeroShot;
  s.instruction = std::move(instruction);
  s.label = std::move(label);
  s.validate();
  return s;
}

Stimulus Stimulus::few_shot(std::vector<Demonstration> demos, std::string label) {
  Stimulus s;
  s.kind = StimulusKind::FewShot;
  s.demonstrations = std::move(demos);
  s.label = std::move(label);
  s.validate();
  return s;
}

void Stimulus::validate() const {
  if (kind == StimulusKind::ZeroShot) {
    if (instruction.find_first_not_of(" \t\n") == std::string::npos) {
      throw Error(Errc::InvalidConfig, "zero-shot stimulus has an empty instruction");
    }
    return;
  }
  if (demonstrations.empty()) throw Error(Errc::InvalidConfig, "few-shot stimulus has no demonstrations");
  for (const auto& d : demonstrations) {
    if (d.question.empty() || d.answer.empty()) {
      throw Error(Errc::InvalidConfig, "few-shot demonstration with empty question or answer");
    }
  }
}

std::vector<Stimulus> bundled_zero_shot() {
  return {Stimulus::zero_shot("Let's think step by step.", "Z1"),
          Stimulus::zero_shot("Let's think about this logically.", "Z2"),
          Stimulus::zero_shot("Let's solve this problem by splitting it into steps.", "Z3")};
}

Stimulus shuffled(const Stimulus& few_shot, std::uint64_t seed, std::string label) {
  Stimulus out = few_shot;
  Rng rng(derive_seed(seed, "stimuli.shuffle"));
  rng.shuffle(out.demonstrations.begin(), out.demonstrations.end());
  out.label = std::move(label);
  return out;
}

// ---------------------------------------------------------------- task files

namespace {

std::vector<Demonstration> parse_demos(const json& arr, std::size_t line) {
  std::vector<Demonstration> out;
  if (!arr.is_array()) {
    throw Error(Errc::TaskFileInvalid, "line " + std::to_string(line) + ": demonstrations must be a list");
  }
  for (const auto& d : arr) {
    if (!d.is_object() || !d.contains("q") || !d.contains("a") || !d["q"].is_string() ||
        !d["a"].is_string()) {
      throw Error(Errc::TaskFileInvalid, "line " + std::to_string(line) + ": demonstration needs string q and a");
    }
    out.push_back({d["q"].get<std::string>(), d["a"].get<std::string>()});
  }
  return out;
}

template <typename Fn>
void for_each_json_line(std::string_view text, Fn&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::TaskFileInvalid, "line " + std::to_string(n) + ": " + e.what());
    }
    fn(rec, n);
  }
}

}  // namespace

std::vector<Query> parse_task_jsonl(std::string_view text) {
  std::vector<Query> out;
  for_each_json_line(text, [&](const json& rec, std::size_t n) {
    auto str = [&](const char* key) {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string()) {
        throw Error(Errc::TaskFileInvalid, "line " + std::to_string(n) + ": missing string field '" + key + "'");
      }
      return rec[key].get<std::string>();
    };
    Query q{str("id"), str("question"), str("answer"), {}};
    if (q.question.empty()) throw Error(Errc::TaskFileInvalid, "line " + std::to_string(n) + ": empty question");
    if (rec.contains("demonstrations")) q.demonstrations = parse_demos(rec["demonstrations"], n);
    out.push_back(std::move(q));
  });
  std::vector<std::string> ids;
  for (const auto& q : out) ids.push_back(q.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(Errc::TaskFileInvalid, "duplicate query id");
  }
  return out;
}

std::vector<Query> load_task_file(const std::string& path) {
  return parse_task_jsonl(binio::read_text(path));
}

std::vector<Demonstration> load_demonstrations(const std::string& path) {
  json arr = json::array();
  for_each_json_line(binio::read_text(path), [&](const json& rec, std::size_t) { arr.push_back(rec); });
  return parse_demos(arr, 0);
}

// ---------------------------------------------------------------- templates

TemplateRegistry TemplateRegistry::builtin() {
  return parse(
      "zero_shot = USER: {question}\\nASSISTANT:{stimulus}\n"
      "few_shot = USER: {demos}Q: {question}\\nASSISTANT:\n");
}

TemplateRegistry TemplateRegistry::parse(std::string_view text) {
  TemplateRegistry reg;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::ConfigError, "template line without '=': " + line);
    std::string key = line.substr(first, eq - first);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string raw = line.substr(eq + 1);
    if (!raw.empty() && raw.front() == ' ') raw.erase(0, 1);
    std::string layout;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size() && raw[i + 1] == 'n') {
        layout += '\n';
        ++i;
      } else {
        layout += raw[i];
      }
    }
    reg.layouts_[key] = layout;
  }
  return reg;
}

TemplateRegistry TemplateRegistry::from_file(const std::string& path) {
  return parse(binio::read_text(path));
}

const std::string& TemplateRegistry::layout(const std::string& template_id) const {
  auto it = layouts_.find(template_id);
  if (it == layouts_.end()) throw Error(Errc::UnknownTemplate, "no template '" + template_id + "'");
  return it->second;
}

std::string TemplateRegistry::stimulus_text(const Stimulus& stimulus) {
  if (stimulus.kind == StimulusKind::ZeroShot) return " " + stimulus.instruction;
  std::string out;
  for (const auto& d : stimulus.demonstrations) out += "Q: " + d.question + "\nA: " + d.answer + "\n\n";
  return out;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string TemplateRegistry::render(const std::string& template_id, const Stimulus* stimulus,
                                     std::string_view question) const {
  if (question.empty()) throw Error(Errc::EmptyPrompt, "empty query");
  std::string out = layout(template_id);
  std::string zero, demos;
  if (stimulus != nullptr) {
    const std::string_view slot = stimulus->kind == StimulusKind::ZeroShot ? "{stimulus}" : "{demos}";
    if (out.find(slot) == std::string::npos) {
      throw Error(Errc::InvalidConfig, "template '" + template_id + "' has no " + std::string(slot) +
                                           " slot for a " + std::string(kind_name(stimulus->kind)) +
                                           " stimulus");
    }
    (stimulus->kind == StimulusKind::ZeroShot ? zero : demos) = stimulus_text(*stimulus);
  }
  // The question goes in last so braces inside it are never expanded.
  replace_all(out, "{stimulus}", zero);
  replace_all(out, "{demos}", demos);
  replace_all(out, "{question}", question);
  return out;
}

// ---------------------------------------------------------------- stimulus sets

std::string PromptPair::pair_id() const { return query_id + "/" + std::to_string(stimulus_index); }

std::uint64_t StimulusSet::digest() const {
  std::uint64_t h = fnv1a(kind_name(kind));
  for (const auto& p : pairs) {
    h = fnv1a(p.pair_id(), h);
    h = fnv1a(std::string_view("\x1f", 1), h);
    h = fnv1a(p.template_id, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
    h = fnv1a(p.positive, h);
    h = fnv1a(std::string_view("\x1e", 1), h);
    h = fnv1a(p.negative, h);
    h = fnv1a(std::string_view("\x1d", 1), h);
  }
  return h;
}

StimulusSet build_stimulus_set(const std::vector<Query>& queries,
                               const std::vector<Stimulus>& stimuli, std::size_t m,
                               const std::string& template_id, const TemplateRegistry& templates) {
  if (queries.empty()) throw Error(Errc::EmptyInput, "no queries for the stimulus set");
  if (m < 1 || stimuli.size() < m) {
    throw Error(Errc::InsufficientStimuli, "need " + std::to_string(m) + " stimuli, have " +
                                               std::to_string(stimuli.size()));
  }
  StimulusSet set;
  set.query_count = queries.size();
  set.stimuli_count = m;
  set.kind = stimuli.front().kind;
  set.pairs.reserve(queries.size() * m);
  for (const auto& q : queries) {
    for (std::size_t i = 0; i < m; ++i) {
      stimuli[i].validate();
      if (stimuli[i].kind != set.kind) throw Error(Errc::InvalidConfig, "mixed stimulus kinds in one set");
      PromptPair p;
      p.query_id = q.id;
      p.stimulus_index = i;
      p.template_id = template_id;
      if (stimuli[i].kind == StimulusKind::FewShot && !q.demonstrations.empty()) {
        // A query that carries its own demonstrations uses them in place of
        // the shared exemplar list.
        const Stimulus own = Stimulus::few_shot(q.demonstrations, stimuli[i].label);
        p.positive = templates.render(template_id, &own, q.question);
      } else {
        p.positive = templates.render(template_id, &stimuli[i], q.question);
      }
      p.negative = templates.render(template_id, nullptr, q.question);
      set.pairs.push_back(std::move(p));
    }
  }
  return set;
}

// ---------------------------------------------------------------- selection

std::optional<Selection> parse_selection(std::string_view name) {
  if (name == "random") return Selection::Random;
  if (name == "low-ppl" || name == "low_perplexity") return Selection::LowPerplexity;
  if (name == "high-ppl" || name == "high_perplexity") return Selection::HighPerplexity;
  return std::nullopt;
}

double query_perplexity(const model::ToyTransformer& model, const model::Tokenizer& tokenizer,
                        const Query& query) {
  std::vector<model::TokenId> ids{tokenizer.bos()};
  const auto body = tokenizer.encode(query.question);
  ids.insert(ids.end(), body.begin(), body.end());
  return model::perplexity(model, ids);
}

std::vector<Query> select_queries(const std::vector<Query>& corpus, std::size_t n,
                                  const SelectionStrategy& strategy,
                                  const model::ToyTransformer* model,
                                  const model::Tokenizer* tokenizer, int workers) {
  if (corpus.size() < n) {
    throw Error(Errc::NotEnoughSamples, "requested " + std::to_string(n) + " queries from a corpus of " +
                                            std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  auto by_id = [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; };
  std::sort(order.begin(), order.end(), by_id);

  std::vector<std::size_t> chosen;
  if (n == corpus.size()) {
    chosen = order;
  } else if (strategy.kind == Selection::Random) {
    Rng rng(derive_seed(strategy.seed, "stimuli.select"));
    rng.shuffle(order.begin(), order.end());
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    if (model == nullptr || tokenizer == nullptr) {
      throw Error(Errc::InvalidConfig, "perplexity selection needs a model");
    }
    std::vector<double> ppl(corpus.size());
    parallel_for(corpus.size(), workers,
                 [&](std::size_t i) { ppl[i] = query_perplexity(*model, *tokenizer, corpus[i]); });
    const bool high = strategy.kind == Selection::HighPerplexity;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return high ? ppl[a] > ppl[b] : ppl[a] < ppl[b];
    });
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(chosen.begin(), chosen.end(), by_id);
  std::vector<Query> out;
  out.reserve(n);
  for (std::size_t i : chosen) out.push_back(corpus[i]);
  return out;
}

}  // namespace rot::stimuli
