#include "rot/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rot/binio.hpp"
#include "rot/control.hpp"
#include "rot/error.hpp"
#include "rot/eval.hpp"
#include "rot/localization.hpp"
#include "rot/model.hpp"
#include "rot/parallel.hpp"
#include "rot/populations.hpp"
#include "rot/reading.hpp"
#include "rot/rng.hpp"
#include "rot/stimuli.hpp"
#include "rot/tokenizer.hpp"
#include "rot/toytasks.hpp"

namespace fs = std::filesystem;

namespace rot::cli {

namespace {

std::string data_path(const std::string& rel) { return std::string(ROT_DATA_DIR) + "/" + rel; }

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto s = trim(value);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::ConfigError, "bad value '" + value + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto s = trim(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(Errc::ConfigError, "bad boolean '" + value + "' for " + key);
}

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& value) {
  const std::string key = canonical_key(trim(raw_key));
  const std::string v = trim(value);
  if (key == "model") c.model = v;
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "depth") c.depth = parse_number<int>(key, v);
  else if (key == "hidden") c.hidden = parse_number<int>(key, v);
  else if (key == "heads") c.heads = parse_number<int>(key, v);
  else if (key == "context") c.context = parse_number<int>(key, v);
  else if (key == "lexicon") c.lexicon = v;
  else if (key == "templates") c.templates = v;
  else if (key == "layers") c.layers = v;
  else if (key == "n-samples") c.n_samples = parse_number<int>(key, v);
  else if (key == "select") c.select = v;
  else if (key == "stimuli") c.stimuli = v;
  else if (key == "variant") c.variant = parse_number<int>(key, v);
  else if (key == "m") c.m = parse_number<int>(key, v);
  else if (key == "center") c.center = parse_bool(key, v);
  else if (key == "delta") c.delta = parse_number<double>(key, v);
  else if (key == "alpha") c.alpha = parse_number<double>(key, v);
  else if (key == "sign") c.sign = v;
  else if (key == "max-new-tokens") c.max_new_tokens = parse_number<int>(key, v);
  else if (key == "answer-tokens") c.answer_tokens = parse_number<int>(key, v);
  else if (key == "template") c.template_id = v;
  else if (key == "task") c.task = v;
  else if (key == "kind") c.kind = v;
  else if (key == "out") c.out = v;
  else if (key == "format") c.format = v;
  else if (key == "workers") c.workers = parse_number<int>(key, v);
  else throw Error(Errc::ConfigError, "unknown config key '" + raw_key + "'");
  c.explicit_keys.insert(key);
}

void apply_config_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, "config line " + std::to_string(n) + ": expected key = value");
    }
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

namespace {

// ------------------------------------------------------------ validation

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::ConfigError, what);
  };
  need(c.n_samples >= 1, "n-samples must be >= 1");
  need(c.m >= 1, "m must be >= 1");
  need(c.variant >= 1, "variant must be >= 1");
  need(c.max_new_tokens >= 1 && c.max_new_tokens <= 1 << 16, "max-new-tokens must be in 1..65536");
  need(c.answer_tokens >= 1 && c.answer_tokens <= 1024, "answer-tokens must be in 1..1024");
  need(std::isfinite(c.delta), "delta must be finite");
  need(std::isfinite(c.alpha), "alpha must be finite");
  need(c.workers >= 0 && c.workers <= 1024, "workers must be in 0..1024");
  need(c.depth >= 1 && c.hidden >= 1 && c.heads >= 1 && c.context >= 2, "bad model shape");
  need(c.stimuli == "zero" || c.stimuli == "few", "stimuli must be zero or few");
  need(stimuli::parse_selection(c.select).has_value(), "select must be random, low-ppl or high-ppl");
  control::parse_sign(c.sign);
  need(c.format == "all" || c.format == "plain" || c.format == "ansi" || c.format == "html",
       "format must be plain, ansi, html or all");
}

int workers_of(const RunConfig& c) { return c.workers > 0 ? c.workers : default_workers(); }

// ------------------------------------------------------------ task files

struct TaskSpec {
  std::string name;
  eval::TaskKind kind = eval::TaskKind::YesNo;
  std::vector<stimuli::Query> queries;
  std::vector<stimuli::Demonstration> demos;
  std::map<std::string, std::string> defaults;  // alpha, max-new-tokens, delta, ...
};

std::string resolve_relative(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

TaskSpec load_task(const RunConfig& c) {
  if (c.task.empty()) throw Error(Errc::ConfigError, "no task given (--task)");
  std::string ref = c.task;
  if (!fs::exists(ref)) {
    const auto bundled = data_path("tasks/" + ref + ".conf");
    if (!fs::exists(bundled)) throw Error(Errc::IoFailure, "task '" + ref + "' not found");
    ref = bundled;
  }
  TaskSpec t;
  if (fs::path(ref).extension() != ".conf") {
    t.name = fs::path(ref).stem().string();
    t.kind = eval::parse_task_kind(c.kind.empty() ? "yes_no" : c.kind);
    t.queries = stimuli::load_task_file(ref);
    return t;
  }
  const fs::path base = fs::path(ref).parent_path();
  std::istringstream in(binio::read_text(ref));
  std::string line;
  std::string queries, demos, kind = "yes_no";
  t.name = fs::path(ref).stem().string();
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::TaskFileInvalid, ref + ": expected key = value");
    const auto key = canonical_key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key == "name") t.name = value;
    else if (key == "kind") kind = value;
    else if (key == "queries") queries = resolve_relative(base, value);
    else if (key == "demos") demos = resolve_relative(base, value);
    else t.defaults[key] = value;
  }
  if (queries.empty()) throw Error(Errc::TaskFileInvalid, ref + ": no queries file");
  t.kind = eval::parse_task_kind(c.is_explicit("kind") ? c.kind : kind);
  t.queries = stimuli::load_task_file(queries);
  if (!demos.empty()) t.demos = stimuli::load_demonstrations(demos);
  return t;
}

// Task defaults sit between the config layers and the built-in defaults.
RunConfig with_task_defaults(RunConfig c, const TaskSpec& t) {
  for (const auto& [k, v] : t.defaults) {
    if (c.is_explicit(k)) continue;
    apply_setting(c, k, v);
    c.explicit_keys.erase(k);
  }
  return c;
}

// ------------------------------------------------------------ model

struct Runtime {
  model::Tokenizer tokenizer;
  model::ToyTransformer model;
};

model::Tokenizer load_tokenizer(const RunConfig& c) {
  return model::Tokenizer::from_lexicon_file(c.lexicon.empty() ? data_path("lexicon.txt") : c.lexicon);
}

model::ModelConfig model_config(const RunConfig& c, std::size_t vocab) {
  model::ModelConfig mc;
  mc.layers = c.depth;
  mc.hidden = c.hidden;
  mc.heads = c.heads;
  mc.vocab = static_cast<int>(vocab);
  mc.context = c.context;
  return mc;
}

Runtime load_runtime(const RunConfig& c) {
  auto tok = load_tokenizer(c);
  auto m = c.model.empty() ? model::ToyTransformer::build(c.seed, model_config(c, tok.size()))
                           : model::ToyTransformer::load(c.model);
  if (static_cast<std::size_t>(m.config().vocab) < tok.size()) {
    throw Error(Errc::DimensionMismatch, "model vocabulary (" + std::to_string(m.config().vocab) +
                                             ") is smaller than the lexicon (" +
                                             std::to_string(tok.size()) + ")");
  }
  return {std::move(tok), std::move(m)};
}

std::vector<model::TokenId> prompt_ids(const model::Tokenizer& tok, const std::string& text) {
  std::vector<model::TokenId> ids{tok.bos()};
  const auto body = tok.encode(text);
  if (body.empty()) throw Error(Errc::EmptyPrompt, "prompt has no tokens");
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

std::vector<model::TokenId> strip_eos(std::vector<model::TokenId> ids, model::TokenId eos) {
  if (!ids.empty() && ids.back() == eos) ids.pop_back();
  return ids;
}

// ------------------------------------------------------------ stimuli

stimuli::TemplateRegistry load_templates(const RunConfig& c) {
  const auto path = c.templates.empty() ? data_path("templates.conf") : c.templates;
  if (c.templates.empty() && !fs::exists(path)) return stimuli::TemplateRegistry::builtin();
  return stimuli::TemplateRegistry::from_file(path);
}

std::vector<stimuli::Stimulus> zero_shot_pool() {
  const auto path = data_path("stimuli/zero_shot.tsv");
  if (!fs::exists(path)) return stimuli::bundled_zero_shot();
  std::vector<stimuli::Stimulus> out;
  std::istringstream in(binio::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(Errc::TaskFileInvalid, path + ": expected label<TAB>instruction");
    out.push_back(stimuli::Stimulus::zero_shot(trim(line.substr(tab + 1)), line.substr(0, tab)));
  }
  return out;
}

// Variant j of the few-shot stimulus: j = 1 keeps the file order, later
// variants are seeded shuffles of it.
stimuli::Stimulus few_shot_variant(const TaskSpec& t, std::uint64_t seed, int j) {
  if (t.demos.empty()) throw Error(Errc::InsufficientStimuli, "task " + t.name + " has no demonstrations");
  auto base = stimuli::Stimulus::few_shot(t.demos, "F1");
  if (j == 1) return base;
  return stimuli::shuffled(base, derive_seed(seed, "stimuli.few_shot." + std::to_string(j)),
                           "F" + std::to_string(j));
}

stimuli::Stimulus zero_shot_variant(int i) {
  const auto pool = zero_shot_pool();
  if (i < 1 || static_cast<std::size_t>(i) > pool.size()) {
    throw Error(Errc::InsufficientStimuli, "no zero-shot instruction Z" + std::to_string(i));
  }
  return pool[static_cast<std::size_t>(i - 1)];
}

// M stimuli starting at the requested variant.
std::vector<stimuli::Stimulus> stimulus_list(const RunConfig& c, const TaskSpec& t,
                                             stimuli::StimulusKind kind, int variant) {
  std::vector<stimuli::Stimulus> out;
  if (kind == stimuli::StimulusKind::ZeroShot) {
    const auto pool = zero_shot_pool();
    for (int k = 0; k < c.m; ++k) {
      const auto idx = static_cast<std::size_t>(variant - 1 + k);
      if (idx >= pool.size()) break;
      out.push_back(pool[idx]);
    }
  } else {
    for (int k = 0; k < c.m; ++k) out.push_back(few_shot_variant(t, c.seed, variant + k));
  }
  if (out.size() < static_cast<std::size_t>(c.m)) {
    throw Error(Errc::InsufficientStimuli, "only " + std::to_string(out.size()) + " stimuli for M = " +
                                               std::to_string(c.m));
  }
  return out;
}

std::string template_for(const RunConfig& c, stimuli::StimulusKind kind) {
  if (!c.template_id.empty()) return c.template_id;
  return kind == stimuli::StimulusKind::FewShot ? "few_shot" : "zero_shot";
}

stimuli::StimulusKind stimulus_kind(const RunConfig& c) {
  return c.stimuli == "few" ? stimuli::StimulusKind::FewShot : stimuli::StimulusKind::ZeroShot;
}

std::vector<stimuli::Query> chosen_queries(const RunConfig& c, const TaskSpec& t, const Runtime& rt) {
  const auto selection = *stimuli::parse_selection(c.select);
  return stimuli::select_queries(t.queries, static_cast<std::size_t>(c.n_samples),
                                 {selection, derive_seed(c.seed, "stimuli.select")}, &rt.model,
                                 &rt.tokenizer, workers_of(c));
}

stimuli::StimulusSet stimulus_set(const RunConfig& c, const TaskSpec& t,
                                  const std::vector<stimuli::Query>& chosen,
                                  stimuli::StimulusKind kind, int variant) {
  return stimuli::build_stimulus_set(chosen, stimulus_list(c, t, kind, variant),
                                     static_cast<std::size_t>(c.m), template_for(c, kind),
                                     load_templates(c));
}

reading::ReadingVectorSet read_pipeline(const RunConfig& c, const TaskSpec& t, const Runtime& rt,
                                        const std::vector<stimuli::Query>& chosen,
                                        stimuli::StimulusKind kind, int variant,
                                        const populations::ActivationDump* dump) {
  const auto set = stimulus_set(c, t, chosen, kind, variant);
  std::unique_ptr<populations::ActivationSource> source;
  if (dump != nullptr) {
    source = std::make_unique<populations::DumpSource>(*dump);
  } else {
    source = std::make_unique<populations::ModelSource>(rt.model, rt.tokenizer);
  }
  const auto layers = populations::resolve_layers(populations::LayerSpec::parse(c.layers), source->depth());
  const auto pop = populations::capture_population(*source, set, layers, workers_of(c));
  return reading::extract_reading_vectors(pop, c.center, workers_of(c));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string out_file(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

// ------------------------------------------------------------ commands

struct Extra {
  std::string readers, policy, prompt, response, dump, prompts, output, conditions, item, tables;
  std::string export_policy, dtype = "f64", name, target = "yes", alphas = "0,0.5,1,2,4,8";
  int limit = 0, count = 200, demos = 4;
  bool planted = false, write = false;
  std::optional<int> vocab;
  std::vector<std::string> files;
};

int cmd_read(const RunConfig& c, const Extra& x, std::ostream& out) {
  const auto t = load_task(c);
  const auto cfg = with_task_defaults(c, t);
  const auto rt = load_runtime(cfg);
  std::optional<populations::ActivationDump> dump;
  if (!x.dump.empty()) dump = populations::ActivationDump::load(x.dump);
  const auto readers = read_pipeline(cfg, t, rt, chosen_queries(cfg, t, rt), stimulus_kind(cfg), cfg.variant,
                                     dump ? &*dump : nullptr);
  const auto path = x.output.empty() ? out_file(cfg, "readers.rotv") : x.output;
  reading::save_reading_vectors(readers, path);
  for (const auto& [k, share] : readers.explained) {
    out << "layer " << k << " explained " << fmt("%.6f", share) << "\n";
  }
  out << "wrote " << path << "\n";
  return 0;
}

std::vector<localization::Format> formats_of(const RunConfig& c) {
  if (c.format == "all") {
    return {localization::Format::Plain, localization::Format::Ansi, localization::Format::Html};
  }
  return {localization::parse_format(c.format)};
}

int cmd_localize(const RunConfig& c, const Extra& x, std::ostream& out) {
  if (x.readers.empty()) throw Error(Errc::ConfigError, "localize needs --readers");
  const auto readers = reading::load_reading_vectors(x.readers);
  localization::PrefixScores scores;
  std::vector<std::string> tokens;
  std::string prompt_text = x.prompt;
  if (!x.dump.empty()) {
    if (x.item.empty()) throw Error(Errc::ConfigError, "dump-based localize needs --item");
    const auto dump = populations::ActivationDump::load(x.dump);
    std::size_t m = 0;
    while (dump.find(localization::prefix_record_id(x.item, m + 1), populations::Polarity::Positive)) ++m;
    scores = localization::score_prefixes(dump, x.item, m, readers, c.delta);
    tokens = model::Tokenizer::pretokenize(x.response);
    if (tokens.size() != m) {
      tokens.clear();
      for (std::size_t i = 1; i <= m; ++i) tokens.push_back("y" + std::to_string(i));
    }
  } else {
    if (x.prompt.empty()) throw Error(Errc::ConfigError, "localize needs --prompt");
    const auto rt = load_runtime(c);
    const auto ids = prompt_ids(rt.tokenizer, x.prompt);
    std::vector<model::TokenId> response;
    if (!x.response.empty()) {
      response = rt.tokenizer.encode(x.response);
    } else {
      response = strip_eos(model::generate(rt.model, ids, c.max_new_tokens, rt.tokenizer.eos()),
                           rt.tokenizer.eos());
    }
    scores = localization::score_prefixes(rt.model, ids, response, readers, c.delta);
    for (auto id : response) tokens.push_back(rt.tokenizer.token(id));
  }
  const auto report = localization::localize(scores, tokens, prompt_text);
  const std::string stem = x.name.empty() ? "report" : x.name;
  for (auto f : formats_of(c)) {
    const auto path = out_file(c, stem + "." + localization::format_extension(f));
    binio::write_text(path, localization::render_report(report, f));
    out << "wrote " << path << "\n";
  }
  out << "baseline " << fmt("%.6f", report.baseline) << " marked " << report.mark_count() << " of "
      << report.tokens.size() << "\n";
  for (std::size_t i = 0; i < report.tokens.size(); ++i) {
    if (report.tokens[i].mark == localization::Mark::ReasoningError) {
      out << "mark " << (i + 1) << " " << report.tokens[i].text << " " << fmt("%.6f", report.tokens[i].score)
          << "\n";
    }
  }
  return 0;
}

control::SteeringPolicy policy_of(const RunConfig& c, const Extra& x) {
  if (!x.policy.empty()) {
    auto p = control::load_policy(x.policy);
    if (c.is_explicit("alpha")) p.alpha = c.alpha;
    if (c.is_explicit("sign")) p.sign = control::parse_sign(c.sign);
    return p;
  }
  if (x.readers.empty()) throw Error(Errc::ConfigError, "steer needs --readers or --policy");
  control::SteeringPolicy p;
  p.readers = reading::load_reading_vectors(x.readers);
  p.alpha = c.alpha;
  p.sign = control::parse_sign(c.sign);
  return p;
}

// Restricts the policy to the configured layer spec when one was given.
void restrict_layers(const RunConfig& c, control::SteeringPolicy& p, int depth) {
  if (!c.is_explicit("layers")) return;
  const auto sel = populations::resolve_layers(populations::LayerSpec::parse(c.layers), depth);
  std::map<int, linalg::Vector> kept;
  for (int k : sel.layers) kept[k] = p.readers.at(k);
  p.readers.vectors = std::move(kept);
  std::map<int, double> shares;
  for (int k : sel.layers) shares[k] = p.readers.explained.count(k) ? p.readers.explained.at(k) : 0.0;
  p.readers.explained = std::move(shares);
}

int cmd_steer(const RunConfig& c0, const Extra& x, std::ostream& out) {
  RunConfig c = c0;
  if (!c.task.empty()) c = with_task_defaults(c, load_task(c));
  if (x.prompt.empty()) throw Error(Errc::ConfigError, "steer needs --prompt");
  const auto rt = load_runtime(c);
  auto policy = policy_of(c, x);
  restrict_layers(c, policy, rt.model.config().layers);
  if (!x.export_policy.empty()) control::save_policy(policy, x.export_policy);
  const auto ids = prompt_ids(rt.tokenizer, x.prompt);
  const auto res = control::steered_generate(rt.model, ids, policy, c.max_new_tokens, rt.tokenizer.eos());
  const auto tokens = strip_eos(res.tokens, rt.tokenizer.eos());
  nlohmann::ordered_json diag;
  diag["alpha"] = policy.alpha;
  diag["sign"] = control::sign_name(policy.sign);
  for (const auto& [k, a] : res.diagnostics.alphas) {
    const double proj = res.diagnostics.projections.at(k);
    out << "layer " << k << " alpha " << fmt("%+.6f", a) << " projection " << fmt("%+.6f", proj) << "\n";
    diag["layers"].push_back({{"layer", k}, {"alpha", a}, {"projection", proj}});
  }
  const auto& logits = res.diagnostics.first_logits;
  const auto top = model::argmax_token(logits);
  diag["first_token"] = rt.tokenizer.token(top);
  if (const auto& planted = rt.model.planted()) {
    const auto rank = model::token_rank(logits, planted->target);
    out << "target " << rt.tokenizer.token(planted->target) << " logit "
        << fmt("%.6f", logits[planted->target]) << " rank " << rank << "\n";
    diag["target"] = {{"token", rt.tokenizer.token(planted->target)},
                      {"logit", logits[planted->target]},
                      {"rank", rank}};
  }
  const auto text = rt.tokenizer.decode(tokens);
  diag["response"] = text;
  binio::write_text(out_file(c, "steer.json"), diag.dump(2) + "\n");
  out << "response: " << text << "\n";
  return 0;
}

int cmd_generate(const RunConfig& c, const Extra& x, std::ostream& out) {
  if (x.prompt.empty()) throw Error(Errc::ConfigError, "generate needs --prompt");
  const auto rt = load_runtime(c);
  const auto ids = prompt_ids(rt.tokenizer, x.prompt);
  const auto tokens = strip_eos(model::generate(rt.model, ids, c.max_new_tokens, rt.tokenizer.eos()),
                                rt.tokenizer.eos());
  out << "response: " << rt.tokenizer.decode(tokens) << "\n";
  return 0;
}

const char* kDefaultConditions = "base,cot_z1,cot_z2,cot_z3,rot_z1,rot_z2,rot_z3,cot_f1,cot_f2,rot_f1,rot_f2";

std::vector<eval::Condition> parse_conditions(const std::string& list) {
  std::vector<eval::Condition> out;
  std::istringstream in(list);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!trim(part).empty()) out.push_back(eval::Condition::parse(trim(part)));
  }
  if (out.empty()) throw Error(Errc::ConfigError, "no conditions given");
  return out;
}

eval::BenchmarkTask benchmark_task(const RunConfig& c, const TaskSpec& t,
                                   const std::vector<eval::Condition>& conds, int limit) {
  eval::BenchmarkTask bt;
  bt.name = t.name;
  bt.kind = t.kind;
  bt.queries = t.queries;
  std::sort(bt.queries.begin(), bt.queries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (limit > 0 && static_cast<std::size_t>(limit) < bt.queries.size()) bt.queries.resize(static_cast<std::size_t>(limit));
  int max_z = 0, max_f = 0;
  for (const auto& cd : conds) {
    if (cd.kind == eval::Condition::Kind::CotZ || cd.kind == eval::Condition::Kind::RotZ) max_z = std::max(max_z, cd.variant);
    if (cd.few_shot()) max_f = std::max(max_f, cd.variant);
  }
  for (int i = 1; i <= max_z; ++i) bt.zero_shot.push_back(zero_shot_variant(i));
  for (int j = 1; j <= max_f; ++j) bt.few_shot.push_back(few_shot_variant(t, c.seed, j));
  return bt;
}

std::map<std::string, control::SteeringPolicy> policies_for(const RunConfig& c, const Extra& x, const TaskSpec& t,
                                                            const Runtime& rt,
                                                            const std::vector<eval::Condition>& conds) {
  std::map<std::string, control::SteeringPolicy> out;
  std::optional<reading::ReadingVectorSet> shared;
  if (!x.readers.empty()) shared = reading::load_reading_vectors(x.readers);
  std::optional<std::vector<stimuli::Query>> chosen;
  for (const auto& cd : conds) {
    if (!cd.steered()) continue;
    control::SteeringPolicy p;
    p.alpha = c.alpha;
    p.sign = control::parse_sign(c.sign);
    if (!shared && !chosen) chosen = chosen_queries(c, t, rt);
    p.readers = shared ? *shared
                       : read_pipeline(c, t, rt, *chosen,
                                       cd.few_shot() ? stimuli::StimulusKind::FewShot : stimuli::StimulusKind::ZeroShot,
                                       cd.variant, nullptr);
    out.emplace(cd.name(), std::move(p));
  }
  return out;
}

eval::BenchmarkConfig bench_config(const RunConfig& c) {
  eval::BenchmarkConfig bc;
  bc.max_new_tokens = c.max_new_tokens;
  bc.answer_tokens = c.answer_tokens;
  bc.templates = load_templates(c);
  if (!c.template_id.empty()) bc.zero_shot_template = c.template_id;
  bc.workers = workers_of(c);
  return bc;
}

int cmd_eval(const RunConfig& c0, const Extra& x, std::ostream& out) {
  const auto t = load_task(c0);
  const auto c = with_task_defaults(c0, t);
  const auto rt = load_runtime(c);
  const auto conds = parse_conditions(x.conditions.empty() ? kDefaultConditions : x.conditions);
  const auto bt = benchmark_task(c, t, conds, x.limit);
  const auto policies = policies_for(c, x, t, rt, conds);
  const eval::ToyTextModel tm(rt.model, rt.tokenizer);
  const auto result = eval::run_benchmark(bt, tm, conds, policies, bench_config(c));
  const auto summary = out_file(c, "summary.jsonl");
  const auto records = out_file(c, "records.jsonl");
  binio::write_text(summary, result.summary_jsonl());
  binio::write_text(records, result.records_jsonl());
  for (const auto& s : result.conditions) {
    out << s.condition << " accuracy " << fmt("%.2f", s.accuracy) << " (" << s.correct << "/" << s.total
        << ", no answer " << s.no_answer << ")\n";
  }
  for (const auto& g : result.groups) out << g.group << " robustness " << fmt("%.2f", g.robustness) << "\n";
  out << "wrote " << summary << "\nwrote " << records << "\n";
  return 0;
}

int cmd_robustness_table(const Extra& x, std::ostream& out) {
  const auto path = x.tables.empty() ? data_path("robustness_tables.json") : x.tables;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(binio::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptFile, path + ": " + e.what());
  }
  std::size_t total = 0, matched = 0;
  try {
    const auto tasks = j.at("tasks").get<std::vector<std::string>>();
    for (const auto& m : j.at("models")) {
      const auto name = m.at("name").get<std::string>();
      for (const auto& [method, runs] : m.at("runs").items()) {
        const auto published = m.at("published").at(method).get<std::vector<double>>();
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
          std::vector<double> acc;
          for (const auto& r : runs) acc.push_back(r.at(ti).get<double>());
          const double score = eval::round2(eval::robustness_score(acc));
          const bool ok = std::abs(score - published.at(ti)) <= 0.01 + 1e-9;
          ++total;
          matched += ok ? 1 : 0;
          out << name << "\t" << method << "\t" << tasks[ti] << "\t" << fmt("%.2f", score) << "\tpublished "
              << fmt("%.2f", published.at(ti)) << "\t" << (ok ? "match" : "MISMATCH") << "\n";
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptFile, path + ": " + e.what());
  }
  out << "matched " << matched << " of " << total << "\n";
  return 0;
}

populations::DumpDtype parse_dtype(const std::string& s) {
  if (s == "f64") return populations::DumpDtype::F64;
  if (s == "f32") return populations::DumpDtype::F32;
  throw Error(Errc::ConfigError, "dtype must be f32 or f64");
}

int cmd_dump(const RunConfig& c0, const Extra& x, std::ostream& out) {
  RunConfig c = c0;
  std::optional<TaskSpec> t;
  if (x.prompts.empty() && x.item.empty()) {
    t = load_task(c);
    c = with_task_defaults(c, *t);
  }
  const auto rt = load_runtime(c);
  const auto layers =
      populations::resolve_layers(populations::LayerSpec::parse(c.layers), rt.model.config().layers).layers;
  const auto dtype = parse_dtype(x.dtype);
  populations::ActivationDump dump;
  if (!x.item.empty()) {
    // Prefix records <item>@i for localization of an external response.
    if (x.prompt.empty() || x.response.empty()) throw Error(Errc::ConfigError, "prefix dumps need --prompt and --response");
    auto ids = prompt_ids(rt.tokenizer, x.prompt);
    const auto resp = rt.tokenizer.encode(x.response);
    if (resp.empty()) throw Error(Errc::EmptyResponse, "response has no tokens");
    const std::size_t base = ids.size() - 1;
    ids.insert(ids.end(), resp.begin(), resp.end());
    const auto fwd = model::forward_with_taps(rt.model, ids, nullptr, false);
    dump.model_id = rt.model.id();
    dump.hidden = rt.model.config().hidden;
    dump.layers = layers;
    dump.dtype = dtype;
    for (std::size_t i = 0; i <= resp.size(); ++i) {
      populations::DumpRecord rec{localization::prefix_record_id(x.item, i), populations::Polarity::Positive, {}};
      for (int k : layers) {
        const auto h = fwd.trace.at(k, base + i);
        rec.layers.emplace_back(h.begin(), h.end());
      }
      dump.add(std::move(rec));
    }
  } else {
    std::vector<populations::PromptRecord> prompts;
    if (!x.prompts.empty()) {
      prompts = populations::parse_prompts_jsonl(binio::read_text(x.prompts));
    } else {
      prompts = populations::prompts_of(stimulus_set(c, *t, chosen_queries(c, *t, rt), stimulus_kind(c), c.variant));
    }
    dump = populations::dump_prompts(rt.model, rt.tokenizer, prompts, layers, dtype, workers_of(c));
  }
  const auto path = x.output.empty() ? out_file(c, "activations.rotd") : x.output;
  dump.save(path);
  out << "records " << dump.records().size() << " layers " << dump.layers.size() << "\n";
  out << "wrote " << path << "\n";
  return 0;
}

int cmd_prompts(const RunConfig& c0, const Extra& x, std::ostream& out) {
  const auto t = load_task(c0);
  const auto c = with_task_defaults(c0, t);
  const auto rt = load_runtime(c);
  const auto prompts = populations::prompts_of(stimulus_set(c, t, chosen_queries(c, t, rt), stimulus_kind(c), c.variant));
  const auto path = x.output.empty() ? out_file(c, "prompts.jsonl") : x.output;
  binio::write_text(path, populations::prompts_to_jsonl(prompts));
  out << "prompts " << prompts.size() << "\nwrote " << path << "\n";
  return 0;
}

int cmd_inspect(const Extra& x, std::ostream& out) {
  if (x.files.empty()) throw Error(Errc::ConfigError, "inspect needs a file");
  for (const auto& path : x.files) {
    const auto bytes = binio::read_file(path);
    const std::string magic(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, bytes.size())));
    out << path << ": ";
    if (magic == "ROTM") {
      const auto m = model::ToyTransformer::deserialize(bytes);
      const auto& mc = m.config();
      out << "model id " << m.id() << " layers " << mc.layers << " hidden " << mc.hidden << " heads " << mc.heads
          << " vocab " << mc.vocab << " context " << mc.context << (m.planted() ? " planted" : "") << "\n";
    } else if (magic == "ROTV") {
      const auto r = reading::deserialize(bytes);
      out << "reading vectors d " << r.hidden() << " layers";
      for (int k : r.layers()) out << " " << k;
      out << " orientation " << r.orientation << " centered " << (r.centered ? "yes" : "no") << " n "
          << r.provenance.query_count << " m " << r.provenance.stimuli_count << "\n";
    } else if (magic == "ROTD") {
      const auto d = populations::ActivationDump::deserialize(bytes);
      out << "activation dump model " << d.model_id << " d " << d.hidden << " layers";
      for (int k : d.layers) out << " " << k;
      out << " records " << d.records().size() << " dtype " << (d.dtype == populations::DumpDtype::F64 ? "f64" : "f32")
          << "\n";
    } else if (magic == "ROTS") {
      const auto p = control::deserialize_policy(bytes);
      out << "steering policy alpha " << fmt("%g", p.alpha) << " sign " << control::sign_name(p.sign) << " layers";
      for (int k : p.readers.layers()) out << " " << k;
      out << "\n";
    } else {
      throw Error(Errc::CorruptFile, path + ": unknown file magic");
    }
  }
  return 0;
}

int cmd_build_model(const RunConfig& c, const Extra& x, std::ostream& out) {
  const auto tok = load_tokenizer(c);
  auto mc = model_config(c, x.vocab ? static_cast<std::size_t>(*x.vocab) : tok.size());
  const auto path = x.output.empty() ? out_file(c, x.planted ? "planted.rotm" : "model.rotm") : x.output;
  if (!x.planted) {
    const auto m = model::ToyTransformer::build(c.seed, mc);
    m.save(path);
    out << "model " << m.id() << "\nwrote " << path << "\n";
    return 0;
  }
  mc.final_norm = model::FinalNorm::Identity;
  const auto target = tok.find(x.target);
  if (!target) throw Error(Errc::TokenOutOfRange, "target token '" + x.target + "' is not in the lexicon");
  Rng rng(derive_seed(c.seed, "planted.direction"));
  linalg::Vector u(static_cast<std::size_t>(mc.hidden));
  for (auto& v : u) v = rng.normal();
  u = linalg::normalized(u);
  const auto m = model::ToyTransformer::build_planted(c.seed, mc, {mc.layers, u, *target});
  m.save(path);
  reading::ReadingVectorSet r;
  r.vectors[mc.layers] = u;
  r.explained[mc.layers] = 1.0;
  r.orientation = "planted";
  r.centered = false;
  r.provenance.model_id = m.id();
  const auto rpath = (fs::path(path).parent_path() / (fs::path(path).stem().string() + ".rotv")).string();
  reading::save_reading_vectors(r, rpath);
  out << "model " << m.id() << " planted layer " << mc.layers << " target " << x.target << " slope "
      << fmt("%.6f", m.planted()->slope) << "\nwrote " << path << "\nwrote " << rpath << "\n";
  return 0;
}

int cmd_gen_task(const RunConfig& c, const Extra& x, std::ostream& out) {
  if (x.name.empty()) throw Error(Errc::ConfigError, "gen-task needs --name");
  const auto kind = toytasks::kind_of(x.name);
  fs::create_directories(c.out);
  const auto base = fs::path(c.out);
  const auto qfile = x.name + ".jsonl";
  const auto dfile = x.name + ".demos.jsonl";
  binio::write_text((base / qfile).string(),
                    toytasks::queries_to_jsonl(toytasks::generate(x.name, static_cast<std::size_t>(x.count), c.seed)));
  binio::write_text((base / dfile).string(),
                    toytasks::demos_to_jsonl(toytasks::demonstrations(x.name, static_cast<std::size_t>(x.demos), c.seed)));
  const auto conf = (base / (x.name + ".conf")).string();
  if (!fs::exists(conf)) {
    binio::write_text(conf, "# " + x.name + " (seed " + std::to_string(c.seed) + ")\nname = " + x.name +
                                "\nkind = " + eval::task_kind_name(kind) + "\nqueries = " + qfile +
                                "\ndemos = " + dfile + "\nalpha = 1\nmax-new-tokens = 32\n");
  }
  out << "wrote " << (base / qfile).string() << "\nwrote " << (base / dfile).string() << "\n";
  return 0;
}

int cmd_lexicon(const RunConfig& c, const Extra& x, std::ostream& out) {
  std::vector<std::string> texts;
  std::vector<std::string> confs = x.files;
  if (confs.empty()) {
    for (const auto& n : toytasks::names()) confs.push_back(data_path("tasks/" + n + ".conf"));
  }
  for (const auto& conf : confs) {
    RunConfig tc = c;
    tc.task = conf;
    const auto t = load_task(tc);
    for (const auto& q : t.queries) {
      texts.push_back(q.question);
      texts.push_back(q.answer);
    }
    for (const auto& d : t.demos) {
      texts.push_back(d.question);
      texts.push_back(d.answer);
    }
    texts.push_back(eval::ExtractionTemplate::for_kind(t.kind).trigger);
  }
  for (const auto& s : zero_shot_pool()) texts.push_back(s.instruction);
  texts.push_back("USER: ASSISTANT: Q: A:");
  const auto tok = model::Tokenizer::from_corpus(texts);
  const auto path = x.output.empty() ? out_file(c, "lexicon.txt") : x.output;
  binio::write_text(path, tok.to_lexicon_text());
  out << "tokens " << tok.size() << "\nwrote " << path << "\n";
  return 0;
}

int cmd_export_text(const Extra& x, std::ostream& out) {
  if (x.readers.empty()) throw Error(Errc::ConfigError, "export-text needs --readers");
  const auto text = reading::to_text(reading::load_reading_vectors(x.readers));
  if (x.output.empty()) {
    out << text;
  } else {
    binio::write_text(x.output, text);
    out << "wrote " << x.output << "\n";
  }
  return 0;
}

// Picks alpha for rot_z1 on a dev slice: best accuracy, smallest |alpha| on ties.
int cmd_calibrate(const RunConfig& c0, const Extra& x, std::ostream& out) {
  const auto t = load_task(c0);
  const auto c = with_task_defaults(c0, t);
  const auto rt = load_runtime(c);
  std::vector<double> grid;
  {
    std::istringstream in(x.alphas);
    std::string part;
    while (std::getline(in, part, ',')) grid.push_back(parse_number<double>("alphas", part));
  }
  if (grid.empty()) throw Error(Errc::ConfigError, "empty alpha grid");
  const std::vector<eval::Condition> conds{eval::Condition::parse("rot_z1")};
  const auto bt = benchmark_task(c, t, conds, x.limit > 0 ? x.limit : 24);
  const auto readers = read_pipeline(c, t, rt, chosen_queries(c, t, rt), stimuli::StimulusKind::ZeroShot, 1, nullptr);
  const eval::ToyTextModel tm(rt.model, rt.tokenizer);
  double best_alpha = grid.front(), best_acc = -1.0;
  for (double a : grid) {
    control::SteeringPolicy p{readers, a, control::parse_sign(c.sign)};
    const auto r = eval::run_benchmark(bt, tm, conds, {{"rot_z1", p}}, bench_config(c));
    const double acc = r.conditions.front().accuracy;
    out << "alpha " << fmt("%g", a) << " accuracy " << fmt("%.2f", acc) << "\n";
    if (acc > best_acc || (acc == best_acc && std::abs(a) < std::abs(best_alpha))) {
      best_acc = acc;
      best_alpha = a;
    }
  }
  out << "best alpha " << fmt("%g", best_alpha) << "\n";
  if (x.write) {
    std::string ref = c.task;
    if (!fs::exists(ref)) ref = data_path("tasks/" + ref + ".conf");
    std::istringstream in(binio::read_text(ref));
    std::string line, text;
    bool replaced = false;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos && trim(line.substr(0, eq)) == "alpha") {
        line = "alpha = " + fmt("%g", best_alpha);
        replaced = true;
      }
      text += line + "\n";
    }
    if (!replaced) text += "alpha = " + fmt("%g", best_alpha) + "\n";
    binio::write_text(ref, text);
    out << "updated " << ref << "\n";
  }
  return 0;
}

// ------------------------------------------------------------ wiring

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  if (const char* env = std::getenv("ROT_CONFIG")) return std::string(env);
  return std::nullopt;
}

struct Bound {
  std::string key;
  CLI::Option* opt;
};

void add_common(CLI::App& app, RunConfig& c, std::vector<Bound>& bound) {
  auto add = [&](const std::string& key, auto& field, const std::string& help) {
    std::string env = "ROT_" + key;
    std::transform(env.begin(), env.end(), env.begin(), [](char ch) {
      return ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    });
    auto* o = app.add_option("--" + key, field, help)->envname(env);
    bound.push_back({key, o});
  };
  add("model", c.model, "ROTM model file (default: toy model built from --seed)");
  add("seed", c.seed, "root seed");
  add("depth", c.depth, "toy model layer count");
  add("hidden", c.hidden, "toy model width");
  add("heads", c.heads, "toy model attention heads");
  add("context", c.context, "toy model context length");
  add("lexicon", c.lexicon, "lexicon file");
  add("templates", c.templates, "template registry file");
  add("layers", c.layers, "layer set: last:L or a,b,c");
  add("n-samples", c.n_samples, "number of stimulus queries N");
  add("select", c.select, "query selection: random, low-ppl, high-ppl");
  add("stimuli", c.stimuli, "stimulus kind: zero or few");
  add("variant", c.variant, "stimulus variant (Z_i / F_j)");
  add("m", c.m, "stimuli per query M");
  add("center", c.center, "mean-center populations before PCA");
  add("delta", c.delta, "localization threshold");
  add("alpha", c.alpha, "steering strength");
  add("sign", c.sign, "steering sign: proj, pos, neg");
  add("max-new-tokens", c.max_new_tokens, "generation budget");
  add("answer-tokens", c.answer_tokens, "answer-stage generation budget");
  add("template", c.template_id, "template id");
  add("task", c.task, "task .conf, .jsonl or bundled task name");
  add("kind", c.kind, "task kind for .jsonl tasks");
  add("out", c.out, "output directory");
  add("format", c.format, "report format: plain, ansi, html, all");
  add("workers", c.workers, "worker threads (0 = all cores)");
  app.add_option("--config", "key = value config file")->envname("ROT_CONFIG");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  Extra x;
  CLI::App app{"Representation reading, localization and steering toolkit", "rot"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::vector<Bound> bound;

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    add_common(*s, cfg, bound);
    return s;
  };
  auto* read = sub("read", "extract reading vectors from a task (writes ROTV)");
  read->add_option("--dump", x.dump, "capture from an ROTD dump instead of the live model");
  read->add_option("--output", x.output, "ROTV path (default <out>/readers.rotv)");
  auto* loc = sub("localize", "score response prefixes and mark reasoning errors");
  loc->add_option("--readers", x.readers, "ROTV file");
  loc->add_option("--prompt", x.prompt, "prompt text");
  loc->add_option("--response", x.response, "response text (generated when omitted)");
  loc->add_option("--dump", x.dump, "ROTD prefix dump instead of the live model");
  loc->add_option("--item", x.item, "item id of the prefix records in --dump");
  loc->add_option("--name", x.name, "report file stem (default report)");
  auto* steer = sub("steer", "steered generation");
  steer->add_option("--readers", x.readers, "ROTV file");
  steer->add_option("--policy", x.policy, "ROTS policy file");
  steer->add_option("--prompt", x.prompt, "prompt text");
  steer->add_option("--export-policy", x.export_policy, "write the policy as ROTS");
  auto* gen = sub("generate", "unsteered greedy generation");
  gen->add_option("--prompt", x.prompt, "prompt text");
  auto* ev = sub("eval", "benchmark base / CoT / RoT conditions");
  ev->add_option("--conditions", x.conditions, "comma list (default all eleven)");
  ev->add_option("--limit", x.limit, "evaluate only the first N queries by id");
  ev->add_option("--readers", x.readers, "use one ROTV file for every RoT condition");
  auto* t2 = sub("robustness-table", "recompute published robustness scores from their accuracy tables");
  t2->add_option("--tables", x.tables, "robustness table fixture (JSON)");
  auto* dump = sub("dump", "write an ROTD activation dump");
  dump->add_option("--prompts", x.prompts, "prompts JSONL {id, polarity, text}");
  dump->add_option("--output", x.output, "ROTD path (default <out>/activations.rotd)");
  dump->add_option("--dtype", x.dtype, "f64 or f32");
  dump->add_option("--item", x.item, "write prefix records <item>@i for --prompt/--response");
  dump->add_option("--prompt", x.prompt, "prompt text for prefix dumps");
  dump->add_option("--response", x.response, "response text for prefix dumps");
  auto* insp = sub("inspect", "describe ROTM / ROTV / ROTD / ROTS files");
  insp->add_option("files", x.files, "files")->required();
  auto* pr = sub("prompts", "write the stimulus prompt pairs as JSONL");
  pr->add_option("--output", x.output, "output path (default <out>/prompts.jsonl)");
  auto* bm = sub("build-model", "build and save a toy model (ROTM)");
  bm->add_option("--output", x.output, "ROTM path");
  bm->add_option("--vocab", x.vocab, "vocabulary size (default lexicon size)");
  bm->add_flag("--planted", x.planted, "plant a steering direction at the last layer");
  bm->add_option("--target", x.target, "planted target token");
  auto* gt = sub("gen-task", "generate a toy task fixture");
  gt->add_option("--name", x.name, "coin-parity, letter-pick or add-small");
  gt->add_option("--count", x.count, "query count");
  gt->add_option("--demos", x.demos, "demonstration count");
  auto* lex = sub("lexicon", "build the lexicon from task fixtures");
  lex->add_option("--output", x.output, "lexicon path");
  lex->add_option("confs", x.files, "task .conf files (default bundled tasks)");
  auto* et = sub("export-text", "ROTV to plain text");
  et->add_option("--readers", x.readers, "ROTV file");
  et->add_option("--output", x.output, "text path (default stdout)");
  auto* cal = sub("calibrate", "sweep alpha for a task");
  cal->add_option("--alphas", x.alphas, "comma-separated alpha grid");
  cal->add_option("--limit", x.limit, "dev queries (default 24)");
  cal->add_flag("--write", x.write, "store the best alpha in the task .conf");

  try {
    if (const auto path = find_config_path(args)) apply_config_text(cfg, binio::read_text(*path));
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
      app.parse(rev);
    } catch (const CLI::CallForHelp&) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    for (const auto& b : bound) {
      if (b.opt->count() > 0) cfg.explicit_keys.insert(b.key);
    }
    validate(cfg);
    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "read") return cmd_read(cfg, x, out);
    if (name == "localize") return cmd_localize(cfg, x, out);
    if (name == "steer") return cmd_steer(cfg, x, out);
    if (name == "generate") return cmd_generate(cfg, x, out);
    if (name == "eval") return cmd_eval(cfg, x, out);
    if (name == "robustness-table") return cmd_robustness_table(x, out);
    if (name == "dump") return cmd_dump(cfg, x, out);
    if (name == "inspect") return cmd_inspect(x, out);
    if (name == "prompts") return cmd_prompts(cfg, x, out);
    if (name == "build-model") return cmd_build_model(cfg, x, out);
    if (name == "gen-task") return cmd_gen_task(cfg, x, out);
    if (name == "lexicon") return cmd_lexicon(cfg, x, out);
    if (name == "export-text") return cmd_export_text(x, out);
    if (name == "calibrate") return cmd_calibrate(cfg, x, out);
    err << "error: unknown command " << name << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error [IoFailure]: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rot::cli
