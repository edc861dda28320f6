#include "rot/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rot/binio.hpp"
#include "rot/error.hpp"
#include "rot/kernels.hpp"
#include "rot/rng.hpp"

namespace rot::model {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kNormEps = 1e-5;

Vector gaussian(Rng& rng, std::size_t n, double stddev) {
  Vector v(n);
  for (double& x : v) x = stddev * rng.normal();
  return v;
}

void layer_norm(std::span<const double> x, std::span<const double> gain,
                std::span<const double> bias, std::span<double> out) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + kNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
}

double gelu(double x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (layers < 1) fail("layers must be >= 1");
  if (hidden < 2) fail("hidden dimension must be >= 2");
  if (heads < 1 || hidden % heads != 0) {
    fail("hidden dimension " + std::to_string(hidden) + " not divisible by " +
         std::to_string(heads) + " heads");
  }
  if (vocab < 4) fail("vocabulary must have >= 4 tokens");
  if (context < 1) fail("context must be >= 1");
}

ToyTransformer::ToyTransformer(ModelConfig config, std::uint64_t seed, Weights weights,
                               std::optional<PlantedInfo> planted)
    : config_(config), seed_(seed), weights_(std::move(weights)), planted_(std::move(planted)) {}

ToyTransformer ToyTransformer::build(std::uint64_t seed, const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden);
  const auto v = static_cast<std::size_t>(config.vocab);
  const auto ctx = static_cast<std::size_t>(config.context);
  const std::size_t ff = 4 * d;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Rng rng(derive_seed(seed, "model.weights"));
  Weights w;
  w.token_embedding = gaussian(rng, v * d, 1.0);
  w.position_embedding = gaussian(rng, ctx * d, 0.1);
  for (int l = 0; l < config.layers; ++l) {
    BlockWeights b;
    b.ln1_gain.assign(d, 1.0);
    b.ln1_bias.assign(d, 0.0);
    b.wq = gaussian(rng, d * d, inv_sqrt_d);
    b.wk = gaussian(rng, d * d, inv_sqrt_d);
    b.wv = gaussian(rng, d * d, inv_sqrt_d);
    b.wo = gaussian(rng, d * d, inv_sqrt_d);
    b.ln2_gain.assign(d, 1.0);
    b.ln2_bias.assign(d, 0.0);
    b.w_up = gaussian(rng, d * ff, inv_sqrt_d);
    b.b_up = gaussian(rng, ff, 0.02);
    b.w_down = gaussian(rng, ff * d, 1.0 / std::sqrt(static_cast<double>(ff)));
    b.b_down = gaussian(rng, d, 0.02);
    w.blocks.push_back(std::move(b));
  }
  w.final_gain.assign(d, 1.0);
  w.final_bias.assign(d, 0.0);
  w.unembedding = gaussian(rng, d * v, inv_sqrt_d);
  return ToyTransformer(config, seed, std::move(w), std::nullopt);
}

ToyTransformer ToyTransformer::build_planted(std::uint64_t seed, const ModelConfig& config,
                                             const PlantSpec& plant) {
  config.validate();
  if (plant.layer != config.layers) {
    throw Error(Errc::InvalidConfig, "planted layer must be the last layer (" +
                                         std::to_string(config.layers) + ")");
  }
  if (config.final_norm != FinalNorm::Identity) {
    throw Error(Errc::InvalidConfig, "planted model requires an identity final norm");
  }
  if (plant.direction.size() != static_cast<std::size_t>(config.hidden)) {
    throw Error(Errc::InvalidConfig, "planted direction has the wrong dimension");
  }
  if (plant.target >= static_cast<TokenId>(config.vocab)) {
    throw Error(Errc::InvalidConfig, "planted target outside the vocabulary");
  }
  ToyTransformer m = build(seed, config);
  const Vector u = linalg::normalized(plant.direction);
  const auto d = static_cast<std::size_t>(config.hidden);
  const auto v = static_cast<std::size_t>(config.vocab);
  auto& wu = m.weights_.unembedding;

  auto slope_of = [&](std::size_t tok) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += u[i] * wu[i * v + tok];
    return s;
  };
  double best_other = -1e300;
  for (std::size_t t = 0; t < v; ++t)
    if (t != plant.target) best_other = std::max(best_other, slope_of(t));
  const double boost = std::max(0.0, best_other - slope_of(plant.target)) + 1.0;
  for (std::size_t i = 0; i < d; ++i) wu[i * v + plant.target] += boost * u[i];

  m.planted_ = PlantedInfo{plant.layer, plant.target, u, slope_of(plant.target)};
  return m;
}

ToyTransformer ToyTransformer::from_weights(const ModelConfig& config, std::uint64_t seed,
                                            Weights w, std::optional<PlantedInfo> planted) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden);
  const auto v = static_cast<std::size_t>(config.vocab);
  const auto ctx = static_cast<std::size_t>(config.context);
  auto check = [](const Vector& t, std::size_t n, const char* name) {
    if (t.size() != n) throw Error(Errc::InvalidConfig, std::string("tensor ") + name + " has wrong size");
    linalg::require_finite(t);
  };
  check(w.token_embedding, v * d, "token_embedding");
  check(w.position_embedding, ctx * d, "position_embedding");
  if (w.blocks.size() != static_cast<std::size_t>(config.layers)) {
    throw Error(Errc::InvalidConfig, "block count does not match layers");
  }
  for (const auto& b : w.blocks) {
    check(b.ln1_gain, d, "ln1_gain");
    check(b.ln1_bias, d, "ln1_bias");
    check(b.wq, d * d, "wq");
    check(b.wk, d * d, "wk");
    check(b.wv, d * d, "wv");
    check(b.wo, d * d, "wo");
    check(b.ln2_gain, d, "ln2_gain");
    check(b.ln2_bias, d, "ln2_bias");
    check(b.w_up, d * 4 * d, "w_up");
    check(b.b_up, 4 * d, "b_up");
    check(b.w_down, 4 * d * d, "w_down");
    check(b.b_down, d, "b_down");
  }
  check(w.final_gain, d, "final_gain");
  check(w.final_bias, d, "final_bias");
  check(w.unembedding, d * v, "unembedding");
  return ToyTransformer(config, seed, std::move(w), std::move(planted));
}

std::string ToyTransformer::id() const {
  std::string s = "toy:L" + std::to_string(config_.layers) + ":d" + std::to_string(config_.hidden) +
                  ":h" + std::to_string(config_.heads) + ":V" + std::to_string(config_.vocab) +
                  ":ctx" + std::to_string(config_.context) + ":seed" + std::to_string(seed_);
  if (config_.final_norm == FinalNorm::Identity) s += ":idnorm";
  if (planted_) s += ":planted" + std::to_string(planted_->target);
  return s;
}

std::vector<unsigned char> ToyTransformer::serialize() const {
  binio::Writer w;
  w.magic("ROTM");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(config_.layers));
  w.u32(static_cast<std::uint32_t>(config_.hidden));
  w.u32(static_cast<std::uint32_t>(config_.heads));
  w.u32(static_cast<std::uint32_t>(config_.vocab));
  w.u8(static_cast<std::uint8_t>(config_.final_norm));
  w.u64(seed_);
  w.u32(static_cast<std::uint32_t>(config_.context));
  w.f64s(weights_.token_embedding);
  w.f64s(weights_.position_embedding);
  for (const auto& b : weights_.blocks) {
    for (const Vector* t : {&b.ln1_gain, &b.ln1_bias, &b.wq, &b.wk, &b.wv, &b.wo, &b.ln2_gain,
                            &b.ln2_bias, &b.w_up, &b.b_up, &b.w_down, &b.b_down}) {
      w.f64s(*t);
    }
  }
  w.f64s(weights_.final_gain);
  w.f64s(weights_.final_bias);
  w.f64s(weights_.unembedding);
  w.u8(planted_ ? 1 : 0);
  if (planted_) {
    w.u32(static_cast<std::uint32_t>(planted_->layer));
    w.u32(planted_->target);
    w.f64(planted_->slope);
    w.f64s(planted_->direction);
  }
  return w.buffer();
}

ToyTransformer ToyTransformer::deserialize(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ROTM");
  if (r.u32() != kCheckpointVersion) throw Error(Errc::CorruptFile, "unsupported ROTM version");
  ModelConfig c;
  c.layers = static_cast<int>(r.u32());
  c.hidden = static_cast<int>(r.u32());
  c.heads = static_cast<int>(r.u32());
  c.vocab = static_cast<int>(r.u32());
  const std::uint8_t norm = r.u8();
  if (norm > 1) throw Error(Errc::CorruptFile, "bad final_norm flag");
  c.final_norm = static_cast<FinalNorm>(norm);
  const std::uint64_t seed = r.u64();
  c.context = static_cast<int>(r.u32());
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(Errc::CorruptFile, e.what());
  }
  const auto d = static_cast<std::size_t>(c.hidden);
  const auto v = static_cast<std::size_t>(c.vocab);
  Weights w;
  w.token_embedding = r.f64s(v * d);
  w.position_embedding = r.f64s(static_cast<std::size_t>(c.context) * d);
  for (int l = 0; l < c.layers; ++l) {
    BlockWeights b;
    b.ln1_gain = r.f64s(d);
    b.ln1_bias = r.f64s(d);
    b.wq = r.f64s(d * d);
    b.wk = r.f64s(d * d);
    b.wv = r.f64s(d * d);
    b.wo = r.f64s(d * d);
    b.ln2_gain = r.f64s(d);
    b.ln2_bias = r.f64s(d);
    b.w_up = r.f64s(d * 4 * d);
    b.b_up = r.f64s(4 * d);
    b.w_down = r.f64s(4 * d * d);
    b.b_down = r.f64s(d);
    w.blocks.push_back(std::move(b));
  }
  w.final_gain = r.f64s(d);
  w.final_bias = r.f64s(d);
  w.unembedding = r.f64s(d * v);
  std::optional<PlantedInfo> planted;
  if (r.u8() == 1) {
    PlantedInfo p;
    p.layer = static_cast<int>(r.u32());
    p.target = r.u32();
    p.slope = r.f64();
    p.direction = r.f64s(d);
    planted = std::move(p);
  }
  if (!r.at_end()) throw Error(Errc::CorruptFile, "trailing bytes in ROTM file");
  try {
    return from_weights(c, seed, std::move(w), std::move(planted));
  } catch (const Error& e) {
    throw Error(Errc::CorruptFile, e.what());
  }
}

void ToyTransformer::save(const std::string& path) const { binio::write_file(path, serialize()); }

ToyTransformer ToyTransformer::load(const std::string& path) {
  return deserialize(binio::read_file(path));
}

// ---------------------------------------------------------------- trace

std::span<const double> ActivationTrace::at(int layer, std::size_t pos) const {
  if (layer < 1 || layer > layers_ || pos >= positions_) {
    throw Error(Errc::LayerMismatch, "trace index (layer " + std::to_string(layer) + ", position " +
                                         std::to_string(pos) + ") out of range");
  }
  const auto d = static_cast<std::size_t>(hidden_);
  return {data_[layer - 1].data() + pos * d, d};
}

std::span<const double> ActivationTrace::pre_injection(int layer, std::size_t pos) const {
  auto it = pre_injection_.find({layer, pos});
  if (it != pre_injection_.end()) return it->second;
  return at(layer, pos);
}

void ActivationTrace::push(int layer, std::span<const double> h) {
  auto& buf = data_[layer - 1];
  buf.insert(buf.end(), h.begin(), h.end());
}

void ActivationTrace::push_pre_injection(int layer, std::size_t pos, std::span<const double> h) {
  pre_injection_[{layer, pos}] = Vector(h.begin(), h.end());
}

// ---------------------------------------------------------------- forward

ResolvedInjection resolve_injection(const ToyTransformer& model, std::span<const TokenId> prompt,
                                    const InjectionHook& hook) {
  const auto& cfg = model.config();
  ResolvedInjection out;
  if (prompt.empty()) throw Error(Errc::EmptyPrompt, "injection needs a nonempty prompt");
  out.start_position = hook.start_position.value_or(prompt.size() - 1);
  for (const auto& [layer, dir] : hook.directions) {
    if (layer < 1 || layer > cfg.layers) {
      throw Error(Errc::LayerMismatch, "injection layer " + std::to_string(layer) +
                                           " outside 1.." + std::to_string(cfg.layers));
    }
    if (dir.size() != static_cast<std::size_t>(cfg.hidden)) {
      throw Error(Errc::DimensionMismatch, "injection direction has the wrong dimension");
    }
    if (std::abs(linalg::norm(dir) - 1.0) > 1e-6) {
      throw Error(Errc::NormViolation, "injection direction is not unit norm");
    }
  }
  if (hook.directions.empty()) return out;

  if (hook.sign_mode == SignMode::Fixed) {
    for (const auto& [layer, dir] : hook.directions) out.alphas[layer] = hook.scale;
  } else {
    if (out.start_position >= prompt.size()) {
      throw Error(Errc::LengthMismatch, "sign evaluation position beyond the prompt");
    }
    DecodeSession plain(model, std::nullopt, false);
    for (std::size_t p = 0; p <= out.start_position; ++p) plain.append(prompt[p], false);
    for (const auto& [layer, dir] : hook.directions) {
      const double proj = linalg::dot(plain.last_hidden(layer), dir);
      out.alphas[layer] = std::abs(hook.scale) * (proj < 0.0 ? -1.0 : 1.0);
    }
  }
  for (const auto& [layer, dir] : hook.directions) {
    Vector off(dir.size());
    const double a = out.alphas[layer];
    for (std::size_t i = 0; i < dir.size(); ++i) off[i] = a * dir[i];
    out.offsets[layer] = std::move(off);
  }
  return out;
}

DecodeSession::DecodeSession(const ToyTransformer& model, std::optional<ResolvedInjection> injection,
                             bool keep_trace)
    : model_(&model),
      injection_(std::move(injection)),
      keep_trace_(keep_trace),
      keys_(model.config().layers),
      values_(model.config().layers),
      last_(model.config().layers),
      trace_(model.config().layers, model.config().hidden) {}

std::span<const double> DecodeSession::last_hidden(int layer) const {
  if (length_ == 0 || layer < 1 || layer > model_->config().layers) {
    throw Error(Errc::LayerMismatch, "no activation for layer " + std::to_string(layer));
  }
  return last_[layer - 1];
}

std::span<const double> DecodeSession::append(TokenId token, bool want_logits) {
  const auto& cfg = model_->config();
  const auto& w = model_->weights();
  const auto d = static_cast<std::size_t>(cfg.hidden);
  const auto v = static_cast<std::size_t>(cfg.vocab);
  const auto ff = 4 * d;
  const auto heads = static_cast<std::size_t>(cfg.heads);
  const auto dh = d / heads;
  const std::size_t pos = length_;

  if (token >= v) {
    throw Error(Errc::TokenOutOfRange, "token id " + std::to_string(token) + " >= vocab " +
                                           std::to_string(v));
  }
  if (pos >= static_cast<std::size_t>(cfg.context)) {
    throw Error(Errc::TokenOutOfRange, "sequence exceeds context of " + std::to_string(cfg.context));
  }

  Vector x(d);
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = w.token_embedding[token * d + i] + w.position_embedding[pos * d + i];
  }
  Vector a(d), q(d), k(d), val(d), ctx(d), proj(d), up(ff), down(d);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> scores(pos + 1);

  for (int layer = 1; layer <= cfg.layers; ++layer) {
    const auto& b = w.blocks[layer - 1];
    layer_norm(x, b.ln1_gain, b.ln1_bias, a);
    kernels::matvec(a, b.wq.data(), d, q);
    kernels::matvec(a, b.wk.data(), d, k);
    kernels::matvec(a, b.wv.data(), d, val);
    auto& kc = keys_[layer - 1];
    auto& vc = values_[layer - 1];
    kc.insert(kc.end(), k.begin(), k.end());
    vc.insert(vc.end(), val.begin(), val.end());

    std::fill(ctx.begin(), ctx.end(), 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::span<const double> qh(q.data() + h * dh, dh);
      double mx = -1e300;
      for (std::size_t j = 0; j <= pos; ++j) {
        scores[j] = linalg::dot(qh, std::span<const double>(kc.data() + j * d + h * dh, dh)) *
                    inv_sqrt_dh;
        mx = std::max(mx, scores[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j <= pos; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        total += scores[j];
      }
      const std::span<double> ch(ctx.data() + h * dh, dh);
      for (std::size_t j = 0; j <= pos; ++j) {
        kernels::axpy(scores[j] / total, std::span<const double>(vc.data() + j * d + h * dh, dh), ch);
      }
    }
    kernels::matvec(ctx, b.wo.data(), d, proj);
    kernels::add(proj, x);

    layer_norm(x, b.ln2_gain, b.ln2_bias, a);
    kernels::matvec(a, b.w_up.data(), ff, up);
    kernels::add(b.b_up, up);
    for (double& u : up) u = gelu(u);
    kernels::matvec(up, b.w_down.data(), d, down);
    kernels::add(b.b_down, down);
    kernels::add(down, x);

    if (injection_ && pos >= injection_->start_position) {
      auto it = injection_->offsets.find(layer);
      if (it != injection_->offsets.end()) {
        if (keep_trace_) trace_.push_pre_injection(layer, pos, x);
        kernels::add(it->second, x);
      }
    }
    if (keep_trace_) trace_.push(layer, x);
    last_[layer - 1] = x;
  }
  if (keep_trace_) trace_.finish_position();
  ++length_;

  if (!want_logits) {
    logits_.clear();
    return {};
  }
  Vector f(d);
  if (cfg.final_norm == FinalNorm::Standard) {
    layer_norm(x, w.final_gain, w.final_bias, f);
  } else {
    f = x;
  }
  logits_.resize(v);
  kernels::matvec(f, w.unembedding.data(), v, logits_);
  return logits_;
}

ForwardResult forward_with_taps(const ToyTransformer& model, std::span<const TokenId> tokens,
                                const InjectionHook* hook, bool want_logits) {
  if (tokens.empty()) throw Error(Errc::EmptyPrompt, "forward needs at least one token");
  std::optional<ResolvedInjection> inj;
  if (hook != nullptr) inj = resolve_injection(model, tokens, *hook);
  ForwardResult out;
  if (inj) out.alphas = inj->alphas;
  DecodeSession session(model, std::move(inj), true);
  for (TokenId t : tokens) {
    auto lg = session.append(t, want_logits);
    if (want_logits) out.logits.emplace_back(lg.begin(), lg.end());
  }
  out.trace = session.trace();
  out.trace.prompt_length = tokens.size();
  return out;
}

TokenId argmax_token(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<TokenId>(best);
}

std::size_t token_rank(std::span<const double> logits, TokenId token) {
  const double ref = logits[token];
  return static_cast<std::size_t>(
      std::count_if(logits.begin(), logits.end(), [&](double l) { return l > ref; }));
}

std::vector<TokenId> generate(const ToyTransformer& model, std::span<const TokenId> prompt,
                              int max_new_tokens, TokenId eos, const InjectionHook* hook) {
  if (prompt.empty()) throw Error(Errc::EmptyPrompt, "generate needs a nonempty prompt");
  std::optional<ResolvedInjection> inj;
  if (hook != nullptr) inj = resolve_injection(model, prompt, *hook);
  return generate_resolved(model, prompt, max_new_tokens, eos, std::move(inj));
}

std::vector<TokenId> generate_resolved(const ToyTransformer& model, std::span<const TokenId> prompt,
                                       int max_new_tokens, TokenId eos,
                                       std::optional<ResolvedInjection> injection,
                                       Vector* first_logits) {
  if (max_new_tokens < 1) throw Error(Errc::InvalidConfig, "max_new_tokens must be >= 1");
  if (prompt.empty()) throw Error(Errc::EmptyPrompt, "generate needs a nonempty prompt");
  if (prompt.size() > static_cast<std::size_t>(model.config().context)) {
    throw Error(Errc::InvalidConfig, "prompt longer than the model context");
  }
  DecodeSession session(model, std::move(injection), false);
  std::span<const double> logits;
  for (std::size_t i = 0; i < prompt.size(); ++i) logits = session.append(prompt[i], i + 1 == prompt.size());
  if (first_logits != nullptr) first_logits->assign(logits.begin(), logits.end());
  std::vector<TokenId> out;
  const auto room = static_cast<std::size_t>(model.config().context) - prompt.size();
  const auto budget = std::min(static_cast<std::size_t>(max_new_tokens), room + 1);
  while (out.size() < budget) {
    const TokenId next = argmax_token(logits);
    out.push_back(next);
    if (next == eos || out.size() == budget) break;
    logits = session.append(next, true);
  }
  return out;
}

Vector log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  const double lse = mx + std::log(total);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double perplexity(const ToyTransformer& model, std::span<const TokenId> tokens) {
  if (tokens.size() < 2) throw Error(Errc::SequenceTooShort, "perplexity needs >= 2 tokens");
  DecodeSession session(model, std::nullopt, false);
  double nll = 0.0;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const Vector lp = log_softmax(session.append(tokens[i], true));
    if (tokens[i + 1] >= lp.size()) throw Error(Errc::TokenOutOfRange, "token id out of range");
    nll -= lp[tokens[i + 1]];
  }
  return std::exp(nll / static_cast<double>(tokens.size() - 1));
}

}  // namespace rot::model
