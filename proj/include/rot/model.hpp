#pragma once

// Deterministic toy decoder-only transformer: pre-norm blocks (causal
// multi-head self-attention + GELU MLP), learned positional embeddings,
// untied unembedding. It exposes the post-block residual stream of every
// layer at every position and accepts additive injections into it.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rot/linalg.hpp"
#include "rot/tokenizer.hpp"

namespace rot::model {

using linalg::Vector;

enum class FinalNorm : std::uint8_t { Standard = 0, Identity = 1 };

struct ModelConfig {
  int layers = 6;
  int hidden = 64;
  int heads = 4;
  int vocab = 512;
  int context = 1024;
  FinalNorm final_norm = FinalNorm::Standard;

  // Throws InvalidConfig.
  void validate() const;
  int head_dim() const { return hidden / heads; }
};

// Linear maps are stored input-major: w[i * out + o].
struct BlockWeights {
  Vector ln1_gain, ln1_bias;
  Vector wq, wk, wv, wo;  // hidden x hidden
  Vector ln2_gain, ln2_bias;
  Vector w_up, b_up;      // hidden x 4*hidden, 4*hidden
  Vector w_down, b_down;  // 4*hidden x hidden, hidden
};

struct Weights {
  Vector token_embedding;     // vocab x hidden
  Vector position_embedding;  // context x hidden
  std::vector<BlockWeights> blocks;
  Vector final_gain, final_bias;
  Vector unembedding;         // hidden x vocab
};

// Recorded by build_planted: adding a*direction to the residual stream after
// `layer` moves logit(target) by exactly a*slope.
struct PlantedInfo {
  int layer = 0;
  TokenId target = 0;
  Vector direction;
  double slope = 0.0;
};

struct PlantSpec {
  int layer = 0;  // must equal config.layers
  Vector direction;
  TokenId target = 0;
};

class ToyTransformer {
 public:
  static ToyTransformer build(std::uint64_t seed, const ModelConfig& config);
  // Requires layer == L and an identity final norm (InvalidConfig otherwise).
  // The target's unembedding column is boosted along `direction` until its
  // slope exceeds every other token's, so steering along the direction
  // can only improve the target's rank.
  static ToyTransformer build_planted(std::uint64_t seed, const ModelConfig& config,
                                      const PlantSpec& plant);
  static ToyTransformer from_weights(const ModelConfig& config, std::uint64_t seed,
                                     Weights weights,
                                     std::optional<PlantedInfo> planted = std::nullopt);

  // ROTM checkpoint. Layout (little-endian):
  //   "ROTM" u32 version=1 u32 L u32 d u32 heads u32 V u8 final_norm u64 seed
  //   u32 context
  //   f64 tensors: token_embedding, position_embedding, then per block
  //   ln1_gain ln1_bias wq wk wv wo ln2_gain ln2_bias w_up b_up w_down b_down,
  //   then final_gain final_bias unembedding
  //   u8 planted flag; if 1: u32 layer u32 target f64 slope f64[d] direction
  void save(const std::string& path) const;
  static ToyTransformer load(const std::string& path);
  std::vector<unsigned char> serialize() const;
  static ToyTransformer deserialize(std::span<const unsigned char> bytes);

  const ModelConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Weights& weights() const noexcept { return weights_; }
  const std::optional<PlantedInfo>& planted() const noexcept { return planted_; }
  std::string id() const;

 private:
  ToyTransformer(ModelConfig config, std::uint64_t seed, Weights weights,
                 std::optional<PlantedInfo> planted);

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  Weights weights_;
  std::optional<PlantedInfo> planted_;
};

// Post-block residual activations, layers 1..L by positions.
class ActivationTrace {
 public:
  ActivationTrace() = default;
  ActivationTrace(int layers, int hidden) : layers_(layers), hidden_(hidden), data_(layers) {}

  int layers() const noexcept { return layers_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t positions() const noexcept { return positions_; }
  std::size_t prompt_length = 0;

  // Activation after block `layer` (1-based) at `pos`, including any
  // injected offset.
  std::span<const double> at(int layer, std::size_t pos) const;
  // Activation at an injected (layer, pos) before the offset was added;
  // identical to at() everywhere else.
  std::span<const double> pre_injection(int layer, std::size_t pos) const;

  void push(int layer, std::span<const double> h);
  void push_pre_injection(int layer, std::size_t pos, std::span<const double> h);
  void finish_position() { ++positions_; }

 private:
  int layers_ = 0;
  int hidden_ = 0;
  std::size_t positions_ = 0;
  std::vector<std::vector<double>> data_;
  std::map<std::pair<int, std::size_t>, Vector> pre_injection_;
};

enum class SignMode { FollowProjection, Fixed };

// h'_k = h_k + alpha_k * R_k for k in the hook's layers, at every position
// from start_position on. With FollowProjection, alpha_k = |scale| *
// sign(h_k(T) . R_k) with h_k(T) taken from an unsteered pass at
// start_position (sign(0) = +1) and frozen afterwards; with Fixed,
// alpha_k = scale.
struct InjectionHook {
  std::map<int, Vector> directions;  // layer -> unit direction
  double scale = 0.0;
  SignMode sign_mode = SignMode::Fixed;
  std::optional<std::size_t> start_position;  // default: last prompt token
};

// Injection with signs already fixed: offsets[k] = alpha_k * R_k.
struct ResolvedInjection {
  std::map<int, double> alphas;
  std::map<int, Vector> offsets;
  std::size_t start_position = 0;
};

// Validates the hook against the model (LayerMismatch / DimensionMismatch /
// NormViolation) and fixes per-layer signs. `prompt` must cover
// start_position.
ResolvedInjection resolve_injection(const ToyTransformer& model, std::span<const TokenId> prompt,
                                    const InjectionHook& hook);

// Incremental causal forward with per-layer KV caches. Appending tokens one
// at a time yields exactly the same numbers as a full-sequence pass.
class DecodeSession {
 public:
  explicit DecodeSession(const ToyTransformer& model,
                         std::optional<ResolvedInjection> injection = std::nullopt,
                         bool keep_trace = true);

  // Runs one position; returns its logits when want_logits, else empty.
  std::span<const double> append(TokenId token, bool want_logits = true);

  const ActivationTrace& trace() const noexcept { return trace_; }
  std::size_t length() const noexcept { return length_; }
  // Residual stream after block `layer` at the most recent position.
  std::span<const double> last_hidden(int layer) const;

 private:
  const ToyTransformer* model_;
  std::optional<ResolvedInjection> injection_;
  bool keep_trace_;
  std::size_t length_ = 0;
  std::vector<std::vector<double>> keys_, values_;
  std::vector<Vector> last_;
  Vector logits_;
  ActivationTrace trace_;
};

struct ForwardResult {
  std::vector<Vector> logits;  // per position, empty when not requested
  ActivationTrace trace;
  std::map<int, double> alphas;  // effective per-layer scale, empty without hook
};

ForwardResult forward_with_taps(const ToyTransformer& model, std::span<const TokenId> tokens,
                                const InjectionHook* hook = nullptr, bool want_logits = true);

// Greedy decoding; ties go to the lowest id. Output includes the <eos> that
// stopped generation, if any.
std::vector<TokenId> generate(const ToyTransformer& model, std::span<const TokenId> prompt,
                              int max_new_tokens, TokenId eos,
                              const InjectionHook* hook = nullptr);

// Same as generate() with signs already resolved; optionally reports the
// logits that chose the first new token.
std::vector<TokenId> generate_resolved(const ToyTransformer& model, std::span<const TokenId> prompt,
                                       int max_new_tokens, TokenId eos,
                                       std::optional<ResolvedInjection> injection,
                                       Vector* first_logits = nullptr);

TokenId argmax_token(std::span<const double> logits);
// Count of tokens whose logit strictly exceeds the given token's (0 = top).
std::size_t token_rank(std::span<const double> logits, TokenId token);

// exp of the mean next-token negative log-likelihood over positions 2..m.
double perplexity(const ToyTransformer& model, std::span<const TokenId> tokens);

// Numerically stable log-softmax of one logit row.
Vector log_softmax(std::span<const double> logits);

}  // namespace rot::model
