#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rot/linalg.hpp"
#include "rot/model.hpp"
#include "rot/stimuli.hpp"

namespace rot::populations {

using linalg::SampleMatrix;
using linalg::Vector;

// "last:L" or an explicit comma-separated list of 1-based layer indices.
struct LayerSpec {
  std::optional<int> last;
  std::vector<int> explicit_layers;

  static LayerSpec last_n(int n) { return LayerSpec{n, {}}; }
  static LayerSpec of(std::vector<int> layers) { return LayerSpec{std::nullopt, std::move(layers)}; }
  // ConfigError on syntax errors.
  static LayerSpec parse(std::string_view text);
  std::string to_string() const;
};

struct LayerSelection {
  LayerSpec spec;
  std::vector<int> layers;  // sorted, unique, within 1..depth
};

// last(L) -> {depth-L+1, ..., depth}. LayerOutOfRange for L > depth or an
// explicit index outside 1..depth.
LayerSelection resolve_layers(const LayerSpec& spec, int depth);

enum class Polarity : std::uint8_t { Positive = '+', Negative = '-' };

// Anything that can report the last-token residual activation of a prompt.
class ActivationSource {
 public:
  virtual ~ActivationSource() = default;
  virtual std::string model_id() const = 0;
  virtual int hidden() const = 0;
  virtual int depth() const = 0;
  // One vector per requested layer, in the order given.
  virtual std::vector<Vector> last_token(const std::string& prompt_id, Polarity polarity,
                                         const std::string& text,
                                         const std::vector<int>& layers) const = 0;
};

class ModelSource final : public ActivationSource {
 public:
  ModelSource(const model::ToyTransformer& model, const model::Tokenizer& tokenizer)
      : model_(&model), tokenizer_(&tokenizer) {}

  std::string model_id() const override { return model_->id(); }
  int hidden() const override { return model_->config().hidden; }
  int depth() const override { return model_->config().layers; }
  // <bos> + encode(text); EmptyPrompt when text yields no tokens.
  std::vector<Vector> last_token(const std::string& prompt_id, Polarity polarity,
                                 const std::string& text,
                                 const std::vector<int>& layers) const override;

 private:
  const model::ToyTransformer* model_;
  const model::Tokenizer* tokenizer_;
};

enum class DumpDtype : std::uint8_t { F32 = 4, F64 = 8 };

struct DumpRecord {
  std::string prompt_id;
  Polarity polarity = Polarity::Positive;
  std::vector<Vector> layers;  // parallel to ActivationDump::layers
};

// ROTD activation dump. Layout (little-endian):
//   "ROTD" u32 version=1 str model_id u32 d u8 dtype(4|8)
//   u32 layer_count u32[layer_count] layer indices u32 prompt_count
//   prompt_count records: str prompt_id u8 polarity('+'|'-')
//                         layer_count x d values (f32 or f64 per dtype)
// str = u32 byte length + UTF-8 bytes.
class ActivationDump {
 public:
  std::string model_id;
  int hidden = 0;
  std::vector<int> layers;
  DumpDtype dtype = DumpDtype::F64;

  const std::vector<DumpRecord>& records() const noexcept { return records_; }
  void add(DumpRecord record);  // DimensionMismatch on shape errors
  const DumpRecord* find(const std::string& prompt_id, Polarity polarity) const;

  std::vector<unsigned char> serialize() const;
  static ActivationDump deserialize(std::span<const unsigned char> bytes);
  void save(const std::string& path) const;
  static ActivationDump load(const std::string& path);

 private:
  std::vector<DumpRecord> records_;
  std::map<std::pair<std::string, Polarity>, std::size_t> index_;
};

class DumpSource final : public ActivationSource {
 public:
  explicit DumpSource(const ActivationDump& dump) : dump_(&dump) {}
  std::string model_id() const override { return dump_->model_id; }
  int hidden() const override { return dump_->hidden; }
  int depth() const override;
  // DumpMissingPrompt / DumpMissingLayer when the record or layer is absent.
  std::vector<Vector> last_token(const std::string& prompt_id, Polarity polarity,
                                 const std::string& text,
                                 const std::vector<int>& layers) const override;

 private:
  const ActivationDump* dump_;
};

struct PromptRecord {
  std::string id;
  Polarity polarity = Polarity::Positive;
  std::string text;
};

// Prompts file: JSON lines {id, polarity: "+"|"-", text}.
std::vector<PromptRecord> parse_prompts_jsonl(std::string_view text);
std::string prompts_to_jsonl(const std::vector<PromptRecord>& prompts);
// Both prompts of every pair, keyed by pair_id.
std::vector<PromptRecord> prompts_of(const stimuli::StimulusSet& set);

// Reference ROTD writer for the toy model: last-token activations of every
// prompt at the given layers.
ActivationDump dump_prompts(const model::ToyTransformer& model, const model::Tokenizer& tokenizer,
                            const std::vector<PromptRecord>& prompts,
                            const std::vector<int>& layers, DumpDtype dtype, int workers = 1);

// Per-layer difference vectors h_k(p+) - h_k(p-), one row per prompt pair in
// stimulus-set order.
struct PopulationSet {
  std::vector<int> layers;
  std::map<int, SampleMatrix> by_layer;
  std::uint64_t stimulus_digest = 0;
  std::string model_id;
  std::size_t query_count = 0;
  std::size_t stimuli_count = 0;
  stimuli::StimulusKind kind = stimuli::StimulusKind::ZeroShot;
  std::string capture_position = "last_token";

  const SampleMatrix& layer(int k) const;
  std::uint64_t digest() const;
};

PopulationSet capture_population(const ActivationSource& source, const stimuli::StimulusSet& set,
                                 const LayerSelection& layers, int workers = 1);

}  // namespace rot::populations
