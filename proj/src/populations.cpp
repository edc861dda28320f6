#include "rot/populations.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <json.hpp>

#include "rot/binio.hpp"
#include "rot/error.hpp"
#include "rot/parallel.hpp"
#include "rot/rng.hpp"

namespace rot::populations {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::ConfigError, "bad layer spec '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

LayerSpec LayerSpec::parse(std::string_view text) {
  if (text.starts_with("last:") || text.starts_with("last(")) {
    std::string_view n = text.substr(5);
    if (text[4] == '(') {
      if (!n.ends_with(")")) throw Error(Errc::ConfigError, "bad layer spec '" + std::string(text) + "'");
      n.remove_suffix(1);
    }
    return last_n(parse_int(n, text));
  }
  std::vector<int> layers;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    layers.push_back(parse_int(part, text));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return of(std::move(layers));
}

std::string LayerSpec::to_string() const {
  if (last) return "last:" + std::to_string(*last);
  std::string out;
  for (int l : explicit_layers) out += (out.empty() ? "" : ",") + std::to_string(l);
  return out;
}

LayerSelection resolve_layers(const LayerSpec& spec, int depth) {
  if (depth < 1) throw Error(Errc::InvalidConfig, "model depth must be >= 1");
  LayerSelection sel{spec, {}};
  if (spec.last) {
    const int n = *spec.last;
    if (n < 1 || n > depth) {
      throw Error(Errc::LayerOutOfRange, "last(" + std::to_string(n) + ") on a model of depth " +
                                             std::to_string(depth));
    }
    for (int k = depth - n + 1; k <= depth; ++k) sel.layers.push_back(k);
    return sel;
  }
  if (spec.explicit_layers.empty()) throw Error(Errc::LayerOutOfRange, "empty layer set");
  for (int k : spec.explicit_layers) {
    if (k < 1 || k > depth) {
      throw Error(Errc::LayerOutOfRange, "layer " + std::to_string(k) + " outside 1.." + std::to_string(depth));
    }
  }
  sel.layers = spec.explicit_layers;
  std::sort(sel.layers.begin(), sel.layers.end());
  sel.layers.erase(std::unique(sel.layers.begin(), sel.layers.end()), sel.layers.end());
  return sel;
}

// ---------------------------------------------------------------- sources

std::vector<Vector> ModelSource::last_token(const std::string& prompt_id, Polarity,
                                            const std::string& text,
                                            const std::vector<int>& layers) const {
  const auto body = tokenizer_->encode(text);
  if (body.empty()) throw Error(Errc::EmptyPrompt, "prompt '" + prompt_id + "' has no tokens");
  std::vector<model::TokenId> ids{tokenizer_->bos()};
  ids.insert(ids.end(), body.begin(), body.end());
  model::DecodeSession session(*model_, std::nullopt, false);
  for (auto id : ids) session.append(id, false);
  std::vector<Vector> out;
  out.reserve(layers.size());
  for (int k : layers) {
    if (k < 1 || k > depth()) {
      throw Error(Errc::LayerOutOfRange, "layer " + std::to_string(k) + " outside the model");
    }
    const auto h = session.last_hidden(k);
    out.emplace_back(h.begin(), h.end());
  }
  return out;
}

int DumpSource::depth() const {
  return dump_->layers.empty() ? 0 : *std::max_element(dump_->layers.begin(), dump_->layers.end());
}

std::vector<Vector> DumpSource::last_token(const std::string& prompt_id, Polarity polarity,
                                           const std::string&, const std::vector<int>& layers) const {
  const DumpRecord* rec = dump_->find(prompt_id, polarity);
  if (rec == nullptr) {
    throw Error(Errc::DumpMissingPrompt, "dump has no record '" + prompt_id + "' (" +
                                             static_cast<char>(polarity) + ")");
  }
  std::vector<Vector> out;
  for (int k : layers) {
    auto it = std::find(dump_->layers.begin(), dump_->layers.end(), k);
    if (it == dump_->layers.end()) {
      throw Error(Errc::DumpMissingLayer, "dump has no layer " + std::to_string(k));
    }
    out.push_back(rec->layers[static_cast<std::size_t>(it - dump_->layers.begin())]);
  }
  return out;
}

// ---------------------------------------------------------------- dump file

void ActivationDump::add(DumpRecord record) {
  if (record.layers.size() != layers.size()) {
    throw Error(Errc::DimensionMismatch, "dump record has the wrong layer count");
  }
  for (const auto& v : record.layers) {
    if (v.size() != static_cast<std::size_t>(hidden)) {
      throw Error(Errc::DimensionMismatch, "dump record vector has the wrong width");
    }
  }
  const auto key = std::make_pair(record.prompt_id, record.polarity);
  if (index_.contains(key)) throw Error(Errc::CorruptFile, "duplicate dump record '" + record.prompt_id + "'");
  index_[key] = records_.size();
  records_.push_back(std::move(record));
}

const DumpRecord* ActivationDump::find(const std::string& prompt_id, Polarity polarity) const {
  auto it = index_.find({prompt_id, polarity});
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<unsigned char> ActivationDump::serialize() const {
  binio::Writer w;
  w.magic("ROTD");
  w.u32(1);
  w.str(model_id);
  w.u32(static_cast<std::uint32_t>(hidden));
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (int k : layers) w.u32(static_cast<std::uint32_t>(k));
  w.u32(static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) {
    w.str(r.prompt_id);
    w.u8(static_cast<std::uint8_t>(r.polarity));
    for (const auto& v : r.layers) {
      if (dtype == DumpDtype::F64) {
        w.f64s(v);
      } else {
        for (double x : v) w.f32(static_cast<float>(x));
      }
    }
  }
  return w.buffer();
}

ActivationDump ActivationDump::deserialize(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ROTD");
  if (r.u32() != 1) throw Error(Errc::CorruptFile, "unsupported ROTD version");
  ActivationDump dump;
  dump.model_id = r.str();
  dump.hidden = static_cast<int>(r.u32());
  const std::uint8_t dt = r.u8();
  if (dt != 4 && dt != 8) throw Error(Errc::CorruptFile, "bad ROTD dtype flag");
  dump.dtype = static_cast<DumpDtype>(dt);
  const std::uint32_t nl = r.u32();
  if (dump.hidden < 1 || nl > 100000) throw Error(Errc::CorruptFile, "implausible ROTD header");
  for (std::uint32_t i = 0; i < nl; ++i) dump.layers.push_back(static_cast<int>(r.u32()));
  const std::uint32_t count = r.u32();
  const auto d = static_cast<std::size_t>(dump.hidden);
  for (std::uint32_t i = 0; i < count; ++i) {
    DumpRecord rec;
    rec.prompt_id = r.str();
    const std::uint8_t pol = r.u8();
    if (pol != '+' && pol != '-') throw Error(Errc::CorruptFile, "bad polarity byte");
    rec.polarity = static_cast<Polarity>(pol);
    for (std::uint32_t l = 0; l < nl; ++l) {
      if (dump.dtype == DumpDtype::F64) {
        rec.layers.push_back(r.f64s(d));
      } else {
        r.need(d * 4);
        Vector v(d);
        for (auto& x : v) x = r.f32();
        rec.layers.push_back(std::move(v));
      }
    }
    dump.add(std::move(rec));
  }
  if (!r.at_end()) throw Error(Errc::CorruptFile, "trailing bytes in ROTD file");
  return dump;
}

void ActivationDump::save(const std::string& path) const { binio::write_file(path, serialize()); }

ActivationDump ActivationDump::load(const std::string& path) {
  return deserialize(binio::read_file(path));
}

// ---------------------------------------------------------------- prompts

std::vector<PromptRecord> parse_prompts_jsonl(std::string_view text) {
  std::vector<PromptRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      const auto pol = rec.at("polarity").get<std::string>();
      if (pol != "+" && pol != "-") throw Error(Errc::TaskFileInvalid, "polarity must be + or -");
      out.push_back({rec.at("id").get<std::string>(), static_cast<Polarity>(pol[0]),
                     rec.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::TaskFileInvalid, "prompts line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string prompts_to_jsonl(const std::vector<PromptRecord>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["polarity"] = std::string(1, static_cast<char>(p.polarity));
    j["text"] = p.text;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<PromptRecord> prompts_of(const stimuli::StimulusSet& set) {
  std::vector<PromptRecord> out;
  for (const auto& p : set.pairs) {
    out.push_back({p.pair_id(), Polarity::Positive, p.positive});
    out.push_back({p.pair_id(), Polarity::Negative, p.negative});
  }
  return out;
}

ActivationDump dump_prompts(const model::ToyTransformer& model, const model::Tokenizer& tokenizer,
                            const std::vector<PromptRecord>& prompts, const std::vector<int>& layers,
                            DumpDtype dtype, int workers) {
  ModelSource source(model, tokenizer);
  ActivationDump dump;
  dump.model_id = model.id();
  dump.hidden = model.config().hidden;
  dump.layers = layers;
  dump.dtype = dtype;
  std::vector<std::vector<Vector>> acts(prompts.size());
  parallel_for(prompts.size(), workers, [&](std::size_t i) {
    acts[i] = source.last_token(prompts[i].id, prompts[i].polarity, prompts[i].text, layers);
  });
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    dump.add({prompts[i].id, prompts[i].polarity, std::move(acts[i])});
  }
  return dump;
}

// ---------------------------------------------------------------- populations

const SampleMatrix& PopulationSet::layer(int k) const {
  auto it = by_layer.find(k);
  if (it == by_layer.end()) throw Error(Errc::LayerMismatch, "population has no layer " + std::to_string(k));
  return it->second;
}

std::uint64_t PopulationSet::digest() const {
  std::uint64_t h = fnv1a(model_id);
  h = fnv1a(std::to_string(stimulus_digest), h);
  for (const auto& [k, m] : by_layer) {
    h = fnv1a(std::to_string(k), h);
    const auto& data = m.data();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double)), h);
  }
  return h;
}

PopulationSet capture_population(const ActivationSource& source, const stimuli::StimulusSet& set,
                                 const LayerSelection& selection, int workers) {
  const auto& layers = selection.layers;
  if (layers.empty()) throw Error(Errc::LayerOutOfRange, "empty layer selection");
  const std::size_t n = set.pairs.size();
  std::vector<std::vector<Vector>> diffs(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& pair = set.pairs[i];
    const auto pos = source.last_token(pair.pair_id(), Polarity::Positive, pair.positive, layers);
    const auto neg = source.last_token(pair.pair_id(), Polarity::Negative, pair.negative, layers);
    diffs[i].resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (pos[l].size() != neg[l].size()) throw Error(Errc::DimensionMismatch, "activation widths differ");
      Vector d(pos[l].size());
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = pos[l][j] - neg[l][j];
      diffs[i][l] = std::move(d);
    }
  });

  PopulationSet out;
  out.layers = layers;
  out.stimulus_digest = set.digest();
  out.model_id = source.model_id();
  out.query_count = set.query_count;
  out.stimuli_count = set.stimuli_count;
  out.kind = set.kind;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    SampleMatrix m;
    for (std::size_t i = 0; i < n; ++i) m.append_row(diffs[i][l]);
    out.by_layer.emplace(layers[l], std::move(m));
  }
  return out;
}

}  // namespace rot::populations
