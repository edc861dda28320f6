#include "rot/reading.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "rot/binio.hpp"
#include "rot/error.hpp"
#include "rot/parallel.hpp"

namespace rot::reading {

int ReadingVectorSet::hidden() const {
  return vectors.empty() ? 0 : static_cast<int>(vectors.begin()->second.size());
}

std::vector<int> ReadingVectorSet::layers() const {
  std::vector<int> out;
  for (const auto& [k, v] : vectors) out.push_back(k);
  return out;
}

const Vector& ReadingVectorSet::at(int layer) const {
  auto it = vectors.find(layer);
  if (it == vectors.end()) {
    throw Error(Errc::LayerMismatch, "no reading vector for layer " + std::to_string(layer));
  }
  return it->second;
}

ReadingVectorSet extract_reading_vectors(const populations::PopulationSet& pop, bool center,
                                         int workers) {
  const auto& layers = pop.layers;
  std::vector<linalg::PrincipalComponent> pcs(layers.size());
  parallel_for(layers.size(), workers, [&](std::size_t i) {
    const auto& m = pop.layer(layers[i]);
    try {
      pcs[i] = linalg::principal_component_full(m, center);
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(layers[i]) + ": " + e.what());
    }
    auto& r = pcs[i].direction;
    double mean = 0.0;
    for (std::size_t row = 0; row < m.rows(); ++row) mean += linalg::dot(m.row(row), r);
    if (mean < 0.0) {
      for (auto& x : r) x = -x;
    }
  });

  ReadingVectorSet out;
  out.centered = center;
  out.provenance = {pop.digest(),
                    pop.stimulus_digest,
                    pop.model_id,
                    pop.query_count,
                    pop.stimuli_count,
                    pop.kind == stimuli::StimulusKind::FewShot ? "few_shot" : "zero_shot"};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.explained[layers[i]] = pcs[i].explained_share();
    out.vectors[layers[i]] = std::move(pcs[i].direction);
  }
  return out;
}

namespace {

std::string provenance_json(const Provenance& p) {
  nlohmann::ordered_json j;
  j["population_digest"] = p.population_digest;
  j["stimulus_digest"] = p.stimulus_digest;
  j["model_id"] = p.model_id;
  j["n"] = p.query_count;
  j["m"] = p.stimuli_count;
  j["stimulus_kind"] = p.stimulus_kind;
  return j.dump();
}

Provenance parse_provenance(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Provenance p;
    p.population_digest = j.value("population_digest", std::uint64_t{0});
    p.stimulus_digest = j.value("stimulus_digest", std::uint64_t{0});
    p.model_id = j.value("model_id", std::string{});
    p.query_count = j.value("n", std::size_t{0});
    p.stimuli_count = j.value("m", std::size_t{0});
    p.stimulus_kind = j.value("stimulus_kind", std::string{});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptFile, std::string("bad ROTV provenance: ") + e.what());
  }
}

}  // namespace

std::vector<unsigned char> serialize(const ReadingVectorSet& set) {
  binio::Writer w;
  w.magic("ROTV");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(set.hidden()));
  w.u32(static_cast<std::uint32_t>(set.vectors.size()));
  w.u8(set.centered ? 1 : 0);
  w.str(set.orientation);
  w.str(provenance_json(set.provenance));
  for (const auto& [k, v] : set.vectors) {
    if (v.size() != static_cast<std::size_t>(set.hidden())) {
      throw Error(Errc::DimensionMismatch, "reading vectors differ in width");
    }
    w.u32(static_cast<std::uint32_t>(k));
    auto it = set.explained.find(k);
    w.f64(it == set.explained.end() ? 0.0 : it->second);
    w.f64s(v);
  }
  return w.buffer();
}

ReadingVectorSet deserialize(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ROTV");
  if (r.u32() != 1) throw Error(Errc::CorruptFile, "unsupported ROTV version");
  const std::uint32_t d = r.u32();
  const std::uint32_t count = r.u32();
  const std::uint8_t centered = r.u8();
  if (centered > 1 || d == 0 || count == 0) throw Error(Errc::CorruptFile, "bad ROTV header");
  ReadingVectorSet set;
  set.centered = centered == 1;
  set.orientation = r.str();
  set.provenance = parse_provenance(r.str());
  for (std::uint32_t i = 0; i < count; ++i) {
    const int k = static_cast<int>(r.u32());
    const double share = r.f64();
    Vector v = r.f64s(d);
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(Errc::CorruptFile, "non-finite reading vector entry");
    }
    if (std::abs(linalg::norm(v) - 1.0) > 1e-6) {
      throw Error(Errc::NormViolation, "reading vector for layer " + std::to_string(k) + " is not unit norm");
    }
    if (set.vectors.contains(k)) throw Error(Errc::CorruptFile, "duplicate layer in ROTV file");
    set.explained[k] = share;
    set.vectors[k] = std::move(v);
  }
  if (!r.at_end()) throw Error(Errc::CorruptFile, "trailing bytes in ROTV file");
  return set;
}

void save_reading_vectors(const ReadingVectorSet& set, const std::string& path) {
  binio::write_file(path, serialize(set));
}

ReadingVectorSet load_reading_vectors(const std::string& path) {
  return deserialize(binio::read_file(path));
}

std::string to_text(const ReadingVectorSet& set) {
  std::string out;
  char buf[40];
  for (const auto& [k, v] : set.vectors) {
    out += std::to_string(k);
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace rot::reading
