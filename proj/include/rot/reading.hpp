#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rot/populations.hpp"

namespace rot::reading {

using linalg::Vector;

inline constexpr const char* kMeanProjectionRule = "mean_projection_nonneg";

struct Provenance {
  std::uint64_t population_digest = 0;
  std::uint64_t stimulus_digest = 0;
  std::string model_id;
  std::size_t query_count = 0;    // N
  std::size_t stimuli_count = 0;  // M
  std::string stimulus_kind;      // "zero_shot" | "few_shot"
  bool operator==(const Provenance&) const = default;
};

struct ReadingVectorSet {
  std::map<int, Vector> vectors;    // layer -> unit R_k
  std::map<int, double> explained;  // layer -> variance share of R_k
  std::string orientation = kMeanProjectionRule;
  bool centered = true;
  Provenance provenance;

  int hidden() const;
  std::vector<int> layers() const;
  const Vector& at(int layer) const;  // LayerMismatch when absent

  bool operator==(const ReadingVectorSet&) const = default;
};

// R_k = leading principal component of the layer's population, flipped so
// the mean row projection is >= 0. DegenerateInput names the failing layer.
ReadingVectorSet extract_reading_vectors(const populations::PopulationSet& pop, bool center,
                                         int workers = 1);

// ROTV file (little-endian):
//   "ROTV" u32 version=1 u32 d u32 layer_count u8 centered
//   str orientation str provenance(JSON)
//   layer_count x { u32 layer f64 explained f64[d] }
// str = u32 byte length + UTF-8 bytes.
std::vector<unsigned char> serialize(const ReadingVectorSet& set);
ReadingVectorSet deserialize(std::span<const unsigned char> bytes);
void save_reading_vectors(const ReadingVectorSet& set, const std::string& path);
ReadingVectorSet load_reading_vectors(const std::string& path);

// One line per layer: index then d values (%.17g), space separated.
std::string to_text(const ReadingVectorSet& set);

}  // namespace rot::reading
