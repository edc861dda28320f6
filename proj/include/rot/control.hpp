#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rot/model.hpp"
#include "rot/reading.hpp"

namespace rot::control {

using model::TokenId;
using linalg::Vector;

enum class SignPolicy : std::uint8_t { FollowProjection = 0, FixedPositive = 1, FixedNegative = 2 };

SignPolicy parse_sign(const std::string& name);  // "proj" | "pos" | "neg"; ConfigError otherwise
const char* sign_name(SignPolicy s);

struct SteeringPolicy {
  reading::ReadingVectorSet readers;
  double alpha = 0.0;
  SignPolicy sign = SignPolicy::FollowProjection;

  // InvalidConfig for a non-finite alpha or an empty layer set.
  void validate() const;
  model::InjectionHook hook() const;
};

// follow_projection: alpha_k = |alpha| * sign(h_k(T) . R_k), sign(0) = +1.
// fixed: alpha_k = +|alpha| or -|alpha| for every layer.
// `position` is the prompt's last token within the trace.
std::map<int, double> effective_alphas(const SteeringPolicy& policy,
                                       const model::ActivationTrace& prompt_trace,
                                       std::size_t position);

struct SteeringDiagnostics {
  std::map<int, double> alphas;
  std::map<int, double> projections;  // unsteered h_k(T) . R_k at the last prompt token
  Vector first_logits;                // steered logits choosing the first new token
};

struct SteeringResult {
  std::vector<TokenId> tokens;
  SteeringDiagnostics diagnostics;
};

// Greedy generation with h_k += alpha_k R_k after every block k in the
// policy, from the last prompt token on. Signs are fixed at prompt time.
SteeringResult steered_generate(const model::ToyTransformer& model, std::span<const TokenId> prompt,
                                const SteeringPolicy& policy, int max_new_tokens, TokenId eos);

// ROTS policy file (little-endian):
//   "ROTS" u32 version=1 u8 sign(0 proj, 1 pos, 2 neg) f64 alpha
//   u64 n + n bytes of an embedded ROTV reading-vector file
std::vector<unsigned char> serialize(const SteeringPolicy& policy);
SteeringPolicy deserialize_policy(std::span<const unsigned char> bytes);
void save_policy(const SteeringPolicy& policy, const std::string& path);
SteeringPolicy load_policy(const std::string& path);

}  // namespace rot::control
