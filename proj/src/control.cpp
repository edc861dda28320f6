#include "rot/control.hpp"

#include <cmath>

#include "rot/binio.hpp"
#include "rot/error.hpp"

namespace rot::control {

SignPolicy parse_sign(const std::string& name) {
  if (name == "proj") return SignPolicy::FollowProjection;
  if (name == "pos") return SignPolicy::FixedPositive;
  if (name == "neg") return SignPolicy::FixedNegative;
  throw Error(Errc::ConfigError, "unknown sign mode '" + name + "' (proj, pos, neg)");
}

const char* sign_name(SignPolicy s) {
  switch (s) {
    case SignPolicy::FollowProjection: return "proj";
    case SignPolicy::FixedPositive: return "pos";
    case SignPolicy::FixedNegative: return "neg";
  }
  return "proj";
}

void SteeringPolicy::validate() const {
  if (!std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be finite");
  if (readers.vectors.empty()) throw Error(Errc::InvalidConfig, "steering policy has no layers");
}

model::InjectionHook SteeringPolicy::hook() const {
  validate();
  model::InjectionHook h;
  h.directions = readers.vectors;
  switch (sign) {
    case SignPolicy::FollowProjection:
      h.sign_mode = model::SignMode::FollowProjection;
      h.scale = std::abs(alpha);
      break;
    case SignPolicy::FixedPositive:
      h.sign_mode = model::SignMode::Fixed;
      h.scale = std::abs(alpha);
      break;
    case SignPolicy::FixedNegative:
      h.sign_mode = model::SignMode::Fixed;
      h.scale = -std::abs(alpha);
      break;
  }
  return h;
}

std::map<int, double> effective_alphas(const SteeringPolicy& policy,
                                       const model::ActivationTrace& trace, std::size_t position) {
  policy.validate();
  std::map<int, double> out;
  const double mag = std::abs(policy.alpha);
  for (const auto& [k, r] : policy.readers.vectors) {
    if (k < 1 || k > trace.layers()) {
      throw Error(Errc::LayerMismatch, "trace has no layer " + std::to_string(k));
    }
    if (position >= trace.positions()) throw Error(Errc::LengthMismatch, "trace does not cover the prompt");
    switch (policy.sign) {
      case SignPolicy::FollowProjection:
        out[k] = linalg::dot(trace.at(k, position), r) < 0.0 ? -mag : mag;
        break;
      case SignPolicy::FixedPositive: out[k] = mag; break;
      case SignPolicy::FixedNegative: out[k] = -mag; break;
    }
  }
  return out;
}

SteeringResult steered_generate(const model::ToyTransformer& model, std::span<const TokenId> prompt,
                                const SteeringPolicy& policy, int max_new_tokens, TokenId eos) {
  const auto hook = policy.hook();
  auto resolved = model::resolve_injection(model, prompt, hook);
  SteeringResult out;
  out.diagnostics.alphas = resolved.alphas;
  {
    model::DecodeSession plain(model, std::nullopt, false);
    for (TokenId t : prompt) plain.append(t, false);
    for (const auto& [k, r] : policy.readers.vectors) {
      out.diagnostics.projections[k] = linalg::dot(plain.last_hidden(k), r);
    }
  }
  out.tokens = model::generate_resolved(model, prompt, max_new_tokens, eos, std::move(resolved),
                                        &out.diagnostics.first_logits);
  return out;
}

std::vector<unsigned char> serialize(const SteeringPolicy& policy) {
  policy.validate();
  const auto readers = reading::serialize(policy.readers);
  binio::Writer w;
  w.magic("ROTS");
  w.u32(1);
  w.u8(static_cast<std::uint8_t>(policy.sign));
  w.f64(policy.alpha);
  w.u64(readers.size());
  w.bytes(readers.data(), readers.size());
  return w.buffer();
}

SteeringPolicy deserialize_policy(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ROTS");
  if (r.u32() != 1) throw Error(Errc::CorruptFile, "unsupported ROTS version");
  SteeringPolicy p;
  const std::uint8_t sign = r.u8();
  if (sign > 2) throw Error(Errc::CorruptFile, "bad ROTS sign byte");
  p.sign = static_cast<SignPolicy>(sign);
  p.alpha = r.f64();
  if (!std::isfinite(p.alpha)) throw Error(Errc::CorruptFile, "non-finite alpha in ROTS file");
  const std::uint64_t n = r.u64();
  if (n != r.remaining()) throw Error(Errc::CorruptFile, "ROTS reader block length mismatch");
  p.readers = reading::deserialize(bytes.subspan(bytes.size() - n));
  return p;
}

void save_policy(const SteeringPolicy& policy, const std::string& path) {
  binio::write_file(path, serialize(policy));
}

SteeringPolicy load_policy(const std::string& path) { return deserialize_policy(binio::read_file(path)); }

}  // namespace rot::control
