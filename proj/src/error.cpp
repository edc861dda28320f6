#include "rot/error.hpp"

namespace rot {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::TokenOutOfRange: return "TokenOutOfRange";
    case Errc::SequenceTooShort: return "SequenceTooShort";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::NotEnoughSamples: return "NotEnoughSamples";
    case Errc::InsufficientStimuli: return "InsufficientStimuli";
    case Errc::DumpMissingLayer: return "DumpMissingLayer";
    case Errc::DumpMissingPrompt: return "DumpMissingPrompt";
    case Errc::EmptyPrompt: return "EmptyPrompt";
    case Errc::LayerOutOfRange: return "LayerOutOfRange";
    case Errc::IoFailure: return "IoFailure";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::NormViolation: return "NormViolation";
    case Errc::LayerMismatch: return "LayerMismatch";
    case Errc::EmptyResponse: return "EmptyResponse";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::TooFewRuns: return "TooFewRuns";
    case Errc::MissingPolicy: return "MissingPolicy";
    case Errc::TaskFileInvalid: return "TaskFileInvalid";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidConfig:
    case Errc::UnknownTemplate:
    case Errc::MissingPolicy:
      return 2;
    case Errc::IoFailure:
      return 4;
    case Errc::LayerOutOfRange:
    case Errc::LayerMismatch:
    case Errc::DumpMissingLayer:
    case Errc::DimensionMismatch:
    case Errc::TokenOutOfRange:
      return 5;
    case Errc::CorruptFile:
    case Errc::NormViolation:
      return 6;
    default:
      return 3;
  }
}

}  // namespace rot
