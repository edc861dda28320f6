#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rot {

// Every failure the toolkit reports carries one of these codes. The CLI maps
// them onto process exit codes via exit_code().
enum class Errc {
  // linalg
  DimensionMismatch,
  DegenerateInput,
  ZeroVector,
  NonFinite,
  // model
  InvalidConfig,
  TokenOutOfRange,
  SequenceTooShort,
  // stimuli
  UnknownTemplate,
  NotEnoughSamples,
  InsufficientStimuli,
  // populations
  DumpMissingLayer,
  DumpMissingPrompt,
  EmptyPrompt,
  LayerOutOfRange,
  // reading / files
  IoFailure,
  CorruptFile,
  NormViolation,
  // localization / control
  LayerMismatch,
  EmptyResponse,
  LengthMismatch,
  // eval
  EmptyInput,
  TooFewRuns,
  MissingPolicy,
  TaskFileInvalid,
  // cli
  ConfigError,
};

std::string_view errc_name(Errc code) noexcept;

// Process exit code for an error: 2 config, 3 data, 4 missing artifact,
// 5 model/layer mismatch, 6 corrupt file.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rot
