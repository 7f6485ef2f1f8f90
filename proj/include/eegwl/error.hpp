#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eegwl {

enum class Errc {
  // input / format problems
  MalformedHeader,
  SampleCountMismatch,
  NonFiniteSample,
  MissingChannel,
  MissingRecording,
  InvalidArgument,
  InvalidConfig,
  ShapeMismatch,
  DoubleNormalization,
  MontageNotCanonical,
  FeatureContractMismatch,
  // numerical / computational problems
  CutoffAboveNyquist,
  SignalTooShort,
  EmptyBand,
  DegenerateSignal,
  FrequencyAboveNyquist,
  SignalShorterThanWavelet,
  SignalDegenerate,
  LengthMismatch,
  FrequencyMismatch,
  EmptySubset,
  SingularDesign,
  NonConvergence,
  DegenerateSplit,
  SingleClassInput,
  InsufficientSamplesForStacking,
  ClassTooSmall,
  ClassSmallerThanK,
  DegenerateVariance,
  IncompletePairs,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::SampleCountMismatch: return "SampleCountMismatch";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::MissingChannel: return "MissingChannel";
    case Errc::MissingRecording: return "MissingRecording";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DoubleNormalization: return "DoubleNormalization";
    case Errc::MontageNotCanonical: return "MontageNotCanonical";
    case Errc::FeatureContractMismatch: return "FeatureContractMismatch";
    case Errc::CutoffAboveNyquist: return "CutoffAboveNyquist";
    case Errc::SignalTooShort: return "SignalTooShort";
    case Errc::EmptyBand: return "EmptyBand";
    case Errc::DegenerateSignal: return "DegenerateSignal";
    case Errc::FrequencyAboveNyquist: return "FrequencyAboveNyquist";
    case Errc::SignalShorterThanWavelet: return "SignalShorterThanWavelet";
    case Errc::SignalDegenerate: return "SignalDegenerate";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::FrequencyMismatch: return "FrequencyMismatch";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::SingularDesign: return "SingularDesign";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::InsufficientSamplesForStacking: return "InsufficientSamplesForStacking";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::ClassSmallerThanK: return "ClassSmallerThanK";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::IncompletePairs: return "IncompletePairs";
  }
  return "Unknown";
}

/// True for errors caused by bad user input (files, config, arguments)
/// rather than by the computation itself. The CLI maps these to exit code 2.
constexpr bool is_input_error(Errc e) {
  return e <= Errc::FeatureContractMismatch;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace eegwl
