#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voiceprofile {

enum class ErrorCode {
  MalformedRow,
  DuplicateSpeaker,
  HeightOutOfRange,
  EmptyGroup,
  NonPositive,
  BadMagic,
  DimMismatch,
  TruncatedFile,
  UnknownSpeaker,
  MissingSplit,
  EmptyTrainingSet,
  NonFiniteInput,
  TooManyComponents,
  SingleClass,
  LengthMismatch,
  TooFewPairs,
  InvalidDf,
  EmptyInput,
  NegativeError,
  MissingGender,
  EmptyValidation,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace voiceprofile
