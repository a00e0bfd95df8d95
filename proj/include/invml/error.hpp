#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace invml {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  ShapeMismatch,
  SingularMatrix,
  IllConditioned,
  ZeroMatrix,
  RankDeficient,
  RankDeficientHead,
  CycleDetected,
  KTooLarge,
  KRangeInvalid,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  MissingLabels,
  NoConvergence,
  NonFiniteLoss,
  IoError,
  VersionMismatch,
  ChecksumMismatch,
  ZeroDistance,
  DegenerateFold,
  DisconnectedPair,
  NoValidWaypoints,
  DimMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace invml
