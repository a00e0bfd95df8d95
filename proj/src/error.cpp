#include "invml/error.hpp"

namespace invml {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::RankDeficientHead: return "RankDeficientHead";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::KRangeInvalid: return "KRangeInvalid";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::DegenerateFold: return "DegenerateFold";
    case ErrorCode::DisconnectedPair: return "DisconnectedPair";
    case ErrorCode::NoValidWaypoints: return "NoValidWaypoints";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace invml
