#include "scalematch/error.hpp"

namespace scalematch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kInsufficientMatches: return "InsufficientMatches";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kCheiralityAmbiguity: return "CheiralityAmbiguity";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kBBoxOutOfBounds: return "BBoxOutOfBounds";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIncompatibleDescriptors: return "IncompatibleDescriptors";
    case ErrorCode::kSidecarUnavailable: return "SidecarUnavailable";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBothZero: return "BothZero";
    case ErrorCode::kSingularHomography: return "SingularHomography";
    case ErrorCode::kDuplicateFarPoints: return "DuplicateFarPoints";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kDegenerateX: return "DegenerateX";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kDatasetLayoutError: return "DatasetLayoutError";
  }
  return "Unknown";
}

bool is_localization_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPointAtInfinity:
    case ErrorCode::kDegenerateConfiguration:
    case ErrorCode::kInsufficientMatches:
    case ErrorCode::kNoConsensus:
    case ErrorCode::kCheiralityAmbiguity:
    case ErrorCode::kSingularHomography:
      return true;
    default:
      return false;
  }
}

}  // namespace scalematch
