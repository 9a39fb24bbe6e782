#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scalematch {

enum class ErrorCode {
  kInvalidArgument,
  // geometry
  kPointAtInfinity,
  kDegenerateConfiguration,
  kInsufficientMatches,
  kNoConsensus,
  kCheiralityAmbiguity,
  // images / proposals / features
  kImageTooSmall,
  kBBoxOutOfBounds,
  // descriptors
  kZeroVector,
  kLengthMismatch,
  kIncompatibleDescriptors,
  kSidecarUnavailable,
  kProtocolError,
  kShapeMismatch,
  // evaluation
  kBothZero,
  kSingularHomography,
  kDuplicateFarPoints,
  kParseError,
  kMissingImage,
  kDegenerateX,
  // cli
  kFileNotFound,
  kConfigError,
  kDatasetLayoutError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for errors that mean "no pose/homography could be estimated" rather
/// than a bug or an I/O problem. These are scored as maximum error.
bool is_localization_failure(ErrorCode code);

}  // namespace scalematch
