#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalematch/descriptors.hpp"
#include "scalematch/geometry.hpp"
#include "scalematch/image.hpp"
#include "scalematch/matching.hpp"
#include "scalematch/proposals.hpp"
#include "scalematch/sift.hpp"

namespace scalematch {

enum class Estimator { kHomography, kEssential };

std::string_view to_string(Estimator estimator);
Estimator parse_estimator(std::string_view name);

struct RunConfig {
  MatchMethod method = MatchMethod::kCombined;
  Estimator estimator = Estimator::kHomography;
  std::optional<LayerId> layer;               ///< empty: fallback descriptor
  std::optional<InputResolution> resolution;  ///< empty: fallback descriptor
  RansacConfig ransac;
  SiftParams sift;
  SegmentationParams segmentation;
  /// "fallback" or "sidecar:<command>".
  std::string backend = "fallback";

  /// Throws Error(kConfigError) on inconsistent settings.
  void validate() const;
};

/// Builds the descriptor backend named by config.backend (and layer /
/// resolution). Sidecar backends launch their own process.
std::unique_ptr<DescriptorBackend> make_backend(const RunConfig& config);

/// Everything the matchers need from one image.
struct FrameFeatures {
  int width = 0;
  int height = 0;
  std::vector<SiftFeature> sift;
  std::vector<ObjectProposal> objects;  ///< filtered proposals with descriptors
  std::size_t raw_proposal_count = 0;
  std::map<std::string, double> timings_ms;
};

bool needs_sift(MatchMethod method);
bool needs_objects(MatchMethod method);

/// Runs SIFT and/or proposals + descriptors. Proposals whose descriptor is a
/// zero vector carry no information and are dropped.
FrameFeatures extract_features(const Image& image, const RunConfig& config,
                               DescriptorBackend* backend, bool with_sift, bool with_objects);

struct Localization {
  bool failed = true;
  std::string failure_reason;
  std::optional<Homography> homography;
  std::optional<EssentialMatrix> essential;
  std::optional<RelativePose> pose;
  std::size_t inlier_count = 0;
  std::size_t object_match_count = 0;
  std::size_t point_match_count = 0;
  std::map<std::string, double> timings_ms;
};

/// Matches features of image a against image b with `method` and fits the
/// configured estimator. Localization failures are reported in the result,
/// not thrown. Throws Error(kConfigError) if the essential estimator has no
/// intrinsics.
Localization localize(const FrameFeatures& a, const FrameFeatures& b, const RunConfig& config,
                      const std::optional<CameraIntrinsics>& intrinsics);

/// extract_features on both images followed by localize.
Localization localize_pair(const Image& a, const Image& b, const RunConfig& config,
                           DescriptorBackend* backend,
                           const std::optional<CameraIntrinsics>& intrinsics);

}  // namespace scalematch
