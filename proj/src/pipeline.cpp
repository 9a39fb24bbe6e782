#include "scalematch/pipeline.hpp"

#include <chrono>

#include "scalematch/error.hpp"
#include "scalematch/sidecar.hpp"

namespace scalematch {

namespace {

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

constexpr std::string_view kSidecarPrefix = "sidecar:";

}  // namespace

std::string_view to_string(Estimator estimator) {
  return estimator == Estimator::kHomography ? "homography" : "essential";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "homography") return Estimator::kHomography;
  if (name == "essential") return Estimator::kEssential;
  throw Error(ErrorCode::kConfigError, "unknown estimator '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  try {
    ransac.validate();
    sift.validate();
    segmentation.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  const bool sidecar = backend.rfind(kSidecarPrefix, 0) == 0;
  if (!sidecar && backend != "fallback") {
    throw Error(ErrorCode::kConfigError, "backend must be 'fallback' or 'sidecar:<command>'");
  }
  if (sidecar && (!layer || !resolution)) {
    throw Error(ErrorCode::kConfigError, "the sidecar backend needs --layer and --resolution");
  }
  if (!sidecar && (layer || resolution)) {
    throw Error(ErrorCode::kConfigError, "--layer/--resolution only apply to the sidecar backend");
  }
}

std::unique_ptr<DescriptorBackend> make_backend(const RunConfig& config) {
  config.validate();
  if (config.backend == "fallback") return std::make_unique<FallbackBackend>();
  const std::string command =
      SidecarClient::resolve_command(config.backend.substr(kSidecarPrefix.size()));
  return std::make_unique<SidecarBackend>(SidecarClient::launch(command), *config.layer,
                                          *config.resolution);
}

bool needs_sift(MatchMethod method) { return method != MatchMethod::kObjectsOnly; }
bool needs_objects(MatchMethod method) { return method != MatchMethod::kSiftOnly; }

FrameFeatures extract_features(const Image& image, const RunConfig& config,
                               DescriptorBackend* backend, bool with_sift, bool with_objects) {
  FrameFeatures out;
  out.width = image.width();
  out.height = image.height();
  if (with_sift) {
    const Stopwatch sw;
    out.sift = detect_and_describe(image, config.sift);
    out.timings_ms["sift"] = sw.elapsed_ms();
  }
  if (with_objects) {
    if (backend == nullptr) throw Error(ErrorCode::kConfigError, "object matching needs a backend");
    const Stopwatch sw;
    const auto raw = selective_search(image, config.segmentation);
    out.raw_proposal_count = raw.size();
    out.timings_ms["proposals"] = sw.elapsed_ms();
    const Stopwatch sd;
    for (auto& proposal : filter_proposals(raw)) {
      const Image crop = extract_crop(image, proposal.bbox, backend->crop_side());
      ObjectDescriptor desc = backend->describe(crop);
      if (!(l2_norm(desc.values) > 0.0)) continue;
      proposal.descriptor = std::move(desc);
      out.objects.push_back(std::move(proposal));
    }
    out.timings_ms["descriptors"] = sd.elapsed_ms();
  }
  return out;
}

Localization localize(const FrameFeatures& a, const FrameFeatures& b, const RunConfig& config,
                      const std::optional<CameraIntrinsics>& intrinsics) {
  if (config.estimator == Estimator::kEssential && !intrinsics) {
    throw Error(ErrorCode::kConfigError, "the essential estimator needs camera intrinsics");
  }
  Localization result;
  const Stopwatch sm;
  std::vector<PointMatch> matches;
  std::vector<ObjectMatch> object_matches;
  if (needs_objects(config.method)) object_matches = match_objects(a.objects, b.objects);
  switch (config.method) {
    case MatchMethod::kSiftOnly:
      matches = global_sift_matches(a.sift, b.sift);
      break;
    case MatchMethod::kObjectsOnly:
      matches = object_center_matches(object_matches, a.objects, b.objects);
      break;
    case MatchMethod::kCombined:
      matches = region_guided_sift_matches(object_matches, a.objects, b.objects, a.sift, b.sift);
      break;
  }
  result.object_match_count = object_matches.size();
  result.point_match_count = matches.size();
  result.timings_ms["matching"] = sm.elapsed_ms();

  const Stopwatch se;
  try {
    if (config.estimator == Estimator::kHomography) {
      auto est = estimate_homography_ransac(matches, config.ransac);
      result.inlier_count = est.inlier_count();
      result.homography = est.model;
    } else {
      auto est = estimate_essential_ransac(matches, *intrinsics, config.ransac);
      result.inlier_count = est.inlier_count();
      std::vector<PointMatch> inliers;
      for (std::size_t i = 0; i < matches.size(); ++i)
        if (est.inliers[i]) inliers.push_back(matches[i]);
      result.essential = est.model;
      result.pose = recover_pose(est.model, inliers, *intrinsics);
    }
    result.failed = false;
  } catch (const Error& e) {
    if (!is_localization_failure(e.code())) throw;
    result.failed = true;
    result.failure_reason = e.what();
    result.homography.reset();
    result.essential.reset();
    result.pose.reset();
  }
  result.timings_ms["estimation"] = se.elapsed_ms();
  return result;
}

Localization localize_pair(const Image& a, const Image& b, const RunConfig& config,
                           DescriptorBackend* backend,
                           const std::optional<CameraIntrinsics>& intrinsics) {
  const bool with_sift = needs_sift(config.method);
  const bool with_objects = needs_objects(config.method);
  const auto fa = extract_features(a, config, backend, with_sift, with_objects);
  const auto fb = extract_features(b, config, backend, with_sift, with_objects);
  Localization result = localize(fa, fb, config, intrinsics);
  for (const auto& [name, ms] : fa.timings_ms) result.timings_ms[name] += ms;
  for (const auto& [name, ms] : fb.timings_ms) result.timings_ms[name] += ms;
  return result;
}

}  // namespace scalematch
