#include <algorithm>

#include "scalematch/error.hpp"
#include "scalematch/proposals.hpp"

namespace scalematch {

std::vector<ObjectProposal> filter_proposals(const std::vector<ObjectProposal>& proposals) {
  std::vector<ObjectProposal> kept;
  for (const auto& p : proposals) {
    const double aspect = p.bbox.width() / p.bbox.height();
    if (p.bbox.area() >= kMinProposalArea && aspect <= kMaxProposalAspect &&
        aspect >= 1.0 / kMaxProposalAspect) {
      kept.push_back(p);
    }
  }
  return kept;
}

Image extract_crop(const Image& image, const BBox& bbox, int resolution) {
  if (resolution <= 0) throw Error(ErrorCode::kInvalidArgument, "crop resolution must be positive");
  if (!(bbox.x_max > bbox.x_min) || !(bbox.y_max > bbox.y_min) || bbox.x_min < 0.0 ||
      bbox.y_min < 0.0 || bbox.x_max > image.width() || bbox.y_max > image.height()) {
    throw Error(ErrorCode::kBBoxOutOfBounds, "box leaves the image");
  }
  Image crop(resolution, resolution, image.channels());
  const double sx = bbox.width() / resolution;
  const double sy = bbox.height() / resolution;
  for (int v = 0; v < resolution; ++v) {
    const double y = bbox.y_min + (v + 0.5) * sy - 0.5;
    for (int u = 0; u < resolution; ++u) {
      const double x = bbox.x_min + (u + 0.5) * sx - 0.5;
      for (int c = 0; c < image.channels(); ++c) crop.at(u, v, c) = sample_bilinear(image, x, y, c);
    }
  }
  return crop;
}

}  // namespace scalematch
