#pragma once

#include <optional>
#include <vector>

#include "scalematch/descriptors.hpp"
#include "scalematch/geometry.hpp"
#include "scalematch/image.hpp"

namespace scalematch {

struct SegmentationParams {
  double k = 300.0;            ///< merging constant, in 0-255 color units
  double smoothing_sigma = 0.8;
  int min_region = 50;         ///< pixels

  void validate() const;
};

/// Per-pixel region labels, contiguous from 0 in raster order of first
/// appearance.
struct LabelMap {
  int width = 0;
  int height = 0;
  int region_count = 0;
  std::vector<int> labels;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Graph-based segmentation on an 8-connected pixel grid with Euclidean RGB
/// edge weights; regions below min_region are absorbed along their cheapest
/// edge afterwards.
LabelMap graph_segment(const Image& rgb, const SegmentationParams& params = {});

struct ObjectProposal {
  BBox bbox;
  std::optional<ObjectDescriptor> descriptor;
};

/// Full record of one hierarchical grouping run.
struct SelectiveSearchResult {
  int initial_region_count = 0;
  /// One entry per merge: the two region ids merged and the id of the result.
  struct Merge {
    int a;
    int b;
    int merged;
  };
  std::vector<Merge> merges;
  /// Bounding box of every region ever formed, deduplicated; a box that
  /// occurs more than once is reported at its last occurrence, so the
  /// full-image box always comes last.
  std::vector<ObjectProposal> proposals;
};

/// Hierarchical grouping of the graph segmentation: repeatedly merges the
/// most similar adjacent pair under color + texture + size + fill similarity.
/// Throws Error(kImageTooSmall) below 32x32.
SelectiveSearchResult selective_search_hierarchy(const Image& rgb,
                                                 const SegmentationParams& params = {});

std::vector<ObjectProposal> selective_search(const Image& rgb,
                                             const SegmentationParams& params = {});

inline constexpr double kMinProposalArea = 200.0;
inline constexpr double kMaxProposalAspect = 3.0;

/// Keeps boxes with area >= 200 px^2 and width/height within [1/3, 3].
std::vector<ObjectProposal> filter_proposals(const std::vector<ObjectProposal>& proposals);

/// Bilinear resample of `bbox` to a resolution x resolution crop. Throws
/// Error(kBBoxOutOfBounds) when the box leaves the image.
Image extract_crop(const Image& image, const BBox& bbox, int resolution);

}  // namespace scalematch
