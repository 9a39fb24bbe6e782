#pragma once

#include <array>
#include <span>
#include <vector>

#include "scalematch/geometry.hpp"
#include "scalematch/image.hpp"

namespace scalematch {

struct SiftParams {
  int octave_layers = 3;
  double initial_sigma = 1.6;
  double edge_threshold = 10.0;
  /// Same convention as the OpenCV parameter of that name: a refined extremum
  /// is kept when |D| * octave_layers >= contrast_threshold, with D measured
  /// on [0,1] intensities.
  double contrast_threshold = 0.04;

  void validate() const;
};

inline constexpr std::size_t kSiftDescriptorSize = 128;
using SiftDescriptor = std::array<float, kSiftDescriptorSize>;

struct SiftFeature {
  Point2 location;          ///< full-resolution pixel coordinates
  double scale = 0.0;       ///< blur sigma of the keypoint in full-resolution pixels
  double orientation = 0.0; ///< radians in [0, 2pi), y axis pointing down
  SiftDescriptor descriptor{};
  int octave = 0;
  double response = 0.0;    ///< refined DoG value
};

/// Detects DoG keypoints and computes 4x4x8 gradient-histogram descriptors.
/// Output is ordered by octave, scale, y, x, orientation. Throws
/// Error(kImageTooSmall) below 16x16.
std::vector<SiftFeature> detect_and_describe(const Image& image, const SiftParams& params = {});

/// Normalizes to unit length, clamps entries at 0.2 and renormalizes.
void normalize_sift_descriptor(std::span<float, kSiftDescriptorSize> descriptor);

}  // namespace scalematch
