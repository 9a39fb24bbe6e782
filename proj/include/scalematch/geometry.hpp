#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scalematch {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(const Point2& a, const Point2& b);

/// Axis-aligned box in continuous pixel coordinates. A box covering pixel
/// columns [c0, c1] is stored as x_min = c0, x_max = c1 + 1.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  /// Throws Error(kInvalidArgument) unless the box has positive extent.
  static BBox make(double x_min, double y_min, double x_max, double y_max);

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  Point2 center() const noexcept { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }
  /// Closed-interval containment (boundary points are inside).
  bool contains(const Point2& p) const noexcept {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }

  bool operator==(const BBox&) const = default;
};

struct PointMatch {
  Point2 a;
  Point2 b;
  double score = 0.0;  ///< distance of the descriptor match that produced it

  bool operator==(const PointMatch&) const = default;
};

/// Projective 3x3 transform, kept at unit Frobenius norm with h(2,2) >= 0.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) { normalize(); }
  /// Throws Error(kSingularHomography) if |det| <= 1e-12 after normalization.
  explicit Homography(const Eigen::Matrix3d& h);

  const Eigen::Matrix3d& matrix() const noexcept { return h_; }
  Homography inverse() const;

 private:
  void normalize();
  Eigen::Matrix3d h_;
};

/// 3x3 essential matrix projected onto the essential manifold: singular
/// values (s, s, 0) with unit Frobenius norm.
class EssentialMatrix {
 public:
  /// Projects an arbitrary 3x3 matrix. Throws Error(kDegenerateConfiguration)
  /// when it has fewer than two nonzero singular values.
  explicit EssentialMatrix(const Eigen::Matrix3d& e);

  const Eigen::Matrix3d& matrix() const noexcept { return e_; }

 private:
  Eigen::Matrix3d e_;
};

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  /// Normalizes; throws Error(kInvalidArgument) on a zero quaternion.
  static UnitQuaternion normalized(double w, double x, double y, double z);
  /// Canonical sign: the result always has w >= 0.
  static UnitQuaternion from_rotation(const Eigen::Matrix3d& r);

  Eigen::Matrix3d to_rotation() const;
  double dot(const UnitQuaternion& o) const noexcept { return w * o.w + x * o.x + y * o.y + z * o.z; }
  UnitQuaternion operator-() const noexcept { return {-w, -x, -y, -z}; }
};

/// Maps coordinates of frame a into frame b: X_b = R X_a + t.
struct RelativePose {
  UnitQuaternion rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws Error(kInvalidArgument) unless fx, fy > 0.
  void validate() const;
  Point2 normalize(const Point2& pixel) const noexcept {
    return {(pixel.x - cx) / fx, (pixel.y - cy) / fy};
  }
  Point2 project(const Eigen::Vector3d& camera_point) const noexcept {
    return {fx * camera_point.x() / camera_point.z() + cx,
            fy * camera_point.y() / camera_point.z() + cy};
  }
};

struct RansacConfig {
  double inlier_threshold = 6.0;  ///< pixels
  int max_iterations = 2000;
  double confidence = 0.999;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct HomographyEstimate {
  Homography model;
  std::vector<bool> inliers;
  std::size_t inlier_count() const;
};

struct EssentialEstimate {
  EssentialMatrix model;
  std::vector<bool> inliers;
  std::size_t inlier_count() const;
};

/// Projective application. Throws Error(kPointAtInfinity) when |w| < 1e-12.
Point2 apply_homography(const Homography& h, const Point2& p);

/// Normalized DLT over all matches (a -> b). Needs >= 4 matches.
Homography dlt_homography(std::span<const PointMatch> matches);

/// RANSAC over minimal 4-point samples; inliers have both forward and
/// backward transfer distance within the threshold.
HomographyEstimate estimate_homography_ransac(std::span<const PointMatch> matches,
                                              const RansacConfig& cfg);

/// Normalized 8-point algorithm; matches are in normalized camera coordinates.
EssentialMatrix eight_point_essential(std::span<const PointMatch> matches);

/// Sampson distance of one normalized-coordinate match under E.
double sampson_distance(const EssentialMatrix& e, const PointMatch& normalized_match);

/// RANSAC over pixel matches; the Sampson distance is scaled back to pixels
/// by the mean focal length before comparing with the threshold.
EssentialEstimate estimate_essential_ransac(std::span<const PointMatch> matches,
                                            const CameraIntrinsics& k, const RansacConfig& cfg);

/// Decomposes E and picks the (R, t) that puts the most triangulated inliers
/// in front of both cameras. Inliers are in pixels.
RelativePose recover_pose(const EssentialMatrix& e, std::span<const PointMatch> inliers,
                          const CameraIntrinsics& k);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

}  // namespace scalematch
