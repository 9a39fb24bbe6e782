#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scalematch/geometry.hpp"
#include "scalematch/matching.hpp"

namespace scalematch {

/// Camera-to-world pose: X_world = R X_camera + t (KITTI convention).
struct FramePose {
  UnitQuaternion rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static FramePose from_matrix(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);
};

/// Pose of `far` relative to `near`, in the estimator's convention
/// (X_far = R X_near + t).
RelativePose relative_pose(const FramePose& near, const FramePose& far);

/// KITTI mode scores poses (t_err, r_err); pair mode scores homographies (STE).
enum class EvalMode { kKitti, kPairs };

struct PairRecord {
  std::string sequence;
  std::size_t index_near = 0;
  std::size_t index_far = 0;
  int gap_j = 0;  ///< steps in the subsampled sequence; 0 for annotated pairs
  RelativePose ground_truth;
};

struct EvalRecord {
  PairRecord pair;
  MatchMethod method = MatchMethod::kCombined;
  std::optional<RelativePose> pose;
  std::optional<Homography> homography;
  double t_err = 1.0;
  double r_err = 1.0;
  std::optional<double> ste;
  bool failed = true;
  std::size_t match_count = 0;
};

/// Ten hand-annotated correspondences between a near and a far image.
struct PairAnnotation {
  std::string scene;
  std::filesystem::path near_image;
  std::filesystem::path far_image;
  std::vector<std::pair<Point2, Point2>> correspondences;  ///< (near, far)
};

inline constexpr std::size_t kAnnotationPoints = 10;

struct GroupSummary {
  int gap_j = 0;
  double mean_distance = 0.0;
  double mean_t_err = 0.0;
  double mean_r_err = 0.0;
  double failure_rate = 0.0;
  std::size_t pair_count = 0;
};

struct LogCurve {
  double a = 0.0;  ///< y = a + b ln(x)
  double b = 0.0;
};

/// Largest STE observed in the original experiments; the score of a failed
/// pair.
inline constexpr double kSteMax = 15'833'861'380.8;

/// |t_g - t_e| / (|t_g| + |t_e|). Throws Error(kBothZero).
double translational_error(const Eigen::Vector3d& t_g, const Eigen::Vector3d& t_e);

/// 1 - |q_g . q_e|, clamped to [0, 1].
double rotational_error(const UnitQuaternion& q_g, const UnitQuaternion& q_e);

/// Sum over correspondences of |far - H near| + |near - H^-1 far|. Throws
/// Error(kSingularHomography) when H cannot be inverted.
double symmetric_transfer_error(const Homography& h, const PairAnnotation& annotation);

/// ln(max(ste, 1)); a missing value (failure) scores ln(kSteMax).
double log_ste(std::optional<double> ste);

/// Median over all point pairs (i < j) of |near_i - near_j| / |far_i - far_j|.
/// Throws Error(kDuplicateFarPoints).
double median_scale_change(const PairAnnotation& annotation);

/// Intrinsic Z-Y-X (yaw, pitch, roll) angles of a rotation, in radians.
std::array<double, 3> yaw_pitch_roll(const Eigen::Matrix3d& r);

/// True iff every Z-Y-X angle of the relative rotation is within `limit_deg`.
bool gaze_compatible(const FramePose& a, const FramePose& b, double limit_deg = 45.0);

struct KittiSequence {
  std::vector<FramePose> poses;
  CameraIntrinsics intrinsics;
};

/// Parses a KITTI pose file (12 reals per line, row-major [R|t]) and the P2
/// row of calib.txt. Throws Error(kParseError) or Error(kFileNotFound).
KittiSequence load_kitti_sequence(const std::filesystem::path& pose_file,
                                  const std::filesystem::path& calib_file);

std::vector<FramePose> parse_kitti_poses(const std::string& text);
CameraIntrinsics parse_kitti_calib(const std::string& text);

/// Subsamples every `subsample`-th frame and pairs each kept frame with its
/// next `max_gap` kept frames, dropping pairs that fail the gaze filter.
std::vector<PairRecord> build_pairs(std::span<const FramePose> poses, int subsample = 5,
                                    int max_gap = 10, const std::string& sequence = "");

/// Loads `<root>/<scene>/{near.png,far.png,annotation.json}` for every scene
/// directory, sorted by name. Throws Error(kParseError) or Error(kMissingImage).
std::vector<PairAnnotation> load_pair_dataset(const std::filesystem::path& root);

/// Parses one annotation document and checks it against the image sizes.
std::vector<std::pair<Point2, Point2>> parse_annotation(const std::string& json, int near_width,
                                                        int near_height, int far_width,
                                                        int far_height);

/// Groups by gap_j (ascending). Failed records count as t_err = r_err = 1.
std::vector<GroupSummary> summarize_groups(std::span<const EvalRecord> records);

/// Closed-form least squares of y = a + b ln(x). Throws Error(kDegenerateX)
/// when all x are equal, Error(kInvalidArgument) for x <= 0.
LogCurve fit_log_curve(std::span<const std::pair<double, double>> points);

/// Marks a record as a localization failure with the maximum errors.
void mark_failed(EvalRecord& record, EvalMode mode);

}  // namespace scalematch
