#include "scalematch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "scalematch/error.hpp"
#include "scalematch/image.hpp"

namespace scalematch {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_reals(const std::string& line, std::size_t line_no) {
  std::istringstream ss(line);
  std::vector<double> values;
  std::string token;
  while (ss >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": bad number '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace

FramePose FramePose::from_matrix(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  return {UnitQuaternion::from_rotation(r), t};
}

RelativePose relative_pose(const FramePose& near, const FramePose& far) {
  const Eigen::Matrix3d r_near = near.rotation.to_rotation();
  const Eigen::Matrix3d r_far_t = far.rotation.to_rotation().transpose();
  return {UnitQuaternion::from_rotation(r_far_t * r_near),
          r_far_t * (near.translation - far.translation)};
}

double translational_error(const Eigen::Vector3d& t_g, const Eigen::Vector3d& t_e) {
  const double denom = t_g.norm() + t_e.norm();
  if (!(denom > 0.0)) throw Error(ErrorCode::kBothZero, "both translations are zero");
  return std::clamp((t_g - t_e).norm() / denom, 0.0, 1.0);
}

double rotational_error(const UnitQuaternion& q_g, const UnitQuaternion& q_e) {
  return std::clamp(1.0 - std::abs(q_g.dot(q_e)), 0.0, 1.0);
}

double symmetric_transfer_error(const Homography& h, const PairAnnotation& annotation) {
  const Homography h_inv = h.inverse();
  double total = 0.0;
  for (const auto& [near, far] : annotation.correspondences) {
    total += distance(far, apply_homography(h, near));
    total += distance(near, apply_homography(h_inv, far));
  }
  return total;
}

double log_ste(std::optional<double> ste) {
  if (!ste) return std::log(kSteMax);
  if (!(*ste >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative STE");
  return std::log(std::max(*ste, 1.0));
}

double median_scale_change(const PairAnnotation& annotation) {
  const auto& c = annotation.correspondences;
  if (c.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two correspondences");
  std::vector<double> ratios;
  ratios.reserve(c.size() * (c.size() - 1) / 2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double far = distance(c[i].second, c[j].second);
      if (!(far > 0.0)) {
        throw Error(ErrorCode::kDuplicateFarPoints,
                    "far points " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
      ratios.push_back(distance(c[i].first, c[j].first) / far);
    }
  }
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  return n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
}

std::array<double, 3> yaw_pitch_roll(const Eigen::Matrix3d& r) {
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

bool gaze_compatible(const FramePose& a, const FramePose& b, double limit_deg) {
  const Eigen::Matrix3d rel = a.rotation.to_rotation().transpose() * b.rotation.to_rotation();
  const double limit = limit_deg * std::numbers::pi / 180.0;
  // A hair of slack so that an angle of exactly `limit` survives round-off.
  constexpr double kSlack = 1e-12;
  for (double angle : yaw_pitch_roll(rel)) {
    if (std::abs(angle) > limit + kSlack) return false;
  }
  return true;
}

std::vector<FramePose> parse_kitti_poses(const std::string& text) {
  std::vector<FramePose> poses;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto v = parse_reals(line, line_no);
    if (v.size() != 12) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected 12 values, got " +
                                              std::to_string(v.size()));
    }
    Eigen::Matrix3d r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    const Eigen::Vector3d t(v[3], v[7], v[11]);
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-3 || r.determinant() <= 0.0) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": rotation is not a proper rotation");
    }
    poses.push_back(FramePose::from_matrix(r, t));
  }
  return poses;
}

CameraIntrinsics parse_kitti_calib(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("P2:", 0) != 0) continue;
    const auto v = parse_reals(line.substr(3), line_no);
    if (v.size() != 12) throw Error(ErrorCode::kParseError, "P2 needs 12 values");
    CameraIntrinsics k{v[0], v[5], v[2], v[6]};
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(ErrorCode::kParseError, "non-positive focal length");
    return k;
  }
  throw Error(ErrorCode::kParseError, "calibration has no P2 line");
}

KittiSequence load_kitti_sequence(const std::filesystem::path& pose_file,
                                  const std::filesystem::path& calib_file) {
  return {parse_kitti_poses(read_file(pose_file)), parse_kitti_calib(read_file(calib_file))};
}

std::vector<PairRecord> build_pairs(std::span<const FramePose> poses, int subsample, int max_gap,
                                    const std::string& sequence) {
  if (subsample < 1 || max_gap < 1) {
    throw Error(ErrorCode::kInvalidArgument, "subsample and max_gap must be >= 1");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < poses.size(); i += static_cast<std::size_t>(subsample)) kept.push_back(i);
  std::vector<PairRecord> pairs;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (int j = 1; j <= max_gap && i + j < kept.size(); ++j) {
      const FramePose& near = poses[kept[i]];
      const FramePose& far = poses[kept[i + j]];
      if (!gaze_compatible(near, far)) continue;
      pairs.push_back({sequence, kept[i], kept[i + j], j, relative_pose(near, far)});
    }
  }
  return pairs;
}

std::vector<std::pair<Point2, Point2>> parse_annotation(const std::string& json, int near_width,
                                                        int near_height, int far_width,
                                                        int far_height) {
  std::vector<std::pair<Point2, Point2>> out;
  try {
    const auto doc = nlohmann::json::parse(json);
    for (const auto& c : doc.at("correspondences")) {
      const auto near = c.at("near").get<std::vector<double>>();
      const auto far = c.at("far").get<std::vector<double>>();
      if (near.size() != 2 || far.size() != 2) {
        throw Error(ErrorCode::kParseError, "points must have two coordinates");
      }
      out.push_back({{near[0], near[1]}, {far[0], far[1]}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (out.size() != kAnnotationPoints) {
    throw Error(ErrorCode::kParseError, "expected 10 correspondences, got " + std::to_string(out.size()));
  }
  const auto inside = [](const Point2& p, int w, int h) {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 && p.x < w && p.y < h;
  };
  for (const auto& [near, far] : out) {
    if (!inside(near, near_width, near_height) || !inside(far, far_width, far_height)) {
      throw Error(ErrorCode::kParseError, "annotated point outside the image");
    }
  }
  return out;
}

std::vector<PairAnnotation> load_pair_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw Error(ErrorCode::kFileNotFound, root.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> scenes;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory()) scenes.push_back(entry.path());
  }
  std::sort(scenes.begin(), scenes.end());
  std::vector<PairAnnotation> pairs;
  for (const auto& dir : scenes) {
    PairAnnotation ann;
    ann.scene = dir.filename().string();
    ann.near_image = dir / "near.png";
    ann.far_image = dir / "far.png";
    for (const auto& img : {ann.near_image, ann.far_image}) {
      if (!std::filesystem::exists(img)) throw Error(ErrorCode::kMissingImage, img.string());
    }
    const Image near = load_image(ann.near_image);
    const Image far = load_image(ann.far_image);
    const auto annotation_file = dir / "annotation.json";
    if (!std::filesystem::exists(annotation_file)) {
      throw Error(ErrorCode::kParseError, annotation_file.string() + " is missing");
    }
    try {
      ann.correspondences = parse_annotation(read_file(annotation_file), near.width(),
                                             near.height(), far.width(), far.height());
    } catch (const Error& e) {
      throw Error(e.code(), ann.scene + ": " + e.what());
    }
    pairs.push_back(std::move(ann));
  }
  return pairs;
}

std::vector<GroupSummary> summarize_groups(std::span<const EvalRecord> records) {
  std::map<int, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) groups[r.pair.gap_j].push_back(&r);
  std::vector<GroupSummary> out;
  for (const auto& [gap, members] : groups) {
    GroupSummary s;
    s.gap_j = gap;
    s.pair_count = members.size();
    double dist = 0.0;
    double t = 0.0;
    double r = 0.0;
    std::size_t failures = 0;
    for (const EvalRecord* rec : members) {
      dist += rec->pair.ground_truth.translation.norm();
      t += rec->failed ? 1.0 : rec->t_err;
      r += rec->failed ? 1.0 : rec->r_err;
      if (rec->failed) ++failures;
    }
    const auto n = static_cast<double>(members.size());
    s.mean_distance = dist / n;
    s.mean_t_err = t / n;
    s.mean_r_err = r / n;
    s.failure_rate = static_cast<double>(failures) / n;
    out.push_back(s);
  }
  return out;
}

LogCurve fit_log_curve(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error(ErrorCode::kDegenerateX, "need at least two points");
  const bool all_equal = std::all_of(points.begin(), points.end(),
                                     [&](const auto& p) { return p.first == points[0].first; });
  if (all_equal) throw Error(ErrorCode::kDegenerateX, "all x values are equal");
  double mean_lx = 0.0;
  double mean_y = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0)) throw Error(ErrorCode::kInvalidArgument, "log fit needs x > 0");
    mean_lx += std::log(x);
    mean_y += y;
  }
  const auto n = static_cast<double>(points.size());
  mean_lx /= n;
  mean_y /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mean_lx;
    sxx += dx * dx;
    sxy += dx * (y - mean_y);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::kDegenerateX, "all x values are equal");
  const double b = sxy / sxx;
  return {mean_y - b * mean_lx, b};
}

void mark_failed(EvalRecord& record, EvalMode mode) {
  record.failed = true;
  record.t_err = 1.0;
  record.r_err = 1.0;
  record.pose.reset();
  record.homography.reset();
  record.ste.reset();
  if (mode == EvalMode::kPairs) record.ste = kSteMax;
}

}  // namespace scalematch
