#include "scalematch/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

constexpr double kAtInfinity = 1e-12;
constexpr double kRankTolerance = 1e-10;

struct Normalization {
  Eigen::Matrix3d transform;
  std::vector<Eigen::Vector3d> points;
};

// Isotropic scaling: centroid at the origin, mean distance sqrt(2).
template <typename Getter>
Normalization hartley_normalize(std::size_t n, Getter get) {
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cx += get(i).x;
    cy += get(i).y;
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double mean_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_dist += std::hypot(get(i).x - cx, get(i).y - cy);
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Normalization out;
  out.transform << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.points.emplace_back(s * (get(i).x - cx), s * (get(i).y - cy), 1.0);
  }
  return out;
}

// Right null vector of a design matrix with 9 columns; throws if the matrix
// has rank below 8.
Eigen::Matrix<double, 9, 1> null_vector(const Eigen::MatrixXd& design, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(0) > 0.0) || sv(7) <= kRankTolerance * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, std::string(what) + ": rank-deficient design");
  }
  return svd.matrixV().col(8);
}

bool collinear(const Point2& p, const Point2& q, const Point2& r) {
  const double ux = q.x - p.x;
  const double uy = q.y - p.y;
  const double vx = r.x - p.x;
  const double vy = r.y - p.y;
  const double cross = std::abs(ux * vy - uy * vx);
  const double scale = std::hypot(ux, uy) * std::hypot(vx, vy);
  return scale == 0.0 || cross <= 1e-6 * scale;
}

bool sample_has_collinear_triple(std::span<const PointMatch> sample) {
  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t j = i + 1; j < sample.size(); ++j)
      for (std::size_t k = j + 1; k < sample.size(); ++k)
        if (collinear(sample[i].a, sample[j].a, sample[k].a) ||
            collinear(sample[i].b, sample[j].b, sample[k].b))
          return true;
  return false;
}

// Draws `count` distinct indices from [0, n).
void draw_sample(std::mt19937_64& rng, std::size_t n, std::size_t count,
                 std::vector<std::size_t>& out) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  out.clear();
  while (out.size() < count) {
    const std::size_t idx = pick(rng);
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
}

int adaptive_iterations(double inlier_ratio, std::size_t sample_size, const RansacConfig& cfg) {
  if (inlier_ratio >= 1.0) return 1;
  if (inlier_ratio <= 0.0) return cfg.max_iterations;
  const double p_good = std::pow(inlier_ratio, static_cast<double>(sample_size));
  if (p_good <= std::numeric_limits<double>::min()) return cfg.max_iterations;
  const double denom = std::log1p(-p_good);
  if (denom >= 0.0) return cfg.max_iterations;
  const double n = std::ceil(std::log(1.0 - cfg.confidence) / denom);
  if (!std::isfinite(n) || n > cfg.max_iterations) return cfg.max_iterations;
  return std::max(1, static_cast<int>(n));
}

std::size_t count_true(const std::vector<bool>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

// Forward and backward transfer both within threshold.
std::size_t homography_inliers(const Eigen::Matrix3d& h, const Eigen::Matrix3d& h_inv,
                               std::span<const PointMatch> matches, double threshold,
                               std::vector<bool>& mask) {
  mask.assign(matches.size(), false);
  std::size_t count = 0;
  const double thr2 = threshold * threshold;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto& m = matches[i];
    const Eigen::Vector3d fa = h * Eigen::Vector3d(m.a.x, m.a.y, 1.0);
    const Eigen::Vector3d bb = h_inv * Eigen::Vector3d(m.b.x, m.b.y, 1.0);
    if (std::abs(fa.z()) < kAtInfinity || std::abs(bb.z()) < kAtInfinity) continue;
    const double dfx = fa.x() / fa.z() - m.b.x;
    const double dfy = fa.y() / fa.z() - m.b.y;
    const double dbx = bb.x() / bb.z() - m.a.x;
    const double dby = bb.y() / bb.z() - m.a.y;
    if (dfx * dfx + dfy * dfy <= thr2 && dbx * dbx + dby * dby <= thr2) {
      mask[i] = true;
      ++count;
    }
  }
  return count;
}

std::size_t essential_inliers(const EssentialMatrix& e, std::span<const PointMatch> normalized,
                              double threshold_normalized, std::vector<bool>& mask) {
  mask.assign(normalized.size(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    if (sampson_distance(e, normalized[i]) <= threshold_normalized) {
      mask[i] = true;
      ++count;
    }
  }
  return count;
}

template <typename T>
std::vector<T> select(std::span<const T> items, const std::vector<bool>& mask) {
  std::vector<T> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (mask[i]) out.push_back(items[i]);
  return out;
}

}  // namespace

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

BBox BBox::make(double x_min, double y_min, double x_max, double y_max) {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box with non-positive extent");
  }
  return {x_min, y_min, x_max, y_max};
}

Homography::Homography(const Eigen::Matrix3d& h) : h_(h) {
  if (!h_.allFinite() || h_.norm() == 0.0) {
    throw Error(ErrorCode::kSingularHomography, "zero or non-finite homography");
  }
  normalize();
  if (std::abs(h_.determinant()) <= 1e-12) {
    throw Error(ErrorCode::kSingularHomography, "homography is not invertible");
  }
}

void Homography::normalize() {
  h_ /= h_.norm();
  double sign_ref = h_(2, 2);
  if (sign_ref == 0.0) {
    for (int i = 0; i < 9 && sign_ref == 0.0; ++i) sign_ref = h_.data()[i];
  }
  if (sign_ref < 0.0) h_ = -h_;
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

EssentialMatrix::EssentialMatrix(const Eigen::Matrix3d& e) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!e.allFinite() || !(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "matrix has rank below 2");
  }
  const double s = 1.0 / std::sqrt(2.0);
  e_ = svd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() * svd.matrixV().transpose();
}

UnitQuaternion UnitQuaternion::normalized(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot normalize a zero quaternion");
  }
  return {w / n, x / n, y / n, z / n};
}

UnitQuaternion UnitQuaternion::from_rotation(const Eigen::Matrix3d& r) {
  double w = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  const double trace = r.trace();
  if (trace > 0.0) {
    const double s = 2.0 * std::sqrt(trace + 1.0);
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  UnitQuaternion q = normalized(w, x, y, z);
  if (q.w < 0.0) q = -q;
  return q;
}

Eigen::Matrix3d UnitQuaternion::to_rotation() const {
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),  //
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),   //
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
}

void RansacConfig::validate() const {
  if (!(inlier_threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inlier_threshold <= 0");
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "max_iterations < 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence outside (0,1)");
  }
}

std::size_t HomographyEstimate::inlier_count() const { return count_true(inliers); }
std::size_t EssentialEstimate::inlier_count() const { return count_true(inliers); }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Point2 apply_homography(const Homography& h, const Point2& p) {
  const auto& m = h.matrix();
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (std::abs(w) < kAtInfinity) throw Error(ErrorCode::kPointAtInfinity, "w ~ 0");
  return {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w,
          (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

Homography dlt_homography(std::span<const PointMatch> matches) {
  if (matches.size() < 4) {
    throw Error(ErrorCode::kInsufficientMatches, "homography needs at least 4 matches");
  }
  const auto na = hartley_normalize(matches.size(), [&](std::size_t i) { return matches[i].a; });
  const auto nb = hartley_normalize(matches.size(), [&](std::size_t i) { return matches[i].b; });

  Eigen::MatrixXd design(2 * matches.size(), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d& a = na.points[i];
    const double u = nb.points[i].x();
    const double v = nb.points[i].y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    design.row(r) << 0, 0, 0, -a.x(), -a.y(), -1, v * a.x(), v * a.y(), v;
    design.row(r + 1) << a.x(), a.y(), 1, 0, 0, 0, -u * a.x(), -u * a.y(), -u;
  }
  const auto h = null_vector(design, "homography");
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = nb.transform.inverse() * hn * na.transform;
  try {
    return Homography(full);
  } catch (const Error&) {
    throw Error(ErrorCode::kDegenerateConfiguration, "DLT produced a singular homography");
  }
}

HomographyEstimate estimate_homography_ransac(std::span<const PointMatch> matches,
                                              const RansacConfig& cfg) {
  cfg.validate();
  if (matches.size() < 4) {
    throw Error(ErrorCode::kInsufficientMatches,
                "homography RANSAC needs 4 matches, got " + std::to_string(matches.size()));
  }
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> idx;
  std::array<PointMatch, 4> sample;
  std::vector<bool> mask;
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  int needed = cfg.max_iterations;

  for (int iter = 0; iter < needed && iter < cfg.max_iterations; ++iter) {
    draw_sample(rng, matches.size(), 4, idx);
    for (std::size_t k = 0; k < 4; ++k) sample[k] = matches[idx[k]];
    if (sample_has_collinear_triple(sample)) continue;
    Eigen::Matrix3d h;
    Eigen::Matrix3d h_inv;
    try {
      const Homography model = dlt_homography(sample);
      h = model.matrix();
      h_inv = h.inverse();
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = homography_inliers(h, h_inv, matches, cfg.inlier_threshold, mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
      needed = adaptive_iterations(static_cast<double>(count) / matches.size(), 4, cfg);
    }
  }
  if (best_count < 4) throw Error(ErrorCode::kNoConsensus, "no homography with 4 inliers");

  const auto inlier_matches = select(matches, best_mask);
  Homography refit;
  try {
    refit = dlt_homography(inlier_matches);
  } catch (const Error& e) {
    throw Error(ErrorCode::kNoConsensus, std::string("refit failed: ") + e.what());
  }
  const Eigen::Matrix3d h_inv = refit.matrix().inverse();
  const std::size_t final_count =
      homography_inliers(refit.matrix(), h_inv, matches, cfg.inlier_threshold, mask);
  if (final_count < 4) throw Error(ErrorCode::kNoConsensus, "refit has fewer than 4 inliers");
  return {refit, mask};
}

EssentialMatrix eight_point_essential(std::span<const PointMatch> matches) {
  if (matches.size() < 8) {
    throw Error(ErrorCode::kInsufficientMatches, "8-point algorithm needs at least 8 matches");
  }
  const auto na = hartley_normalize(matches.size(), [&](std::size_t i) { return matches[i].a; });
  const auto nb = hartley_normalize(matches.size(), [&](std::size_t i) { return matches[i].b; });
  Eigen::MatrixXd design(static_cast<Eigen::Index>(matches.size()), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d& a = na.points[i];
    const Eigen::Vector3d& b = nb.points[i];
    design.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(),
        b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  const auto f = null_vector(design, "essential");
  Eigen::Matrix3d fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  return EssentialMatrix(nb.transform.transpose() * fn * na.transform);
}

double sampson_distance(const EssentialMatrix& e, const PointMatch& m) {
  const Eigen::Vector3d a(m.a.x, m.a.y, 1.0);
  const Eigen::Vector3d b(m.b.x, m.b.y, 1.0);
  const Eigen::Vector3d ea = e.matrix() * a;
  const Eigen::Vector3d etb = e.matrix().transpose() * b;
  const double residual = b.dot(ea);
  const double denom = ea.x() * ea.x() + ea.y() * ea.y() + etb.x() * etb.x() + etb.y() * etb.y();
  if (denom <= 0.0) return residual == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(residual) / std::sqrt(denom);
}

EssentialEstimate estimate_essential_ransac(std::span<const PointMatch> matches,
                                            const CameraIntrinsics& k, const RansacConfig& cfg) {
  cfg.validate();
  k.validate();
  if (matches.size() < 8) {
    throw Error(ErrorCode::kInsufficientMatches,
                "essential RANSAC needs 8 matches, got " + std::to_string(matches.size()));
  }
  std::vector<PointMatch> normalized;
  normalized.reserve(matches.size());
  for (const auto& m : matches) normalized.push_back({k.normalize(m.a), k.normalize(m.b), m.score});
  const double threshold = cfg.inlier_threshold / (0.5 * (k.fx + k.fy));

  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> idx;
  std::array<PointMatch, 8> sample;
  std::vector<bool> mask;
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  int needed = cfg.max_iterations;

  for (int iter = 0; iter < needed && iter < cfg.max_iterations; ++iter) {
    draw_sample(rng, normalized.size(), 8, idx);
    for (std::size_t s = 0; s < 8; ++s) sample[s] = normalized[idx[s]];
    std::optional<EssentialMatrix> model;
    try {
      model.emplace(eight_point_essential(sample));
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = essential_inliers(*model, normalized, threshold, mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
      needed = adaptive_iterations(static_cast<double>(count) / normalized.size(), 8, cfg);
    }
  }
  if (best_count < 8) throw Error(ErrorCode::kNoConsensus, "no essential matrix with 8 inliers");

  const auto inlier_matches = select<PointMatch>(normalized, best_mask);
  std::optional<EssentialMatrix> refit;
  try {
    refit.emplace(eight_point_essential(inlier_matches));
  } catch (const Error& e) {
    throw Error(ErrorCode::kNoConsensus, std::string("refit failed: ") + e.what());
  }
  const std::size_t final_count = essential_inliers(*refit, normalized, threshold, mask);
  if (final_count < 8) throw Error(ErrorCode::kNoConsensus, "refit has fewer than 8 inliers");
  return {*refit, mask};
}

RelativePose recover_pose(const EssentialMatrix& e, std::span<const PointMatch> inliers,
                          const CameraIntrinsics& k) {
  k.validate();
  if (inliers.empty()) throw Error(ErrorCode::kInsufficientMatches, "no inliers for pose recovery");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2).normalized();
  const std::array<std::pair<Eigen::Matrix3d, Eigen::Vector3d>, 4> candidates{
      {{r1, t}, {r1, -t}, {r2, t}, {r2, -t}}};

  std::array<std::size_t, 4> in_front{};
  for (const auto& m : inliers) {
    const Point2 a = k.normalize(m.a);
    const Point2 b = k.normalize(m.b);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& [r, tc] = candidates[c];
      // Linear triangulation with P_a = [I | 0], P_b = [R | t].
      Eigen::Matrix<double, 3, 4> pb;
      pb << r, tc;
      Eigen::Matrix4d design;
      design.row(0) << -1, 0, a.x, 0;
      design.row(1) << 0, -1, a.y, 0;
      design.row(2) = b.x * pb.row(2) - pb.row(0);
      design.row(3) = b.y * pb.row(2) - pb.row(1);
      Eigen::JacobiSVD<Eigen::Matrix4d> tri(design, Eigen::ComputeFullV);
      const Eigen::Vector4d xh = tri.matrixV().col(3);
      if (std::abs(xh(3)) < 1e-14 * xh.head<3>().norm()) continue;
      const Eigen::Vector3d xa = xh.head<3>() / xh(3);
      const Eigen::Vector3d xb = r * xa + tc;
      if (xa.z() > 0.0 && xb.z() > 0.0) ++in_front[c];
    }
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(in_front.begin(), in_front.end()) - in_front.begin());
  if (2 * in_front[best] <= inliers.size()) {
    throw Error(ErrorCode::kCheiralityAmbiguity,
                "no decomposition places a strict majority of points in front");
  }
  return {UnitQuaternion::from_rotation(candidates[best].first), candidates[best].second};
}

}  // namespace scalematch
