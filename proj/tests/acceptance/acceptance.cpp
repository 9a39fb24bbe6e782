// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "generators.hpp"
#include "scalematch/descriptors.hpp"
#include "scalematch/error.hpp"
#include "scalematch/evaluation.hpp"
#include "scalematch/geometry.hpp"
#include "scalematch/matching.hpp"
#include "scalematch/pipeline.hpp"
#include "scalematch/runner.hpp"
#include "scalematch/sift.hpp"
#include "scenes.hpp"

using namespace scalematch;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0 && secs >= limit_s) {
    if (o.ok) o.detail = fmt::format("took {:.2f} s, limit {} s", secs, limit_s);
    o.ok = false;
  }
  if (!o.ok) ++failures;
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << fmt::format(" [{:.3f} s]", secs)
            << (o.detail.empty() ? "" : "  " + o.detail) << std::endl;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::vector<std::span<const float>> views(const std::vector<std::vector<float>>& v) {
  return {v.begin(), v.end()};
}

// Double-loop nearest neighbours in both directions, lowest index on ties.
std::vector<IndexMatch> brute_force_mnn(const std::vector<std::vector<float>>& a,
                                        const std::vector<std::vector<float>>& b, Metric m) {
  const auto dist = [m](const std::vector<float>& u, const std::vector<float>& v) {
    if (m == Metric::kEuclidean) {
      double s = 0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = static_cast<double>(u[i]) - v[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += static_cast<double>(u[i]) * v[i];
    for (float x : u) nu += static_cast<double>(x) * x;
    for (float x : v) nv += static_cast<double>(x) * x;
    return std::clamp(1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 2.0);
  };
  std::vector<IndexMatch> out;
  if (a.empty() || b.empty()) return out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t best_j = 0;
    for (std::size_t j = 1; j < b.size(); ++j)
      if (dist(a[i], b[j]) < dist(a[i], b[best_j])) best_j = j;
    std::size_t best_i = 0;
    for (std::size_t k = 1; k < a.size(); ++k)
      if (dist(a[k], b[best_j]) < dist(a[best_i], b[best_j])) best_i = k;
    if (best_i == i) out.push_back({i, best_j, dist(a[i], b[best_j])});
  }
  return out;
}

SiftFeature feature_at(double x, double y, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0, 0.2f);
  SiftFeature f;
  f.location = {x, y};
  for (auto& v : f.descriptor) v = u(rng);
  return f;
}

ObjectProposal box_proposal(BBox box) { return {box, ObjectDescriptor{{1.0f}, std::nullopt, std::nullopt}}; }

Outcome metric_exactness() {
  Outcome o;
  constexpr double tol = 1e-9;
  const Eigen::Vector3d t(1, 2, 3);
  o.check(near(translational_error(t, t), 0, tol), "t_err identical");
  o.check(near(translational_error(t, -t), 1, tol), "t_err antipodal");
  o.check(near(translational_error({1, 0, 0}, {0, 1, 0}), std::sqrt(2.0) / 2, tol), "t_err orthogonal");
  const auto q = UnitQuaternion::normalized(0.4, -0.1, 0.7, 0.2);
  o.check(near(rotational_error(q, q), 0, tol), "r_err identical");
  o.check(near(rotational_error(q, -q), 0, tol), "r_err double cover");
  o.check(near(rotational_error({1, 0, 0, 0}, {0, 1, 0, 0}), 1, tol), "r_err orthogonal");
  const std::vector<float> v123{1, 2, 3}, e1{1, 0}, e2{0, 1}, diag{1, 1};
  o.check(near(cosine_distance(v123, v123), 0, tol), "cosine identical");
  o.check(near(cosine_distance(e1, e2), 1, tol), "cosine orthogonal");
  o.check(near(cosine_distance(e1, diag), 1 - 1 / std::sqrt(2.0), tol), "cosine 45 degrees");

  Eigen::Matrix3d h;
  h << 1.2, 0.05, 14, -0.03, 0.9, -7, 1e-4, -2e-4, 1;
  PairAnnotation exact, shifted;
  for (int i = 0; i < 10; ++i) {
    const Point2 p{30.0 + 41 * i, 200.0 - 13 * i};
    exact.correspondences.push_back({p, gen::project_h(h, p)});
    shifted.correspondences.push_back({p, {p.x + 1, p.y}});
  }
  o.check(near(symmetric_transfer_error(Homography(h), exact), 0, tol), "STE exact model");
  o.check(near(symmetric_transfer_error(Homography(), shifted), 20, tol), "STE unit shift");
  o.check(near(log_ste(1.0), 0, tol), "log_ste(1)");
  o.check(near(log_ste(std::exp(10.0)), 10, tol), "log_ste(e^10)");
  const double fail = log_ste(std::nullopt);
  o.check(near(fail, std::log(15'833'861'380.8), 1e-3) && near(fail, 23.4855, 1e-3), "log_ste(failure)");
  o.detail = o.ok ? fmt::format("log_ste(failure)={:.6f}", fail) : o.detail;
  return o;
}

Outcome homography_robustness() {
  Outcome o;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto trial = gen::homography_trial(seed);
    RansacConfig cfg;
    cfg.rng_seed = seed;
    try {
      const auto est = estimate_homography_ransac(trial.matches, cfg);
      if (gen::corner_error(trial.truth, est.model) < 1.5) ++good;
    } catch (const Error&) {
    }
  }
  o.check(good >= 99, "too few successes");
  o.detail += fmt::format("{}/100 trials with corner error < 1.5 px", good);
  return o;
}

Outcome pose_round_trip() {
  Outcome o;
  const auto k = gen::test_camera();
  int good = 0;
  double worst_r = 0, worst_angle = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto scene = gen::random_pose_scene(1000 + seed, 100, k);
    RansacConfig cfg;
    cfg.rng_seed = seed;
    try {
      const auto est = estimate_essential_ransac(scene.matches, k, cfg);
      std::vector<PointMatch> inliers;
      for (std::size_t i = 0; i < scene.matches.size(); ++i)
        if (est.inliers[i]) inliers.push_back(scene.matches[i]);
      const auto pose = recover_pose(est.model, inliers, k);
      const double r = rotational_error(UnitQuaternion::from_rotation(scene.r), pose.rotation);
      const double angle = gen::angle_deg(scene.t, pose.translation);
      worst_r = std::max(worst_r, r);
      worst_angle = std::max(worst_angle, angle);
      if (r < 1e-6 && angle < 0.01) ++good;
    } catch (const Error&) {
    }
  }
  o.check(good >= 99, "too few successes");
  o.detail += fmt::format("{}/100 trials (worst r_err {:.2e}, worst angle {:.2e} deg)", good, worst_r, worst_angle);
  return o;
}

Outcome matcher_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(0, 50), dim(1, 16);
  std::uniform_real_distribution<float> u(-1, 1);
  std::uniform_int_distribution<int> coarse(1, 3);
  int compared = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t d = dim(rng);
    const bool ties = instance % 4 == 0;
    auto make = [&](std::size_t n) {
      std::vector<std::vector<float>> s(n, std::vector<float>(d));
      for (auto& v : s)
        for (auto& x : v) x = ties ? static_cast<float>(coarse(rng)) : u(rng);
      return s;
    };
    const auto a = make(size(rng));
    const auto b = make(size(rng));
    for (Metric m : {Metric::kEuclidean, Metric::kCosine}) {
      const auto got = mutual_nearest_match(views(a), views(b), m);
      const auto want = brute_force_mnn(a, b, m);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].index_a == want[i].index_a && got[i].index_b == want[i].index_b &&
               got[i].distance == want[i].distance;
      }
      o.check(same, fmt::format("instance {} differs", instance));
      ++compared;
    }
  }
  o.detail = o.ok ? fmt::format("{} comparisons exact", compared) : o.detail;
  return o;
}

Outcome region_guided_reduction() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(0, 320);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SiftFeature> fa, fb;
    for (int i = 0; i < 80; ++i) fa.push_back(feature_at(coord(rng), coord(rng) * 0.75, rng));
    for (int i = 0; i < 90; ++i) fb.push_back(feature_at(coord(rng), coord(rng) * 0.75, rng));
    const std::vector<ObjectProposal> pa{box_proposal(BBox::make(0, 0, 320, 240))};
    const std::vector<ObjectProposal> pb{box_proposal(BBox::make(0, 0, 320, 240))};
    const std::vector<ObjectMatch> om{{0, 0, 0.0}};
    o.check(region_guided_sift_matches(om, pa, pb, fa, fb) == global_sift_matches(fa, fb),
            "full-image box differs from global matching");
  }

  // Disjoint planted regions: features inside matched boxes are perturbed
  // copies of each other; everything else is a decoy, including exact
  // descriptor duplicates placed outside the boxes.
  std::normal_distribution<float> jitter(0, 0.001f);
  std::vector<SiftFeature> fa, fb;
  std::vector<std::pair<Point2, Point2>> planted;
  const std::vector<std::pair<BBox, BBox>> regions{{BBox::make(10, 10, 60, 60), BBox::make(200, 20, 250, 70)},
                                                   {BBox::make(100, 150, 160, 200), BBox::make(20, 160, 80, 210)},
                                                   {BBox::make(220, 100, 300, 140), BBox::make(120, 90, 200, 130)}};
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (const auto& [ba, bb] : regions) {
    for (int i = 0; i < 6; ++i) {
      SiftFeature a = feature_at(ba.x_min + unit(rng) * ba.width(), ba.y_min + unit(rng) * ba.height(), rng);
      SiftFeature b = a;
      b.location = {bb.x_min + unit(rng) * bb.width(), bb.y_min + unit(rng) * bb.height()};
      for (auto& v : b.descriptor) v += jitter(rng);
      SiftFeature decoy = a;
      decoy.location = {300, 230};
      fa.push_back(a);
      fb.push_back(b);
      fb.push_back(decoy);
      planted.push_back({a.location, b.location});
    }
  }
  for (int i = 0; i < 30; ++i) fa.push_back(feature_at(300 + coord(rng) / 32, 5, rng));
  std::vector<ObjectProposal> pa, pb;
  std::vector<ObjectMatch> om;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    pa.push_back(box_proposal(regions[k].first));
    pb.push_back(box_proposal(regions[k].second));
    om.push_back({k, k, 0.0});
  }
  auto got = region_guided_sift_matches(om, pa, pb, fa, fb);
  std::vector<std::pair<Point2, Point2>> got_pairs;
  for (const auto& m : got) got_pairs.push_back({m.a, m.b});
  const auto less = [](const auto& x, const auto& y) {
    return std::tie(x.first.x, x.first.y, x.second.x, x.second.y) <
           std::tie(y.first.x, y.first.y, y.second.x, y.second.y);
  };
  std::sort(got_pairs.begin(), got_pairs.end(), less);
  std::sort(planted.begin(), planted.end(), less);
  o.check(got_pairs == planted, fmt::format("planted {} pairs, got {}", planted.size(), got_pairs.size()));
  if (o.ok) o.detail = fmt::format("20 full-image trials equal; {} planted pairs recovered exactly", planted.size());
  return o;
}

Outcome sift_scale_proxy() {
  Outcome o;
  const Image base = synth::render(synth::random_scene(5, 0, 0, 192, 160, 80, 3.0, 18.0), 192, 160);
  const Image up = synth::upsample2x(base);
  const auto fa = detect_and_describe(base);
  const auto fb = detect_and_describe(up);
  std::size_t good = 0;
  for (const auto& m : global_sift_matches(fa, fb)) {
    // The upsampling puts original pixel centre x at 2x + 0.5.
    const Point2 mapped{2 * m.a.x + 0.5, 2 * m.a.y + 0.5};
    if (distance(mapped, m.b) <= 3.0) ++good;
  }
  const double ratio = fa.empty() ? 0.0 : static_cast<double>(good) / fa.size();
  o.check(ratio >= 0.3, "too few consistent matches");
  const auto flat = detect_and_describe(synth::constant_image(192, 160, 1, 0.5f));
  o.check(flat.empty(), "flat image produced features");
  o.detail += fmt::format("{} of {} features ({:.1f}%) matched within 3 px; flat image: {} features", good,
                          fa.size(), 100 * ratio, flat.size());
  return o;
}

Outcome end_to_end() {
  Outcome o;
  constexpr int w = 320, h = 240;
  const double cx = w / 2.0, cy = h / 2.0;
  const auto scene = synth::random_scene(31, 0, 0, w, h, 90, 4, 22);
  // far is the near view magnified 2x about the image centre.
  Eigen::Matrix3d far_to_world;
  far_to_world << 0.5, 0, cx / 2, 0, 0.5, cy / 2, 0, 0, 1;
  const Image near_img = synth::render(scene, w, h);
  const Image far_img = synth::render(scene, w, h, far_to_world);
  Eigen::Matrix3d truth;  // near -> far
  truth << 2, 0, -cx, 0, 2, -cy, 0, 0, 1;

  PairAnnotation ann;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(cx - w / 4.0 + 2, cx + w / 4.0 - 2), uy(cy - h / 4.0 + 2, cy + h / 4.0 - 2);
  for (int i = 0; i < 10; ++i) {
    const Point2 p{ux(rng), uy(rng)};
    ann.correspondences.push_back({p, gen::project_h(truth, p)});
  }

  RunConfig config;
  config.method = MatchMethod::kCombined;
  FallbackBackend backend;
  const auto loc = localize_pair(near_img, far_img, config, &backend, std::nullopt);
  o.check(!loc.failed && loc.homography.has_value(), "localization failed: " + loc.failure_reason);
  double per_point = -1;
  if (loc.homography) {
    per_point = symmetric_transfer_error(*loc.homography, ann) / 10.0;
    o.check(per_point < 5.0, "STE per point too large");
  }

  // Blank pair through the evaluation path: the failure is scored as STE_max.
  synth::TempDir dir("acceptance_blank");
  const auto scene_dir = dir.path() / "blank";
  std::filesystem::create_directories(scene_dir);
  save_image(synth::constant_image(160, 120, 3, 0.5f), scene_dir / "near.png");
  save_image(synth::constant_image(160, 120, 3, 0.5f), scene_dir / "far.png");
  std::string json = "{\"correspondences\": [";
  for (int i = 0; i < 10; ++i) json += fmt::format("{}{{\"near\": [{}, 10], \"far\": [{}, 20]}}", i ? ", " : "", 10 * i + 5, 12 * i + 3);
  synth::write_text(scene_dir / "annotation.json", json + "]}");
  EvaluateOptions options;
  options.methods = {MatchMethod::kCombined};
  const auto result = evaluate_dataset(DatasetSpec::parse("pairs:" + dir.path().string()), options,
                                       [] { return std::make_unique<FallbackBackend>(); });
  const bool substituted = result.records.size() == 1 && result.records[0].failed &&
                           result.records[0].ste == kSteMax &&
                           near(log_ste(result.records[0].ste), 23.4855, 1e-3);
  o.check(substituted, "blank pair was not scored as a failure at STE_max");
  o.detail += fmt::format("STE/point {:.3f} px ({} inliers of {} point matches, {} object matches); blank pair {}",
                          per_point, loc.inlier_count, loc.point_match_count, loc.object_match_count,
                          substituted ? "scored at STE_max" : "not substituted");
  return o;
}

Outcome evaluation_plumbing() {
  Outcome o;
  const std::vector<FramePose> poses(11);
  const auto pairs = build_pairs(poses, 5, 10);
  o.check(pairs.size() == 3 && pairs[0].index_far == 5 && pairs[1].index_far == 10 && pairs[2].index_near == 5,
          "11 identical poses did not give (0,5),(0,10),(5,10)");

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<EvalRecord> records;
  for (int i = 0; i < 400; ++i) {
    EvalRecord r;
    r.pair.gap_j = 1 + static_cast<int>(u(rng) * 10);
    r.pair.ground_truth.translation = Eigen::Vector3d(u(rng), u(rng), 10 * u(rng));
    r.failed = u(rng) < 0.15;
    r.t_err = u(rng);
    r.r_err = u(rng);
    records.push_back(r);
  }
  const auto groups = summarize_groups(records);
  o.check(groups.size() == 10, "expected 10 groups");
  for (const auto& g : groups) {
    double t = 0, r = 0, d = 0, f = 0, n = 0;
    for (const auto& rec : records) {
      if (rec.pair.gap_j != g.gap_j) continue;
      t += rec.failed ? 1.0 : rec.t_err;
      r += rec.failed ? 1.0 : rec.r_err;
      d += rec.pair.ground_truth.translation.norm();
      f += rec.failed ? 1 : 0;
      n += 1;
    }
    o.check(g.mean_t_err == t / n && g.mean_r_err == r / n && g.mean_distance == d / n &&
                g.failure_rate == f / n && g.pair_count == n,
            fmt::format("group {} differs from the naive pass", g.gap_j));
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto& g : groups) pts.push_back({g.mean_distance, g.mean_t_err});
  double n = 0, sl = 0, sll = 0, sy = 0, sly = 0;
  for (const auto& [x, y] : pts) {
    const double l = std::log(x);
    n += 1;
    sl += l;
    sll += l * l;
    sy += y;
    sly += l * y;
  }
  const double det = n * sll - sl * sl;
  const auto fit = fit_log_curve(pts);
  o.check(near(fit.a, (sy * sll - sl * sly) / det, 1e-9) && near(fit.b, (n * sly - sl * sy) / det, 1e-9),
          "log fit differs from the normal equations");
  std::vector<std::pair<double, double>> exact;
  for (double x : {0.5, 2.0, 9.0, 40.0}) exact.push_back({x, 2 + 3 * std::log(x)});
  const auto e = fit_log_curve(exact);
  o.check(near(e.a, 2, 1e-9) && near(e.b, 3, 1e-9), "exact log model not recovered");
  return o;
}

}  // namespace

int main() {
  criterion("metric_exactness", 1.0, metric_exactness);
  criterion("homography_robustness", 30.0, homography_robustness);
  criterion("pose_round_trip", 30.0, pose_round_trip);
  criterion("matcher_oracle", 10.0, matcher_oracle);
  criterion("region_guided_reduction", 0.0, region_guided_reduction);
  criterion("sift_scale_proxy", 20.0, sift_scale_proxy);
  criterion("end_to_end_fallback", 0.0, end_to_end);
  criterion("evaluation_plumbing", 0.0, evaluation_plumbing);
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
