#include "scalematch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

template <typename Distance>
std::vector<IndexMatch> cross_check(std::size_t na, std::size_t nb, Distance dist) {
  std::vector<double> row_best(na, std::numeric_limits<double>::infinity());
  std::vector<double> col_best(nb, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> row_arg(na, kNone);
  std::vector<std::size_t> col_arg(nb, kNone);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = dist(i, j);
      if (d < row_best[i]) {
        row_best[i] = d;
        row_arg[i] = j;
      }
      if (d < col_best[j]) {
        col_best[j] = d;
        col_arg[j] = i;
      }
    }
  }
  std::vector<IndexMatch> out;
  for (std::size_t i = 0; i < na; ++i) {
    const std::size_t j = row_arg[i];
    if (j != kNone && col_arg[j] == i) out.push_back({i, j, row_best[i]});
  }
  return out;
}

std::vector<std::span<const float>> descriptor_views(std::span<const SiftFeature> features) {
  std::vector<std::span<const float>> views;
  views.reserve(features.size());
  for (const auto& f : features) views.emplace_back(f.descriptor);
  return views;
}

}  // namespace

std::string_view to_string(MatchMethod method) {
  switch (method) {
    case MatchMethod::kSiftOnly: return "sift_only";
    case MatchMethod::kObjectsOnly: return "objects_only";
    case MatchMethod::kCombined: return "combined";
  }
  return "unknown";
}

MatchMethod parse_match_method(std::string_view name) {
  for (auto m : {MatchMethod::kSiftOnly, MatchMethod::kObjectsOnly, MatchMethod::kCombined}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::kConfigError, "unknown match method '" + std::string(name) + "'");
}

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kLengthMismatch, "descriptor lengths differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<IndexMatch> mutual_nearest_match(std::span<const std::span<const float>> set_a,
                                             std::span<const std::span<const float>> set_b,
                                             Metric metric) {
  if (set_a.empty() || set_b.empty()) return {};
  const std::size_t dim = set_a.front().size();
  for (const auto& v : set_a)
    if (v.size() != dim) throw Error(ErrorCode::kLengthMismatch, "descriptor lengths differ");
  for (const auto& v : set_b)
    if (v.size() != dim) throw Error(ErrorCode::kLengthMismatch, "descriptor lengths differ");

  if (metric == Metric::kEuclidean) {
    return cross_check(set_a.size(), set_b.size(), [&](std::size_t i, std::size_t j) {
      return euclidean_distance(set_a[i], set_b[j]);
    });
  }
  std::vector<double> norm_a;
  std::vector<double> norm_b;
  for (const auto& v : set_a) norm_a.push_back(l2_norm(v));
  for (const auto& v : set_b) norm_b.push_back(l2_norm(v));
  for (double n : norm_a)
    if (!(n > 0.0)) throw Error(ErrorCode::kZeroVector, "zero descriptor in set a");
  for (double n : norm_b)
    if (!(n > 0.0)) throw Error(ErrorCode::kZeroVector, "zero descriptor in set b");
  return cross_check(set_a.size(), set_b.size(), [&](std::size_t i, std::size_t j) {
    return cosine_distance_with_norms(set_a[i], set_b[j], norm_a[i], norm_b[j]);
  });
}

std::vector<ObjectMatch> match_objects(const std::vector<ObjectProposal>& objs_a,
                                       const std::vector<ObjectProposal>& objs_b) {
  if (objs_a.empty() || objs_b.empty()) return {};
  std::vector<std::span<const float>> va;
  std::vector<std::span<const float>> vb;
  const ObjectDescriptor* reference = nullptr;
  for (int side = 0; side < 2; ++side) {
    for (const auto& p : side == 0 ? objs_a : objs_b) {
      if (!p.descriptor) throw Error(ErrorCode::kInvalidArgument, "proposal without descriptor");
      if (reference == nullptr) {
        reference = &*p.descriptor;
      } else if (!reference->compatible_with(*p.descriptor)) {
        throw Error(ErrorCode::kIncompatibleDescriptors,
                    "proposals described with different layers or resolutions");
      }
      (side == 0 ? va : vb).emplace_back(p.descriptor->values);
    }
  }
  return mutual_nearest_match(va, vb, Metric::kCosine);
}

std::vector<PointMatch> global_sift_matches(std::span<const SiftFeature> sift_a,
                                            std::span<const SiftFeature> sift_b) {
  const auto va = descriptor_views(sift_a);
  const auto vb = descriptor_views(sift_b);
  std::vector<PointMatch> out;
  for (const auto& m : mutual_nearest_match(va, vb, Metric::kEuclidean)) {
    out.push_back({sift_a[m.index_a].location, sift_b[m.index_b].location, m.distance});
  }
  return out;
}

std::vector<PointMatch> region_guided_sift_matches(std::span<const ObjectMatch> object_matches,
                                                   const std::vector<ObjectProposal>& proposals_a,
                                                   const std::vector<ObjectProposal>& proposals_b,
                                                   std::span<const SiftFeature> sift_a,
                                                   std::span<const SiftFeature> sift_b) {
  std::vector<IndexMatch> candidates;
  for (const auto& om : object_matches) {
    const BBox& box_a = proposals_a.at(om.index_a).bbox;
    const BBox& box_b = proposals_b.at(om.index_b).bbox;
    std::vector<std::size_t> ia;
    std::vector<std::size_t> ib;
    for (std::size_t i = 0; i < sift_a.size(); ++i)
      if (box_a.contains(sift_a[i].location)) ia.push_back(i);
    for (std::size_t j = 0; j < sift_b.size(); ++j)
      if (box_b.contains(sift_b[j].location)) ib.push_back(j);
    std::vector<std::span<const float>> va;
    std::vector<std::span<const float>> vb;
    for (std::size_t i : ia) va.emplace_back(sift_a[i].descriptor);
    for (std::size_t j : ib) vb.emplace_back(sift_b[j].descriptor);
    for (const auto& m : mutual_nearest_match(va, vb, Metric::kEuclidean)) {
      candidates.push_back({ia[m.index_a], ib[m.index_b], m.distance});
    }
  }

  // Cheapest first; identical pairs collapse and each feature is claimed once.
  std::sort(candidates.begin(), candidates.end(), [](const IndexMatch& x, const IndexMatch& y) {
    return std::tie(x.distance, x.index_a, x.index_b) < std::tie(y.distance, y.index_a, y.index_b);
  });
  std::vector<bool> used_a(sift_a.size(), false);
  std::vector<bool> used_b(sift_b.size(), false);
  std::vector<IndexMatch> accepted;
  for (const auto& c : candidates) {
    if (used_a[c.index_a] || used_b[c.index_b]) continue;
    used_a[c.index_a] = true;
    used_b[c.index_b] = true;
    accepted.push_back(c);
  }
  std::sort(accepted.begin(), accepted.end(), [](const IndexMatch& x, const IndexMatch& y) {
    return std::tie(x.index_a, x.index_b) < std::tie(y.index_a, y.index_b);
  });
  std::vector<PointMatch> out;
  out.reserve(accepted.size());
  for (const auto& m : accepted) {
    out.push_back({sift_a[m.index_a].location, sift_b[m.index_b].location, m.distance});
  }
  return out;
}

std::vector<PointMatch> object_center_matches(std::span<const ObjectMatch> object_matches,
                                              const std::vector<ObjectProposal>& proposals_a,
                                              const std::vector<ObjectProposal>& proposals_b) {
  std::vector<PointMatch> out;
  out.reserve(object_matches.size());
  for (const auto& om : object_matches) {
    out.push_back({proposals_a.at(om.index_a).bbox.center(), proposals_b.at(om.index_b).bbox.center(),
                   om.distance});
  }
  return out;
}

}  // namespace scalematch
