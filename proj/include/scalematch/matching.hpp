#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "scalematch/geometry.hpp"
#include "scalematch/proposals.hpp"
#include "scalematch/sift.hpp"

namespace scalematch {

enum class Metric { kCosine, kEuclidean };

/// Which point matches feed the estimator: all SIFT features, object box
/// centers, or SIFT features restricted to matched object boxes.
enum class MatchMethod { kSiftOnly, kObjectsOnly, kCombined };

std::string_view to_string(MatchMethod method);
/// Accepts sift_only, objects_only, combined. Throws Error(kConfigError).
MatchMethod parse_match_method(std::string_view name);

struct IndexMatch {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double distance = 0.0;

  bool operator==(const IndexMatch&) const = default;
};

using ObjectMatch = IndexMatch;

/// sqrt of the sum of squared differences, accumulated in double.
double euclidean_distance(std::span<const float> a, std::span<const float> b);

/// Cross-checked nearest neighbors: (i, j) is kept iff j is the nearest of i
/// in set_b and i is the nearest of j in set_a. Ties go to the lowest index.
/// Output is sorted by index_a.
std::vector<IndexMatch> mutual_nearest_match(std::span<const std::span<const float>> set_a,
                                             std::span<const std::span<const float>> set_b,
                                             Metric metric);

/// Cosine cross-check matching of described proposals. Every proposal needs
/// a descriptor; throws Error(kLengthMismatch) or Error(kIncompatibleDescriptors).
std::vector<ObjectMatch> match_objects(const std::vector<ObjectProposal>& objs_a,
                                       const std::vector<ObjectProposal>& objs_b);

/// Euclidean cross-check matching over all SIFT features.
std::vector<PointMatch> global_sift_matches(std::span<const SiftFeature> sift_a,
                                            std::span<const SiftFeature> sift_b);

/// For each object match, cross-check matches the SIFT features inside box a
/// against those inside box b (closed boxes). The union is deduplicated; a
/// feature claimed by several object matches keeps its lowest-distance match.
/// Output is sorted by feature index in a, then b.
std::vector<PointMatch> region_guided_sift_matches(std::span<const ObjectMatch> object_matches,
                                                   const std::vector<ObjectProposal>& proposals_a,
                                                   const std::vector<ObjectProposal>& proposals_b,
                                                   std::span<const SiftFeature> sift_a,
                                                   std::span<const SiftFeature> sift_b);

/// One match per object match, between the two box centers.
std::vector<PointMatch> object_center_matches(std::span<const ObjectMatch> object_matches,
                                              const std::vector<ObjectProposal>& proposals_a,
                                              const std::vector<ObjectProposal>& proposals_b);

}  // namespace scalematch
