#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalematch/evaluation.hpp"
#include "scalematch/pipeline.hpp"

namespace scalematch {

/// `kitti:<root>:<seq>[,<seq>...]` or `pairs:<root>`.
struct DatasetSpec {
  EvalMode mode = EvalMode::kPairs;
  std::filesystem::path root;
  std::vector<std::string> sequences;

  static DatasetSpec parse(std::string_view text);
};

struct EvaluateOptions {
  RunConfig config;  ///< config.method is ignored; `methods` are run instead
  std::vector<MatchMethod> methods{MatchMethod::kSiftOnly, MatchMethod::kObjectsOnly,
                                   MatchMethod::kCombined};
  int jobs = 1;
  int subsample = 5;
  int max_gap = 10;
  std::optional<std::size_t> max_pairs;  ///< per dataset, after pair generation
};

using BackendFactory = std::function<std::unique_ptr<DescriptorBackend>()>;

/// Runs fn(worker, index) for index in [0, count) on up to `jobs` threads.
/// Rethrows the first exception after all workers stop.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t worker, std::size_t index)>& fn);

struct EvaluationResult {
  std::vector<EvalRecord> records;
  /// Pair mode: median annotated scale change per scene (scenes whose far
  /// points coincide are left out).
  std::map<std::string, double> scale_change;
};

/// Evaluates every generated pair with every method. KITTI uses the
/// essential estimator; the pair dataset uses the homography estimator.
/// Records come back ordered by (sequence, index_near, gap_j, method)
/// regardless of `jobs`. Layout problems throw Error(kDatasetLayoutError).
EvaluationResult evaluate_dataset(const DatasetSpec& dataset, const EvaluateOptions& options,
                                         const BackendFactory& make_backend);

}  // namespace scalematch
