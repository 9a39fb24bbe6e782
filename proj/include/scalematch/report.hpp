#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "scalematch/evaluation.hpp"
#include "scalematch/pipeline.hpp"

namespace scalematch {

inline constexpr const char* kResultsHeader =
    "sequence,near,far,gap,method,t_err,r_err,ste,log_ste,failed,match_count";

/// One row per record. Columns that do not apply to `mode` are left empty:
/// KITTI rows have no STE, pair rows have no pose errors.
void write_results_csv(std::ostream& out, std::span<const EvalRecord> records, EvalMode mode);

/// Plot data: one row per (method, gap) with the group means.
void write_groups_csv(std::ostream& out, std::span<const EvalRecord> records);

/// Plot data: one row per (scene, method) with its scale change and log STE.
void write_scale_change_csv(std::ostream& out, std::span<const EvalRecord> records,
                            const std::map<std::string, double>& scale_change);

/// KITTI: per method, the per-gap summaries and log curves fitted to
/// (mean_distance, mean_t_err / mean_r_err / failure_rate). A curve that
/// cannot be fitted is null. Pairs: per method, mean log STE and counts.
nlohmann::json summary_json(std::span<const EvalRecord> records, EvalMode mode);

nlohmann::json localization_json(const Localization& result, Estimator estimator);

}  // namespace scalematch
