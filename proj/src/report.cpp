#include "scalematch/report.hpp"

#include <vector>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

std::string number(double v) { return fmt::format("{}", v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::map<MatchMethod, std::vector<EvalRecord>> by_method(std::span<const EvalRecord> records) {
  std::map<MatchMethod, std::vector<EvalRecord>> out;
  for (const auto& r : records) out[r.method].push_back(r);
  return out;
}

nlohmann::json curve_or_null(const std::vector<GroupSummary>& groups,
                             double (*value)(const GroupSummary&)) {
  std::vector<std::pair<double, double>> points;
  for (const auto& g : groups) points.emplace_back(g.mean_distance, value(g));
  try {
    const LogCurve c = fit_log_curve(points);
    return {{"a", c.a}, {"b", c.b}};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateX && e.code() != ErrorCode::kInvalidArgument) throw;
    return nullptr;
  }
}

nlohmann::json matrix_json(const Eigen::Matrix3d& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const EvalRecord> records, EvalMode mode) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    const bool kitti = mode == EvalMode::kKitti;
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(r.pair.sequence),
               r.pair.index_near, r.pair.index_far, r.pair.gap_j, to_string(r.method),
               kitti ? number(r.t_err) : "", kitti ? number(r.r_err) : "",
               !kitti && r.ste ? number(*r.ste) : "", kitti ? "" : number(log_ste(r.ste)),
               r.failed ? 1 : 0, r.match_count);
  }
}

void write_groups_csv(std::ostream& out, std::span<const EvalRecord> records) {
  out << "method,gap,mean_distance,mean_t_err,mean_r_err,failure_rate,pair_count\n";
  for (const auto& [method, recs] : by_method(records)) {
    for (const auto& g : summarize_groups(recs)) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", to_string(method), g.gap_j,
                 number(g.mean_distance), number(g.mean_t_err), number(g.mean_r_err),
                 number(g.failure_rate), g.pair_count);
    }
  }
}

void write_scale_change_csv(std::ostream& out, std::span<const EvalRecord> records,
                            const std::map<std::string, double>& scale_change) {
  out << "scene,method,scale_change,log_ste,failed\n";
  for (const auto& r : records) {
    const auto it = scale_change.find(r.pair.sequence);
    fmt::print(out, "{},{},{},{},{}\n", csv_field(r.pair.sequence), to_string(r.method),
               it == scale_change.end() ? "" : number(it->second), number(log_ste(r.ste)),
               r.failed ? 1 : 0);
  }
}

nlohmann::json summary_json(std::span<const EvalRecord> records, EvalMode mode) {
  nlohmann::json doc = nlohmann::json::object();
  doc["mode"] = mode == EvalMode::kKitti ? "kitti" : "pairs";
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [method, recs] : by_method(records)) {
    nlohmann::json m;
    if (mode == EvalMode::kKitti) {
      const auto groups = summarize_groups(recs);
      nlohmann::json g = nlohmann::json::array();
      for (const auto& s : groups) {
        g.push_back({{"gap", s.gap_j},
                     {"mean_distance", s.mean_distance},
                     {"mean_t_err", s.mean_t_err},
                     {"mean_r_err", s.mean_r_err},
                     {"failure_rate", s.failure_rate},
                     {"pair_count", s.pair_count}});
      }
      m["groups"] = g;
      m["curves"] = {
          {"t_err", curve_or_null(groups, [](const GroupSummary& s) { return s.mean_t_err; })},
          {"r_err", curve_or_null(groups, [](const GroupSummary& s) { return s.mean_r_err; })},
          {"failure_rate",
           curve_or_null(groups, [](const GroupSummary& s) { return s.failure_rate; })}};
    } else {
      double total = 0.0;
      std::size_t failures = 0;
      for (const auto& r : recs) {
        total += log_ste(r.ste);
        if (r.failed) ++failures;
      }
      m["pair_count"] = recs.size();
      m["failures"] = failures;
      m["mean_log_ste"] = recs.empty() ? 0.0 : total / static_cast<double>(recs.size());
    }
    methods[std::string(to_string(method))] = m;
  }
  doc["methods"] = methods;
  return doc;
}

nlohmann::json localization_json(const Localization& result, Estimator estimator) {
  nlohmann::json doc;
  nlohmann::json estimate = nullptr;
  if (!result.failed) {
    if (estimator == Estimator::kHomography && result.homography) {
      estimate = {{"type", "homography"}, {"h", matrix_json(result.homography->matrix())}};
    } else if (result.pose) {
      const auto& q = result.pose->rotation;
      const auto& t = result.pose->translation;
      estimate = {{"type", "pose"},
                  {"rotation", {{"w", q.w}, {"x", q.x}, {"y", q.y}, {"z", q.z}}},
                  {"translation", {t.x(), t.y(), t.z()}}};
      if (result.essential) estimate["e"] = matrix_json(result.essential->matrix());
    }
  }
  doc["estimate"] = estimate;
  doc["inlier_count"] = result.inlier_count;
  doc["object_match_count"] = result.object_match_count;
  doc["point_match_count"] = result.point_match_count;
  doc["failed"] = result.failed;
  if (result.failed) doc["failure_reason"] = result.failure_reason;
  doc["timings_ms"] = result.timings_ms;
  return doc;
}

}  // namespace scalematch
