#include "scalematch/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "scalematch/error.hpp"
#include "scalematch/evaluation.hpp"
#include "scalematch/report.hpp"
#include "scalematch/runner.hpp"

namespace scalematch {

namespace {

/// Flags shared by both subcommands, as raw strings until validated.
struct CommonFlags {
  std::string layer;
  int resolution = 0;
  std::string backend = "fallback";
  std::uint64_t seed = 0;
  double threshold = 6.0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--layer", f.layer, "ResNet-50 layer for the sidecar backend");
  cmd->add_option("--resolution", f.resolution, "crop resolution for the sidecar backend");
  cmd->add_option("--backend", f.backend, "fallback | sidecar:<command>")->capture_default_str();
  cmd->add_option("--seed", f.seed, "RANSAC seed")->capture_default_str();
  cmd->add_option("--threshold", f.threshold, "RANSAC inlier threshold in pixels")
      ->capture_default_str();
}

RunConfig make_config(const CommonFlags& f) {
  RunConfig c;
  if (!f.layer.empty()) c.layer = parse_layer(f.layer);
  if (f.resolution != 0) c.resolution = InputResolution::make(f.resolution);
  c.backend = f.backend;
  c.ransac.rng_seed = f.seed;
  c.ransac.inlier_threshold = f.threshold;
  c.validate();
  return c;
}

std::vector<MatchMethod> parse_methods(const std::vector<std::string>& names) {
  std::vector<MatchMethod> out;
  for (const auto& name : names) {
    if (name == "all") {
      out.insert(out.end(), {MatchMethod::kSiftOnly, MatchMethod::kObjectsOnly,
                             MatchMethod::kCombined});
    } else {
      out.push_back(parse_match_method(name));
    }
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write " + path.string());
}

struct LocalizeFlags {
  std::string method = "combined";
  std::string estimator = "homography";
  std::string image_a;
  std::string image_b;
  std::optional<double> fx, fy, cx, cy;
  std::string calib;
  std::string out;
};

int cmd_localize(const CommonFlags& common, const LocalizeFlags& f, std::ostream& out) {
  RunConfig config = make_config(common);
  config.method = parse_match_method(f.method);
  config.estimator = parse_estimator(f.estimator);

  std::optional<CameraIntrinsics> intrinsics;
  if (!f.calib.empty()) {
    intrinsics = parse_kitti_calib(read_text(f.calib));
  } else if (f.fx || f.fy || f.cx || f.cy) {
    if (!(f.fx && f.fy && f.cx && f.cy)) {
      throw Error(ErrorCode::kConfigError, "--fx, --fy, --cx and --cy go together");
    }
    intrinsics = CameraIntrinsics{*f.fx, *f.fy, *f.cx, *f.cy};
    try {
      intrinsics->validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }
  }
  if (config.estimator == Estimator::kEssential && !intrinsics) {
    throw Error(ErrorCode::kConfigError, "the essential estimator needs --calib or --fx/--fy/--cx/--cy");
  }

  const Image a = load_image(f.image_a);
  const Image b = load_image(f.image_b);
  std::unique_ptr<DescriptorBackend> backend;
  if (needs_objects(config.method)) backend = make_backend(config);
  const Localization result = localize_pair(a, b, config, backend.get(), intrinsics);
  const std::string doc = localization_json(result, config.estimator).dump(2) + "\n";
  if (f.out.empty()) {
    out << doc;
  } else {
    write_text(f.out, doc);
  }
  return kExitOk;
}

struct EvaluateFlags {
  std::string dataset;
  std::vector<std::string> methods{"all"};
  std::string out;
  int jobs = 1;
  int subsample = 5;
  int max_gap = 10;
  std::size_t max_pairs = 0;
};

int cmd_evaluate(const CommonFlags& common, const EvaluateFlags& f, std::ostream& out) {
  const DatasetSpec dataset = DatasetSpec::parse(f.dataset);
  EvaluateOptions options;
  options.config = make_config(common);
  options.methods = parse_methods(f.methods);
  if (f.jobs < 1 || f.subsample < 1 || f.max_gap < 1) {
    throw Error(ErrorCode::kConfigError, "--jobs, --subsample and --max-gap must be >= 1");
  }
  options.jobs = f.jobs;
  options.subsample = f.subsample;
  options.max_gap = f.max_gap;
  if (f.max_pairs > 0) options.max_pairs = f.max_pairs;

  const RunConfig config = options.config;
  const auto result =
      evaluate_dataset(dataset, options, [config] { return make_backend(config); });

  const std::filesystem::path dir = f.out;
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_results_csv(csv, result.records, dataset.mode);
  write_text(dir / "results.csv", csv.str());
  write_text(dir / "summary.json", summary_json(result.records, dataset.mode).dump(2) + "\n");
  std::ostringstream plot;
  if (dataset.mode == EvalMode::kKitti) {
    write_groups_csv(plot, result.records);
    write_text(dir / "groups.csv", plot.str());
  } else {
    write_scale_change_csv(plot, result.records, result.scale_change);
    write_text(dir / "scale_change.csv", plot.str());
  }
  out << "wrote " << result.records.size() << " records to " << dir.string() << "\n";
  return kExitOk;
}

bool is_usage_error(ErrorCode code) {
  return code == ErrorCode::kConfigError || code == ErrorCode::kInvalidArgument;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-robust metric localization from object proposals and SIFT", "scalematch"};
  app.require_subcommand(1);

  CommonFlags loc_common;
  LocalizeFlags loc;
  auto* localize_cmd = app.add_subcommand("localize", "estimate the relative pose of two images");
  add_common(localize_cmd, loc_common);
  localize_cmd->add_option("--method", loc.method, "sift_only | objects_only | combined")
      ->capture_default_str();
  localize_cmd->add_option("--estimator", loc.estimator, "homography | essential")
      ->capture_default_str();
  localize_cmd->add_option("--fx", loc.fx);
  localize_cmd->add_option("--fy", loc.fy);
  localize_cmd->add_option("--cx", loc.cx);
  localize_cmd->add_option("--cy", loc.cy);
  localize_cmd->add_option("--calib", loc.calib, "KITTI calib.txt providing P2 intrinsics");
  localize_cmd->add_option("--out", loc.out, "write the JSON result here instead of stdout");
  localize_cmd->add_option("image_a", loc.image_a)->required();
  localize_cmd->add_option("image_b", loc.image_b)->required();

  CommonFlags eval_common;
  EvaluateFlags eval;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate methods on a dataset");
  add_common(evaluate_cmd, eval_common);
  evaluate_cmd->add_option("--dataset", eval.dataset, "kitti:<root>:<seq,...> | pairs:<root>")
      ->required();
  evaluate_cmd->add_option("--method", eval.methods, "all | sift_only | objects_only | combined")
      ->delimiter(',')
      ->capture_default_str();
  evaluate_cmd->add_option("--out", eval.out, "output directory")->required();
  evaluate_cmd->add_option("--jobs", eval.jobs, "worker threads")->capture_default_str();
  evaluate_cmd->add_option("--subsample", eval.subsample, "keep every n-th KITTI frame")
      ->capture_default_str();
  evaluate_cmd->add_option("--max-gap", eval.max_gap, "largest frame gap paired")
      ->capture_default_str();
  evaluate_cmd->add_option("--max-pairs", eval.max_pairs, "limit pairs per dataset (0: all)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (localize_cmd->parsed()) return cmd_localize(loc_common, loc, out);
    return cmd_evaluate(eval_common, eval, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace scalematch
