#include "scalematch/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/core.h>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void layout_error(const std::string& message) {
  throw Error(ErrorCode::kDatasetLayoutError, message);
}

/// Lazily creates one backend per worker thread.
class BackendPool {
 public:
  BackendPool(const BackendFactory& factory, std::size_t workers)
      : factory_(factory), backends_(workers) {}

  DescriptorBackend* get(std::size_t worker) {
    if (!backends_[worker]) backends_[worker] = factory_();
    return backends_[worker].get();
  }

 private:
  const BackendFactory& factory_;
  std::vector<std::unique_ptr<DescriptorBackend>> backends_;
};

std::size_t worker_count(int jobs) { return static_cast<std::size_t>(std::max(jobs, 1)); }

bool any_needs(const std::vector<MatchMethod>& methods, bool (*pred)(MatchMethod)) {
  return std::any_of(methods.begin(), methods.end(), pred);
}

EvalRecord score_kitti(const PairRecord& pair, MatchMethod method, const Localization& loc) {
  EvalRecord rec;
  rec.pair = pair;
  rec.method = method;
  rec.match_count = loc.point_match_count;
  if (loc.failed || !loc.pose) {
    mark_failed(rec, EvalMode::kKitti);
    return rec;
  }
  rec.failed = false;
  rec.pose = loc.pose;
  rec.t_err = translational_error(pair.ground_truth.translation, loc.pose->translation);
  rec.r_err = rotational_error(pair.ground_truth.rotation, loc.pose->rotation);
  return rec;
}

EvalRecord score_pair(const PairRecord& pair, const PairAnnotation& annotation, MatchMethod method,
                      const Localization& loc) {
  EvalRecord rec;
  rec.pair = pair;
  rec.method = method;
  rec.match_count = loc.point_match_count;
  if (loc.failed || !loc.homography) {
    mark_failed(rec, EvalMode::kPairs);
    return rec;
  }
  try {
    rec.ste = symmetric_transfer_error(*loc.homography, annotation);
  } catch (const Error& e) {
    if (!is_localization_failure(e.code())) throw;
    mark_failed(rec, EvalMode::kPairs);
    return rec;
  }
  rec.failed = false;
  rec.homography = loc.homography;
  return rec;
}

std::vector<EvalRecord> evaluate_kitti_sequence(const std::filesystem::path& root,
                                                const std::string& seq,
                                                const EvaluateOptions& options,
                                                BackendPool& backends) {
  const auto pose_file = root / "poses" / (seq + ".txt");
  const auto seq_dir = root / "sequences" / seq;
  const auto calib_file = seq_dir / "calib.txt";
  const auto image_dir = seq_dir / "image_2";
  for (const auto& p : {pose_file, calib_file}) {
    if (!std::filesystem::is_regular_file(p)) layout_error(p.string() + " is missing");
  }
  if (!std::filesystem::is_directory(image_dir)) layout_error(image_dir.string() + " is missing");

  KittiSequence sequence;
  try {
    sequence = load_kitti_sequence(pose_file, calib_file);
  } catch (const Error& e) {
    layout_error(seq + ": " + e.what());
  }
  auto pairs = build_pairs(sequence.poses, options.subsample, options.max_gap, seq);
  if (options.max_pairs && pairs.size() > *options.max_pairs) pairs.resize(*options.max_pairs);

  const auto frame_path = [&](std::size_t index) {
    return image_dir / fmt::format("{:06d}.png", index);
  };
  for (const auto& pair : pairs) {
    for (std::size_t index : {pair.index_near, pair.index_far}) {
      if (!std::filesystem::is_regular_file(frame_path(index))) {
        layout_error(frame_path(index).string() + " is missing");
      }
    }
  }

  RunConfig config = options.config;
  config.estimator = Estimator::kEssential;
  const bool with_sift = any_needs(options.methods, needs_sift);
  const bool with_objects = any_needs(options.methods, needs_objects);
  const std::size_t n_methods = options.methods.size();

  std::vector<EvalRecord> records;
  // Pairs arrive grouped by near frame in increasing order and far > near, so
  // features of frames at or before the current near frame are never needed
  // again once that group is done.
  std::map<std::size_t, FrameFeatures> cache;
  std::size_t begin = 0;
  while (begin < pairs.size()) {
    std::size_t end = begin;
    while (end < pairs.size() && pairs[end].index_near == pairs[begin].index_near) ++end;

    std::set<std::size_t> wanted{pairs[begin].index_near};
    for (std::size_t i = begin; i < end; ++i) wanted.insert(pairs[i].index_far);
    std::vector<std::size_t> missing;
    for (std::size_t f : wanted)
      if (!cache.count(f)) missing.push_back(f);
    std::vector<FrameFeatures> fresh(missing.size());
    parallel_for(missing.size(), options.jobs, [&](std::size_t worker, std::size_t k) {
      const Image image = load_image(frame_path(missing[k]));
      fresh[k] = extract_features(image, config, with_objects ? backends.get(worker) : nullptr,
                                  with_sift, with_objects);
    });
    for (std::size_t k = 0; k < missing.size(); ++k) cache.emplace(missing[k], std::move(fresh[k]));

    std::vector<EvalRecord> group((end - begin) * n_methods);
    parallel_for(group.size(), options.jobs, [&](std::size_t, std::size_t k) {
      const PairRecord& pair = pairs[begin + k / n_methods];
      RunConfig run = config;
      run.method = options.methods[k % n_methods];
      const Localization loc =
          localize(cache.at(pair.index_near), cache.at(pair.index_far), run, sequence.intrinsics);
      group[k] = score_kitti(pair, run.method, loc);
    });
    for (auto& rec : group) records.push_back(std::move(rec));

    const std::size_t done = pairs[begin].index_near;
    cache.erase(cache.begin(), cache.upper_bound(done));
    begin = end;
  }
  return records;
}

EvaluationResult evaluate_pairs(const std::filesystem::path& root, const EvaluateOptions& options,
                                BackendPool& backends) {
  std::vector<PairAnnotation> annotations;
  try {
    annotations = load_pair_dataset(root);
  } catch (const Error& e) {
    layout_error(e.what());
  }
  if (options.max_pairs && annotations.size() > *options.max_pairs) {
    annotations.resize(*options.max_pairs);
  }
  RunConfig config = options.config;
  config.estimator = Estimator::kHomography;
  const bool with_sift = any_needs(options.methods, needs_sift);
  const bool with_objects = any_needs(options.methods, needs_objects);
  const std::size_t n_methods = options.methods.size();

  EvaluationResult result;
  for (const auto& ann : annotations) {
    try {
      result.scale_change[ann.scene] = median_scale_change(ann);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDuplicateFarPoints) throw;
    }
  }
  auto& records = result.records;
  records.resize(annotations.size() * n_methods);
  // One task per scene so both images are decoded and described once.
  parallel_for(annotations.size(), options.jobs, [&](std::size_t worker, std::size_t s) {
    const PairAnnotation& ann = annotations[s];
    DescriptorBackend* backend = with_objects ? backends.get(worker) : nullptr;
    const auto near = extract_features(load_image(ann.near_image), config, backend, with_sift,
                                       with_objects);
    const auto far =
        extract_features(load_image(ann.far_image), config, backend, with_sift, with_objects);
    PairRecord pair;
    pair.sequence = ann.scene;
    pair.index_near = 0;
    pair.index_far = 1;
    pair.gap_j = 0;
    for (std::size_t m = 0; m < n_methods; ++m) {
      RunConfig run = config;
      run.method = options.methods[m];
      records[s * n_methods + m] = score_pair(pair, ann, run.method, localize(near, far, run, {}));
    }
  });
  return result;
}

}  // namespace

DatasetSpec DatasetSpec::parse(std::string_view text) {
  DatasetSpec spec;
  if (text.rfind("pairs:", 0) == 0) {
    spec.mode = EvalMode::kPairs;
    spec.root = std::string(text.substr(6));
    if (spec.root.empty()) throw Error(ErrorCode::kConfigError, "pairs dataset needs a root");
    return spec;
  }
  if (text.rfind("kitti:", 0) == 0) {
    spec.mode = EvalMode::kKitti;
    const std::string_view rest = text.substr(6);
    const std::size_t colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
      throw Error(ErrorCode::kConfigError, "expected kitti:<root>:<seq>[,<seq>...]");
    }
    spec.root = std::string(rest.substr(0, colon));
    spec.sequences = split(rest.substr(colon + 1), ',');
    for (const auto& s : spec.sequences) {
      if (s.empty()) throw Error(ErrorCode::kConfigError, "empty sequence name");
    }
    std::sort(spec.sequences.begin(), spec.sequences.end());
    spec.sequences.erase(std::unique(spec.sequences.begin(), spec.sequences.end()),
                         spec.sequences.end());
    return spec;
  }
  throw Error(ErrorCode::kConfigError,
              "dataset must be kitti:<root>:<seqs> or pairs:<root>, got '" + std::string(text) + "'");
}

void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t worker, std::size_t index)>& fn) {
  const std::size_t workers = std::min(worker_count(jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(w, i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

EvaluationResult evaluate_dataset(const DatasetSpec& dataset, const EvaluateOptions& options,
                                  const BackendFactory& make_backend) {
  if (options.methods.empty()) throw Error(ErrorCode::kConfigError, "no methods requested");
  std::vector<MatchMethod> methods = options.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  EvaluateOptions opts = options;
  opts.methods = methods;

  BackendPool backends(make_backend, worker_count(options.jobs));
  if (dataset.mode == EvalMode::kPairs) return evaluate_pairs(dataset.root, opts, backends);

  if (dataset.sequences.empty()) throw Error(ErrorCode::kConfigError, "no KITTI sequences given");
  EvaluationResult result;
  for (const auto& seq : dataset.sequences) {
    auto part = evaluate_kitti_sequence(dataset.root, seq, opts, backends);
    result.records.insert(result.records.end(), std::make_move_iterator(part.begin()),
                          std::make_move_iterator(part.end()));
  }
  // Already in (index_near, gap_j, method) order within a sequence.
  return result;
}

}  // namespace scalematch
