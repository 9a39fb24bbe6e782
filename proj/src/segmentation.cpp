#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalematch/error.hpp"
#include "scalematch/proposals.hpp"

namespace scalematch {

namespace {

struct Edge {
  int a;
  int b;
  float w;
};

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<int> size_;
};

}  // namespace

void SegmentationParams::validate() const {
  if (!(k > 0.0) || !(smoothing_sigma > 0.0) || min_region <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "segmentation parameters must be positive");
  }
}

LabelMap graph_segment(const Image& rgb, const SegmentationParams& params) {
  params.validate();
  if (rgb.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image");
  const int w = rgb.width();
  const int h = rgb.height();
  const int channels = rgb.channels();

  std::vector<Image> smooth;
  for (int c = 0; c < channels; ++c) smooth.push_back(gaussian_blur(rgb, params.smoothing_sigma, c));

  const auto diff = [&](int x1, int y1, int x2, int y2) {
    double sum = 0.0;
    for (const Image& ch : smooth) {
      const double d = 255.0 * (ch.at(x1, y1) - ch.at(x2, y2));
      sum += d * d;
    }
    return static_cast<float>(std::sqrt(sum));
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(w) * h * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = y * w + x;
      if (x + 1 < w) edges.push_back({id, id + 1, diff(x, y, x + 1, y)});
      if (y + 1 < h) edges.push_back({id, id + w, diff(x, y, x, y + 1)});
      if (x + 1 < w && y + 1 < h) edges.push_back({id, id + w + 1, diff(x, y, x + 1, y + 1)});
      if (x + 1 < w && y > 0) edges.push_back({id, id - w + 1, diff(x, y, x + 1, y - 1)});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.w < b.w; });

  const int n = w * h;
  DisjointSet sets(n);
  // threshold[root] = Int(C) + k / |C|
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    const int a = sets.find(e.a);
    const int b = sets.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[a] && e.w <= threshold[b]) {
      const int root = sets.join(a, b);
      threshold[root] = e.w + params.k / sets.size(root);
    }
  }
  for (const Edge& e : edges) {
    const int a = sets.find(e.a);
    const int b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_region || sets.size(b) < params.min_region)) {
      sets.join(a, b);
    }
  }

  LabelMap map;
  map.width = w;
  map.height = h;
  map.labels.assign(n, -1);
  std::vector<int> root_label(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = sets.find(i);
    if (root_label[root] < 0) root_label[root] = map.region_count++;
    map.labels[i] = root_label[root];
  }
  return map;
}

}  // namespace scalematch
