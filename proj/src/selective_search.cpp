#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <tuple>

#include "scalematch/error.hpp"
#include "scalematch/proposals.hpp"

namespace scalematch {

namespace {

constexpr int kColorBins = 25;
constexpr int kTextureOrientations = 8;
constexpr int kTextureBins = 10;
constexpr int kColorLength = 3 * kColorBins;
constexpr int kTextureLength = 3 * kTextureOrientations * kTextureBins;

struct Region {
  double size = 0.0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;
  std::vector<double> color;
  std::vector<double> texture;
  std::set<int> neighbors;
};

void rgb_to_hsv(float r, float g, float b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  double hue = 0.0;
  if (mx == r) {
    hue = (g - b) / delta;
  } else if (mx == g) {
    hue = 2.0 + (b - r) / delta;
  } else {
    hue = 4.0 + (r - g) / delta;
  }
  hue /= 6.0;
  if (hue < 0.0) hue += 1.0;
  h = hue;
}

int bin_of(double v, int bins) {
  return std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
}

// Per pixel, the 75 color-histogram bins it falls into (one per channel).
std::vector<std::array<int, 3>> color_bins(const Image& rgb) {
  std::vector<std::array<int, 3>> out(static_cast<std::size_t>(rgb.width()) * rgb.height());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const float r = rgb.at(x, y, 0);
      const float g = rgb.at(x, y, rgb.channels() == 3 ? 1 : 0);
      const float b = rgb.at(x, y, rgb.channels() == 3 ? 2 : 0);
      double hh = 0.0;
      double ss = 0.0;
      double vv = 0.0;
      rgb_to_hsv(r, g, b, hh, ss, vv);
      out[static_cast<std::size_t>(y) * rgb.width() + x] = {
          bin_of(hh, kColorBins), kColorBins + bin_of(ss, kColorBins),
          2 * kColorBins + bin_of(vv, kColorBins)};
    }
  }
  return out;
}

// Gaussian derivatives (sigma 1) of each channel projected on 8 orientations;
// the positive part is binned against the image-wide maximum of that
// (channel, orientation).
std::vector<std::array<int, 3 * kTextureOrientations>> texture_bins(const Image& rgb) {
  const int w = rgb.width();
  const int h = rgb.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::array<int, 3 * kTextureOrientations>> out(n);
  std::vector<float> response(n);
  for (int c = 0; c < 3; ++c) {
    const Image smooth = gaussian_blur(rgb, 1.0, rgb.channels() == 3 ? c : 0);
    for (int o = 0; o < kTextureOrientations; ++o) {
      const double theta = o * std::numbers::pi / 4.0;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      float max_val = 0.0F;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double gx =
              0.5 * (smooth.at(std::min(x + 1, w - 1), y) - smooth.at(std::max(x - 1, 0), y));
          const double gy =
              0.5 * (smooth.at(x, std::min(y + 1, h - 1)) - smooth.at(x, std::max(y - 1, 0)));
          const float v = static_cast<float>(std::max(0.0, gx * ct + gy * st));
          response[static_cast<std::size_t>(y) * w + x] = v;
          max_val = std::max(max_val, v);
        }
      }
      const int slot = c * kTextureOrientations + o;
      for (std::size_t i = 0; i < n; ++i) {
        const int bin = max_val > 0.0F ? bin_of(response[i] / max_val, kTextureBins) : 0;
        out[i][slot] = slot * kTextureBins + bin;
      }
    }
  }
  return out;
}

void l1_normalize(std::vector<double>& hist) {
  double sum = 0.0;
  for (double v : hist) sum += v;
  if (sum > 0.0)
    for (double& v : hist) v /= sum;
}

double intersection(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::min(a[i], b[i]);
  return sum;
}

double similarity(const Region& a, const Region& b, double image_size) {
  const double color = intersection(a.color, b.color);
  const double texture = intersection(a.texture, b.texture);
  const double size = 1.0 - (a.size + b.size) / image_size;
  const double bw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0) + 1;
  const double bh = std::max(a.y1, b.y1) - std::min(a.y0, b.y0) + 1;
  const double fill = 1.0 - (bw * bh - a.size - b.size) / image_size;
  return color + texture + size + fill;
}

BBox box_of(const Region& r) { return {double(r.x0), double(r.y0), r.x1 + 1.0, r.y1 + 1.0}; }

}  // namespace

SelectiveSearchResult selective_search_hierarchy(const Image& rgb,
                                                 const SegmentationParams& params) {
  if (rgb.width() < 32 || rgb.height() < 32) {
    throw Error(ErrorCode::kImageTooSmall, "selective search needs at least 32x32 pixels");
  }
  const LabelMap labels = graph_segment(rgb, params);
  const int w = rgb.width();
  const int h = rgb.height();
  const double image_size = static_cast<double>(w) * h;

  std::vector<Region> regions(labels.region_count);
  for (auto& r : regions) {
    r.x0 = w;
    r.y0 = h;
    r.x1 = -1;
    r.y1 = -1;
    r.color.assign(kColorLength, 0.0);
    r.texture.assign(kTextureLength, 0.0);
  }
  const auto cbins = color_bins(rgb);
  const auto tbins = texture_bins(rgb);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      Region& r = regions[labels.labels[i]];
      r.size += 1.0;
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x);
      r.y1 = std::max(r.y1, y);
      for (int b : cbins[i]) r.color[b] += 1.0;
      for (int b : tbins[i]) r.texture[b] += 1.0;
      const int l = labels.labels[i];
      const auto link = [&](int nx, int ny) {
        const int m = labels.at(nx, ny);
        if (m != l) {
          regions[l].neighbors.insert(m);
          regions[m].neighbors.insert(l);
        }
      };
      if (x + 1 < w) link(x + 1, y);
      if (y + 1 < h) link(x, y + 1);
      if (x + 1 < w && y + 1 < h) link(x + 1, y + 1);
      if (x > 0 && y + 1 < h) link(x - 1, y + 1);
    }
  }
  for (auto& r : regions) {
    l1_normalize(r.color);
    l1_normalize(r.texture);
  }

  SelectiveSearchResult result;
  result.initial_region_count = labels.region_count;

  // Ordered by descending similarity, then ascending (a, b).
  using Key = std::tuple<double, int, int>;
  std::set<Key> queue;
  std::map<std::pair<int, int>, double> score;
  const auto push = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const double s = similarity(regions[a], regions[b], image_size);
    score[{a, b}] = s;
    queue.insert({-s, a, b});
  };
  const auto drop = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const auto it = score.find({a, b});
    if (it == score.end()) return;
    queue.erase({-it->second, a, b});
    score.erase(it);
  };
  for (int a = 0; a < labels.region_count; ++a)
    for (int b : regions[a].neighbors)
      if (a < b) push(a, b);

  std::vector<BBox> boxes;
  boxes.reserve(2 * regions.size());
  for (const auto& r : regions) boxes.push_back(box_of(r));

  while (!queue.empty()) {
    const auto [neg_s, a, b] = *queue.begin();
    Region merged;
    const Region& ra = regions[a];
    const Region& rb = regions[b];
    merged.size = ra.size + rb.size;
    merged.x0 = std::min(ra.x0, rb.x0);
    merged.y0 = std::min(ra.y0, rb.y0);
    merged.x1 = std::max(ra.x1, rb.x1);
    merged.y1 = std::max(ra.y1, rb.y1);
    merged.color.resize(kColorLength);
    merged.texture.resize(kTextureLength);
    for (int i = 0; i < kColorLength; ++i)
      merged.color[i] = (ra.size * ra.color[i] + rb.size * rb.color[i]) / merged.size;
    for (int i = 0; i < kTextureLength; ++i)
      merged.texture[i] = (ra.size * ra.texture[i] + rb.size * rb.texture[i]) / merged.size;
    std::set<int> neighbors;
    for (int n : ra.neighbors)
      if (n != b) neighbors.insert(n);
    for (int n : rb.neighbors)
      if (n != a) neighbors.insert(n);

    for (int n : std::set<int>(ra.neighbors)) drop(a, n);
    for (int n : std::set<int>(rb.neighbors)) drop(b, n);
    const int id = static_cast<int>(regions.size());
    for (int n : neighbors) {
      regions[n].neighbors.erase(a);
      regions[n].neighbors.erase(b);
      regions[n].neighbors.insert(id);
    }
    merged.neighbors = neighbors;
    regions[a].neighbors.clear();
    regions[b].neighbors.clear();
    regions.push_back(std::move(merged));
    for (int n : neighbors) push(n, id);

    result.merges.push_back({a, b, id});
    boxes.push_back(box_of(regions.back()));
  }

  // Deduplicate, keeping each box at its last occurrence.
  std::vector<bool> keep(boxes.size(), true);
  std::set<std::tuple<double, double, double, double>> seen;
  for (std::size_t i = boxes.size(); i-- > 0;) {
    const auto key = std::make_tuple(boxes[i].x_min, boxes[i].y_min, boxes[i].x_max, boxes[i].y_max);
    if (!seen.insert(key).second) keep[i] = false;
  }
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (keep[i]) result.proposals.push_back({boxes[i], std::nullopt});
  return result;
}

std::vector<ObjectProposal> selective_search(const Image& rgb, const SegmentationParams& params) {
  return selective_search_hierarchy(rgb, params).proposals;
}

}  // namespace scalematch
