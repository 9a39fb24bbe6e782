#include "scalematch/sift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <tuple>

#include <Eigen/Dense>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

constexpr int kImageBorder = 5;
constexpr int kMaxInterpSteps = 5;
constexpr int kOriHistBins = 36;
constexpr double kOriSigmaFactor = 1.5;
constexpr double kOriRadiusFactor = 3.0 * kOriSigmaFactor;
constexpr double kOriPeakRatio = 0.8;
constexpr int kDescWidth = 4;
constexpr int kDescHistBins = 8;
constexpr double kDescSizeFactor = 3.0;
constexpr float kDescMagThreshold = 0.2F;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Keeps every pixel with even coordinates, so odd-sized images downsample
// symmetrically.
Image downsample(const Image& src) {
  Image dst((src.width() + 1) / 2, (src.height() + 1) / 2, 1);
  for (int y = 0; y < dst.height(); ++y)
    for (int x = 0; x < dst.width(); ++x) dst.at(x, y) = src.at(2 * x, 2 * y);
  return dst;
}

struct Pyramid {
  int octaves = 0;
  int layers = 0;  // intervals per octave
  std::vector<std::vector<Image>> gauss;
  std::vector<std::vector<Image>> dog;
};

Pyramid build_pyramid(const Image& gray, const SiftParams& p) {
  Pyramid pyr;
  pyr.layers = p.octave_layers;
  const int min_side = std::min(gray.width(), gray.height());
  pyr.octaves = std::max(1, static_cast<int>(std::floor(std::log2(min_side))) - 3);

  const int per_octave = p.octave_layers + 3;
  std::vector<double> sig(per_octave);
  sig[0] = p.initial_sigma;
  const double k = std::pow(2.0, 1.0 / p.octave_layers);
  for (int i = 1; i < per_octave; ++i) {
    const double prev = std::pow(k, i - 1) * p.initial_sigma;
    const double total = prev * k;
    sig[i] = std::sqrt(total * total - prev * prev);
  }

  // The input is assumed to carry a blur of 0.5 already.
  const double base_sigma = std::sqrt(std::max(p.initial_sigma * p.initial_sigma - 0.25, 0.01));
  pyr.gauss.resize(pyr.octaves);
  for (int o = 0; o < pyr.octaves; ++o) {
    auto& level = pyr.gauss[o];
    level.reserve(per_octave);
    for (int i = 0; i < per_octave; ++i) {
      if (o == 0 && i == 0) {
        level.push_back(gaussian_blur(gray, base_sigma));
      } else if (i == 0) {
        level.push_back(downsample(pyr.gauss[o - 1][p.octave_layers]));
      } else {
        level.push_back(gaussian_blur(level[i - 1], sig[i]));
      }
    }
  }

  pyr.dog.resize(pyr.octaves);
  for (int o = 0; o < pyr.octaves; ++o) {
    for (int i = 0; i + 1 < per_octave; ++i) {
      const Image& a = pyr.gauss[o][i];
      const Image& b = pyr.gauss[o][i + 1];
      Image d(a.width(), a.height(), 1);
      auto dst = d.data();
      auto sa = a.data();
      auto sb = b.data();
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = sb[n] - sa[n];
      pyr.dog[o].push_back(std::move(d));
    }
  }
  return pyr;
}

bool is_extremum(const std::vector<Image>& dog, int layer, int x, int y, float val) {
  for (int l = layer - 1; l <= layer + 1; ++l) {
    const Image& img = dog[l];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (l == layer && dx == 0 && dy == 0) continue;
        const float n = img.at(x + dx, y + dy);
        if (val > 0 ? n > val : n < val) return false;
      }
    }
  }
  return true;
}

struct Refined {
  int x = 0;
  int y = 0;
  int layer = 0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  double offset_layer = 0.0;
  double response = 0.0;
};

// Quadratic fit of the DoG around a discrete extremum, followed by the
// contrast and principal-curvature tests.
std::optional<Refined> refine_extremum(const Pyramid& pyr, int octave, int layer, int x, int y,
                                       const SiftParams& p) {
  const auto& dog = pyr.dog[octave];
  const int w = dog[0].width();
  const int h = dog[0].height();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  int step = 0;
  for (; step < kMaxInterpSteps; ++step) {
    const Image& prev = dog[layer - 1];
    const Image& cur = dog[layer];
    const Image& next = dog[layer + 1];
    const double v2 = 2.0 * cur.at(x, y);
    const Eigen::Vector3d grad(0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y)),
                               0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1)),
                               0.5 * (next.at(x, y) - prev.at(x, y)));
    const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
    const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
    const double dss = next.at(x, y) + prev.at(x, y) - v2;
    const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) -
                               cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
    const double dxs = 0.25 * (next.at(x + 1, y) - next.at(x - 1, y) -
                               prev.at(x + 1, y) + prev.at(x - 1, y));
    const double dys = 0.25 * (next.at(x, y + 1) - next.at(x, y - 1) -
                               prev.at(x, y + 1) + prev.at(x, y - 1));
    Eigen::Matrix3d hess;
    hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    offset = -hess.lu().solve(grad);
    if (!offset.allFinite()) return std::nullopt;
    if (offset.cwiseAbs().maxCoeff() < 0.5) break;
    if (offset.cwiseAbs().maxCoeff() > 1e6) return std::nullopt;
    x += static_cast<int>(std::lround(offset.x()));
    y += static_cast<int>(std::lround(offset.y()));
    layer += static_cast<int>(std::lround(offset.z()));
    if (layer < 1 || layer > pyr.layers || x < kImageBorder || x >= w - kImageBorder ||
        y < kImageBorder || y >= h - kImageBorder) {
      return std::nullopt;
    }
  }
  if (step >= kMaxInterpSteps) return std::nullopt;

  const Image& prev = dog[layer - 1];
  const Image& cur = dog[layer];
  const Image& next = dog[layer + 1];
  const Eigen::Vector3d grad(0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y)),
                             0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1)),
                             0.5 * (next.at(x, y) - prev.at(x, y)));
  const double response = cur.at(x, y) + 0.5 * grad.dot(offset);
  if (std::abs(response) * p.octave_layers < p.contrast_threshold) return std::nullopt;

  const double v2 = 2.0 * cur.at(x, y);
  const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
  const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
  const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) -
                             cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  const double r = p.edge_threshold;
  if (det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det) return std::nullopt;

  return Refined{x, y, layer, offset.x(), offset.y(), offset.z(), response};
}

std::vector<double> orientation_peaks(const Image& img, int cx, int cy, double sigma_octave) {
  const int radius = static_cast<int>(std::lround(kOriRadiusFactor * sigma_octave));
  const double weight_sigma = kOriSigmaFactor * sigma_octave;
  const double expf_scale = -1.0 / (2.0 * weight_sigma * weight_sigma);
  std::array<double, kOriHistBins> raw{};
  for (int i = -radius; i <= radius; ++i) {
    const int y = cy + i;
    if (y <= 0 || y >= img.height() - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int x = cx + j;
      if (x <= 0 || x >= img.width() - 1) continue;
      const double dx = img.at(x + 1, y) - img.at(x - 1, y);
      const double dy = img.at(x, y + 1) - img.at(x, y - 1);
      const double weight = std::exp((i * i + j * j) * expf_scale);
      double angle = std::atan2(dy, dx);
      if (angle < 0.0) angle += kTwoPi;
      int bin = static_cast<int>(std::lround(angle * kOriHistBins / kTwoPi));
      if (bin >= kOriHistBins) bin -= kOriHistBins;
      raw[bin] += weight * std::hypot(dx, dy);
    }
  }
  std::array<double, kOriHistBins> hist{};
  const auto at = [&](int b) { return raw[(b + kOriHistBins) % kOriHistBins]; };
  for (int b = 0; b < kOriHistBins; ++b) {
    hist[b] = (at(b - 2) + at(b + 2)) * (1.0 / 16.0) + (at(b - 1) + at(b + 1)) * (4.0 / 16.0) +
              at(b) * (6.0 / 16.0);
  }
  const double max_val = *std::max_element(hist.begin(), hist.end());
  std::vector<double> peaks;
  if (!(max_val > 0.0)) return peaks;
  for (int b = 0; b < kOriHistBins; ++b) {
    const double left = hist[(b + kOriHistBins - 1) % kOriHistBins];
    const double right = hist[(b + 1) % kOriHistBins];
    if (hist[b] > left && hist[b] > right && hist[b] >= kOriPeakRatio * max_val) {
      double bin = b + 0.5 * (left - right) / (left - 2.0 * hist[b] + right);
      if (bin < 0.0) bin += kOriHistBins;
      if (bin >= kOriHistBins) bin -= kOriHistBins;
      double angle = bin * kTwoPi / kOriHistBins;
      if (angle >= kTwoPi) angle -= kTwoPi;
      peaks.push_back(angle);
    }
  }
  return peaks;
}

SiftDescriptor compute_descriptor(const Image& img, double px, double py, double orientation,
                                  double sigma_octave) {
  constexpr int d = kDescWidth;
  constexpr int n = kDescHistBins;
  const double cos_t = std::cos(orientation);
  const double sin_t = std::sin(orientation);
  const double bins_per_rad = n / kTwoPi;
  const double exp_scale = -1.0 / (d * d * 0.5);
  const double hist_width = kDescSizeFactor * sigma_octave;
  int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));
  radius = std::min(radius, static_cast<int>(std::hypot(img.width(), img.height())));
  const int ix = static_cast<int>(std::lround(px));
  const int iy = static_cast<int>(std::lround(py));

  std::vector<double> hist((d + 2) * (d + 2) * (n + 2), 0.0);
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      // Sample offset expressed in the keypoint frame, in histogram-cell units.
      const double c_rot = (j * cos_t + i * sin_t) / hist_width;
      const double r_rot = (-j * sin_t + i * cos_t) / hist_width;
      const double rbin = r_rot + d / 2.0 - 0.5;
      const double cbin = c_rot + d / 2.0 - 0.5;
      const int y = iy + i;
      const int x = ix + j;
      if (!(rbin > -1.0 && rbin < d && cbin > -1.0 && cbin < d && y > 0 && y < img.height() - 1 &&
            x > 0 && x < img.width() - 1)) {
        continue;
      }
      const double dx = img.at(x + 1, y) - img.at(x - 1, y);
      const double dy = img.at(x, y + 1) - img.at(x, y - 1);
      const double mag = std::hypot(dx, dy) * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
      double obin = (std::atan2(dy, dx) - orientation) * bins_per_rad;
      obin = std::fmod(obin, static_cast<double>(n));
      if (obin < 0.0) obin += n;

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0;
      const double fc = cbin - c0;
      const double fo = obin - o0;
      if (o0 >= n) o0 -= n;

      const double v_r1 = mag * fr;
      const double v_r0 = mag - v_r1;
      const double v_rc11 = v_r1 * fc;
      const double v_rc10 = v_r1 - v_rc11;
      const double v_rc01 = v_r0 * fc;
      const double v_rc00 = v_r0 - v_rc01;
      const double v_rco111 = v_rc11 * fo;
      const double v_rco110 = v_rc11 - v_rco111;
      const double v_rco101 = v_rc10 * fo;
      const double v_rco100 = v_rc10 - v_rco101;
      const double v_rco011 = v_rc01 * fo;
      const double v_rco010 = v_rc01 - v_rco011;
      const double v_rco001 = v_rc00 * fo;
      const double v_rco000 = v_rc00 - v_rco001;

      const int idx = ((r0 + 1) * (d + 2) + c0 + 1) * (n + 2) + o0;
      hist[idx] += v_rco000;
      hist[idx + 1] += v_rco001;
      hist[idx + (n + 2)] += v_rco010;
      hist[idx + (n + 3)] += v_rco011;
      hist[idx + (d + 2) * (n + 2)] += v_rco100;
      hist[idx + (d + 2) * (n + 2) + 1] += v_rco101;
      hist[idx + (d + 3) * (n + 2)] += v_rco110;
      hist[idx + (d + 3) * (n + 2) + 1] += v_rco111;
    }
  }

  SiftDescriptor out{};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int idx = ((i + 1) * (d + 2) + (j + 1)) * (n + 2);
      hist[idx] += hist[idx + n];
      hist[idx + 1] += hist[idx + n + 1];
      for (int k = 0; k < n; ++k) out[(i * d + j) * n + k] = static_cast<float>(hist[idx + k]);
    }
  }
  normalize_sift_descriptor(out);
  return out;
}

}  // namespace

void SiftParams::validate() const {
  if (octave_layers < 1) throw Error(ErrorCode::kInvalidArgument, "octave_layers < 1");
  if (!(initial_sigma > 0.0) || !(edge_threshold > 0.0) || !(contrast_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "SIFT parameters must be positive");
  }
}

void normalize_sift_descriptor(std::span<float, kSiftDescriptorSize> descriptor) {
  double norm2 = 0.0;
  for (float v : descriptor) norm2 += static_cast<double>(v) * v;
  if (!(norm2 > 0.0)) return;
  const double inv = 1.0 / std::sqrt(norm2);
  norm2 = 0.0;
  for (float& v : descriptor) {
    v = std::min(static_cast<float>(v * inv), kDescMagThreshold);
    norm2 += static_cast<double>(v) * v;
  }
  const double inv2 = 1.0 / std::sqrt(norm2);
  for (float& v : descriptor) v = static_cast<float>(v * inv2);
}

std::vector<SiftFeature> detect_and_describe(const Image& image, const SiftParams& params) {
  params.validate();
  if (image.width() < 16 || image.height() < 16) {
    throw Error(ErrorCode::kImageTooSmall, "SIFT needs at least 16x16 pixels");
  }
  const Image gray = to_gray(image);
  const Pyramid pyr = build_pyramid(gray, params);
  const float prelim = static_cast<float>(0.5 * params.contrast_threshold / params.octave_layers);

  std::vector<SiftFeature> features;
  for (int o = 0; o < pyr.octaves; ++o) {
    const auto& dog = pyr.dog[o];
    const int w = dog[0].width();
    const int h = dog[0].height();
    const double octave_scale = std::ldexp(1.0, o);
    for (int layer = 1; layer <= params.octave_layers; ++layer) {
      for (int y = kImageBorder; y < h - kImageBorder; ++y) {
        for (int x = kImageBorder; x < w - kImageBorder; ++x) {
          const float val = dog[layer].at(x, y);
          if (std::abs(val) <= prelim || !is_extremum(dog, layer, x, y, val)) continue;
          const auto refined = refine_extremum(pyr, o, layer, x, y, params);
          if (!refined) continue;
          const double sigma_octave =
              params.initial_sigma *
              std::pow(2.0, (refined->layer + refined->offset_layer) / params.octave_layers);
          const Image& smooth = pyr.gauss[o][refined->layer];
          const double px = refined->x + refined->offset_x;
          const double py = refined->y + refined->offset_y;
          for (double angle : orientation_peaks(smooth, refined->x, refined->y, sigma_octave)) {
            SiftFeature f;
            f.location = {px * octave_scale, py * octave_scale};
            f.scale = sigma_octave * octave_scale;
            f.orientation = angle;
            f.octave = o;
            f.response = refined->response;
            f.descriptor = compute_descriptor(smooth, px, py, angle, sigma_octave);
            features.push_back(f);
          }
        }
      }
    }
  }
  std::sort(features.begin(), features.end(), [](const SiftFeature& a, const SiftFeature& b) {
    return std::tie(a.octave, a.scale, a.location.y, a.location.x, a.orientation) <
           std::tie(b.octave, b.scale, b.location.y, b.location.x, b.orientation);
  });
  // A refinement step can land two discrete extrema on the same point.
  features.erase(std::unique(features.begin(), features.end(),
                             [](const SiftFeature& a, const SiftFeature& b) {
                               return a.octave == b.octave && a.scale == b.scale &&
                                      a.location == b.location && a.orientation == b.orientation;
                             }),
                 features.end());
  return features;
}

}  // namespace scalematch
