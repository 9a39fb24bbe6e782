#include "scalematch/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

}  // namespace


Image to_gray(const Image& rgb) {
  if (rgb.channels() == 1) return rgb;
  Image gray(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      gray.at(x, y) = 0.299F * rgb.at(x, y, 0) + 0.587F * rgb.at(x, y, 1) +
                      0.114F * rgb.at(x, y, 2);
    }
  }
  return gray;
}

float sample_bilinear(const Image& img, double x, double y, int channel) {
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0, channel) + fx * img.at(x1, y0, channel);
  const double bottom = (1.0 - fx) * img.at(x0, y1, channel) + fx * img.at(x1, y1, channel);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Image resize_bilinear(const Image& img, int width, int height) {
  Image out(width, height, img.channels());
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int v = 0; v < height; ++v) {
    const double y = (v + 0.5) * sy - 0.5;
    for (int u = 0; u < width; ++u) {
      const double x = (u + 0.5) * sx - 0.5;
      for (int c = 0; c < img.channels(); ++c) out.at(u, v, c) = sample_bilinear(img, x, y, c);
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma, int channel) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width();
  const int h = img.height();
  const int stride = img.channels();
  Image tmp(w, h, 1);
  std::vector<float> line(w + 2 * radius);
  for (int y = 0; y < h; ++y) {
    const float* src = img.row(y) + channel;
    for (int i = -radius; i < w + radius; ++i) {
      line[i + radius] = src[static_cast<std::ptrdiff_t>(reflect101(i, w)) * stride];
    }
    float* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      float acc = 0.0F;
      for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * line[x + k];
      dst[x] = acc;
    }
  }
  Image out(w, h, 1);
  std::vector<float> acc(w);
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0F);
    for (int k = -radius; k <= radius; ++k) {
      const float* src = tmp.row(reflect101(y + k, h));
      const float kv = kernel[k + radius];
      for (int x = 0; x < w; ++x) acc[x] += kv * src[x];
    }
    std::copy(acc.begin(), acc.end(), out.row(y));
  }
  return out;
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kFileNotFound, path.string());
  }
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorCode::kFileNotFound, "cannot decode " + path.string());
  }
  Image rgb(bgr.cols, bgr.rows, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* src = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      rgb.at(x, y, 0) = src[x][2] / 255.0F;
      rgb.at(x, y, 1) = src[x][1] / 255.0F;
      rgb.at(x, y, 2) = src[x][0] / 255.0F;
    }
  }
  return rgb;
}

namespace {
unsigned char quantize(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0F, 1.0F) * 255.0F));
}
}  // namespace

void save_image(const Image& img, const std::filesystem::path& path) {
  cv::Mat out;
  if (img.channels() == 1) {
    out.create(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at<unsigned char>(y, x) = quantize(img.at(x, y));
  } else {
    out.create(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        out.at<cv::Vec3b>(y, x) = {quantize(img.at(x, y, 2)), quantize(img.at(x, y, 1)),
                                   quantize(img.at(x, y, 0))};
      }
    }
  }
  if (!cv::imwrite(path.string(), out)) {
    throw Error(ErrorCode::kFileNotFound, "cannot write " + path.string());
  }
}

std::vector<unsigned char> to_rgb8(const Image& rgb) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(rgb.width()) * rgb.height() * 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        bytes.push_back(quantize(rgb.at(x, y, rgb.channels() == 3 ? c : 0)));
      }
    }
  }
  return bytes;
}

}  // namespace scalematch
