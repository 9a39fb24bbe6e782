#pragma once

#include <cassert>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace scalematch {

/// Row-major, channel-interleaved float image. Intensities are nominally in
/// [0, 1]; nothing enforces that range.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0F)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    assert(width >= 0 && height >= 0 && channels > 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  float* row(int y) noexcept { return data_.data() + index(0, y, 0); }
  const float* row(int y) const noexcept { return data_.data() + index(0, y, 0); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Luma conversion, 0.299 R + 0.587 G + 0.114 B. Single-channel input is
/// returned unchanged.
Image to_gray(const Image& rgb);

/// Bilinear sample with coordinates clamped to the image; pixel centers sit on
/// integer coordinates.
float sample_bilinear(const Image& img, double x, double y, int channel);

/// Bilinear resample of the full image to the given size (pixel-center
/// aligned, so an equal-size resize is an exact copy).
Image resize_bilinear(const Image& img, int width, int height);

/// Separable Gaussian blur of one channel, reflect-101 borders, kernel
/// radius ceil(4 sigma). Returns a single-channel image.
Image gaussian_blur(const Image& img, double sigma, int channel = 0);

/// Loads an 8-bit image as RGB in [0,1]. Throws Error(kFileNotFound) when the
/// file is missing or cannot be decoded.
Image load_image(const std::filesystem::path& path);

/// Writes RGB or gray [0,1] data as 8-bit; format chosen by extension.
void save_image(const Image& img, const std::filesystem::path& path);

/// Quantizes [0,1] RGB to interleaved 8-bit bytes (used by the sidecar wire format).
std::vector<unsigned char> to_rgb8(const Image& rgb);

}  // namespace scalematch
