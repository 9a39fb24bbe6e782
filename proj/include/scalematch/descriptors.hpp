#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalematch/image.hpp"

namespace scalematch {

/// ResNet-50 stage outputs that can serve as object descriptors.
enum class LayerId { kPool1, kRes2c, kRes3d, kRes4f, kRes5c, kPool5 };

inline constexpr std::array<LayerId, 6> kAllLayers{LayerId::kPool1, LayerId::kRes2c,
                                                   LayerId::kRes3d, LayerId::kRes4f,
                                                   LayerId::kRes5c, LayerId::kPool5};

std::string_view to_string(LayerId layer);
/// Throws Error(kConfigError) for unknown names.
LayerId parse_layer(std::string_view name);

/// Network input side length; only 224, 128, 64 and 32 are valid.
class InputResolution {
 public:
  /// Throws Error(kConfigError) for any other side length.
  static InputResolution make(int side);
  int side() const noexcept { return side_; }
  bool operator==(const InputResolution&) const = default;

 private:
  explicit InputResolution(int side) : side_(side) {}
  int side_;
};

/// An object descriptor. Layer and resolution are empty for the fallback
/// (non-neural) descriptor.
struct ObjectDescriptor {
  std::vector<float> values;
  std::optional<LayerId> layer;
  std::optional<InputResolution> resolution;

  bool is_fallback() const noexcept { return !layer.has_value(); }
  /// True when both descriptors come from the same layer and resolution.
  bool compatible_with(const ObjectDescriptor& other) const noexcept {
    return layer == other.layer && resolution == other.resolution;
  }
};

/// 1 - u.v / (|u| |v|), accumulated in double precision and clamped to [0, 2].
/// Throws Error(kLengthMismatch) or Error(kZeroVector).
double cosine_distance(std::span<const float> u, std::span<const float> v);
/// Also throws Error(kIncompatibleDescriptors) on a layer/resolution mismatch.
double cosine_distance(const ObjectDescriptor& u, const ObjectDescriptor& v);

/// Same arithmetic as cosine_distance with precomputed norms (as returned by
/// l2_norm), so matchers can avoid recomputing them.
double cosine_distance_with_norms(std::span<const float> u, std::span<const float> v,
                                  double norm_u, double norm_v);
double l2_norm(std::span<const float> v);

inline constexpr int kFallbackSide = 32;
inline constexpr std::size_t kFallbackLength = 3 * kFallbackSide * kFallbackSide;

/// Resizes the crop to 32x32 and concatenates the R, G and B planes (each
/// row-major) into 3072 values, then subtracts their mean.
ObjectDescriptor describe_fallback(const Image& crop);

/// Source of object descriptors for image crops.
class DescriptorBackend {
 public:
  virtual ~DescriptorBackend() = default;
  /// Side length crops are resampled to before description.
  virtual int crop_side() const = 0;
  virtual ObjectDescriptor describe(const Image& crop) = 0;
};

class FallbackBackend final : public DescriptorBackend {
 public:
  int crop_side() const override { return kFallbackSide; }
  ObjectDescriptor describe(const Image& crop) override { return describe_fallback(crop); }
};

class SidecarClient;

class SidecarBackend final : public DescriptorBackend {
 public:
  SidecarBackend(std::shared_ptr<SidecarClient> client, LayerId layer, InputResolution resolution)
      : client_(std::move(client)), layer_(layer), resolution_(resolution) {}
  int crop_side() const override { return resolution_.side(); }
  ObjectDescriptor describe(const Image& crop) override;

 private:
  std::shared_ptr<SidecarClient> client_;
  LayerId layer_;
  InputResolution resolution_;
};

}  // namespace scalematch
