#include "scalematch/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scalematch/error.hpp"
#include "scalematch/sidecar.hpp"

namespace scalematch {

std::string_view to_string(LayerId layer) {
  switch (layer) {
    case LayerId::kPool1: return "pool1";
    case LayerId::kRes2c: return "res2c";
    case LayerId::kRes3d: return "res3d";
    case LayerId::kRes4f: return "res4f";
    case LayerId::kRes5c: return "res5c";
    case LayerId::kPool5: return "pool5";
  }
  return "unknown";
}

LayerId parse_layer(std::string_view name) {
  for (LayerId layer : kAllLayers) {
    if (to_string(layer) == name) return layer;
  }
  throw Error(ErrorCode::kConfigError, "unknown layer '" + std::string(name) + "'");
}

InputResolution InputResolution::make(int side) {
  if (side != 224 && side != 128 && side != 64 && side != 32) {
    throw Error(ErrorCode::kConfigError,
                "input resolution must be one of 224, 128, 64, 32; got " + std::to_string(side));
  }
  return InputResolution(side);
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

double cosine_distance_with_norms(std::span<const float> u, std::span<const float> v,
                                  double norm_u, double norm_v) {
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += static_cast<double>(u[i]) * v[i];
  return std::clamp(1.0 - dot / (norm_u * norm_v), 0.0, 2.0);
}

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(u.size()) + " vs " +
                                                std::to_string(v.size()));
  }
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return cosine_distance_with_norms(u, v, nu, nv);
}

double cosine_distance(const ObjectDescriptor& u, const ObjectDescriptor& v) {
  if (!u.compatible_with(v)) {
    throw Error(ErrorCode::kIncompatibleDescriptors,
                "descriptors come from different layers or resolutions");
  }
  return cosine_distance(u.values, v.values);
}

ObjectDescriptor describe_fallback(const Image& crop) {
  if (crop.empty()) throw Error(ErrorCode::kInvalidArgument, "empty crop");
  const Image small = (crop.width() == kFallbackSide && crop.height() == kFallbackSide)
                          ? crop
                          : resize_bilinear(crop, kFallbackSide, kFallbackSide);
  ObjectDescriptor desc;
  desc.values.reserve(kFallbackLength);
  for (int c = 0; c < 3; ++c) {
    const int src_c = small.channels() == 3 ? c : 0;
    for (int y = 0; y < kFallbackSide; ++y)
      for (int x = 0; x < kFallbackSide; ++x) desc.values.push_back(small.at(x, y, src_c));
  }
  const double mean =
      std::accumulate(desc.values.begin(), desc.values.end(), 0.0) / desc.values.size();
  // Carry each entry's float rounding error into the next one so the stored
  // values still sum to zero within a single rounding step.
  double carry = 0.0;
  for (float& v : desc.values) {
    const double exact = (static_cast<double>(v) - mean) + carry;
    v = static_cast<float>(exact);
    carry = exact - v;
  }
  return desc;
}

ObjectDescriptor SidecarBackend::describe(const Image& crop) {
  Activation act = client_->request(crop, layer_, resolution_);
  ObjectDescriptor desc;
  desc.values = std::move(act.values);
  desc.layer = layer_;
  desc.resolution = resolution_;
  return desc;
}

}  // namespace scalematch
