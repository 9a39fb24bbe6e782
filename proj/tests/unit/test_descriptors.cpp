#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "scalematch/descriptors.hpp"
#include "scalematch/error.hpp"
#include "scenes.hpp"

using namespace scalematch;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n, float lo = -1, float hi = 1) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Image random_crop(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  Image img(w, h, 3);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

}  // namespace

TEST(Cosine, AnalyticValues) {
  const std::vector<float> a{1, 2, 3};
  EXPECT_NEAR(cosine_distance(a, a), 0.0, 1e-9);
  EXPECT_NEAR(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 1.0, 1e-9);
  EXPECT_NEAR(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{1, 1}),
              1.0 - 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{-3, 0}), 2.0, 1e-9);
}

TEST(Cosine, Errors) {
  EXPECT_EQ(code_of([] { cosine_distance(std::vector<float>{0, 0}, std::vector<float>{1, 0}); }),
            ErrorCode::kZeroVector);
  EXPECT_EQ(code_of([] { cosine_distance(std::vector<float>{1, 0}, std::vector<float>{1, 0, 0}); }),
            ErrorCode::kLengthMismatch);
  ObjectDescriptor fallback{{1, 2}, std::nullopt, std::nullopt};
  ObjectDescriptor neural{{1, 2}, LayerId::kRes5c, InputResolution::make(224)};
  EXPECT_EQ(code_of([&] { cosine_distance(fallback, neural); }), ErrorCode::kIncompatibleDescriptors);
  ObjectDescriptor other_res{{1, 2}, LayerId::kRes5c, InputResolution::make(128)};
  EXPECT_EQ(code_of([&] { cosine_distance(neural, other_res); }), ErrorCode::kIncompatibleDescriptors);
  EXPECT_NEAR(cosine_distance(neural, neural), 0.0, 1e-12);
}

TEST(Cosine, PropertiesOnRandomVectors) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + i % 300;
    const auto u = random_vec(rng, n);
    const auto v = random_vec(rng, n);
    const double d = cosine_distance(u, v);
    EXPECT_EQ(d, cosine_distance(v, u));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    // Oracle in long double.
    long double dot = 0, nu = 0, nv = 0;
    for (std::size_t k = 0; k < n; ++k) {
      dot += static_cast<long double>(u[k]) * v[k];
      nu += static_cast<long double>(u[k]) * u[k];
      nv += static_cast<long double>(v[k]) * v[k];
    }
    EXPECT_NEAR(d, static_cast<double>(1 - dot / std::sqrt(nu * nv)), 1e-12);
    auto scaled = u;
    for (auto& x : scaled) x *= 4.0f;  // exact in binary floating point
    EXPECT_NEAR(cosine_distance(u, scaled), 0.0, 1e-12);
    const auto pu = random_vec(rng, n, 0, 1);
    const auto pv = random_vec(rng, n, 0, 1);
    EXPECT_LE(cosine_distance(pu, pv), 1.0);
  }
}

TEST(Layers, NamesRoundTrip) {
  for (LayerId l : kAllLayers) EXPECT_EQ(parse_layer(to_string(l)), l);
  EXPECT_EQ(code_of([] { parse_layer("res9z"); }), ErrorCode::kConfigError);
  for (int side : {224, 128, 64, 32}) EXPECT_EQ(InputResolution::make(side).side(), side);
  for (int side : {0, 31, 100, 256}) {
    EXPECT_EQ(code_of([&] { InputResolution::make(side); }), ErrorCode::kConfigError);
  }
}

TEST(Fallback, ConstantCropIsZero) {
  const auto d = describe_fallback(synth::constant_image(17, 40, 3, 0.5f));
  ASSERT_EQ(d.values.size(), kFallbackLength);
  for (float v : d.values) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(d.is_fallback());
}

TEST(Fallback, Deterministic) {
  const Image crop = random_crop(45, 37, 2);
  EXPECT_EQ(describe_fallback(crop).values, describe_fallback(crop).values);
}

TEST(Fallback, NativeSizeIsMeanSubtractedPlanes) {
  const Image crop = random_crop(32, 32, 3);
  double mean = 0;
  for (float v : crop.data()) mean += v;
  mean /= crop.data().size();
  const auto d = describe_fallback(crop);
  ASSERT_EQ(d.values.size(), 3072U);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        EXPECT_NEAR(d.values[c * 1024 + y * 32 + x], crop.at(x, y, c) - mean, 1e-6);
}

TEST(Fallback, LengthAndZeroSum) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Image crop = random_crop(8 + static_cast<int>(seed) * 5, 70 - static_cast<int>(seed), seed);
    const auto d = describe_fallback(crop);
    ASSERT_EQ(d.values.size(), kFallbackLength);
    const double sum = std::accumulate(d.values.begin(), d.values.end(), 0.0);
    EXPECT_NEAR(sum, 0.0, 1e-6) << "seed " << seed;
  }
}

TEST(FallbackBackend, CropsAtNativeSide) {
  FallbackBackend backend;
  EXPECT_EQ(backend.crop_side(), kFallbackSide);
  const Image crop = random_crop(32, 32, 9);
  EXPECT_EQ(backend.describe(crop).values, describe_fallback(crop).values);
}
