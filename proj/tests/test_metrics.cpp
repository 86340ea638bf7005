#include <gtest/gtest.h>

#include <cmath>

#include "discmed/metrics.hpp"
#include "discmed/rng.hpp"
#include "oracles.hpp"

using namespace discmed;

namespace {

LabelVolume random_labels(std::uint64_t seed, Dims n, int classes) {
  const rng::Stream r(seed);
  LabelVolume l{Grid3<std::uint8_t>(n), classes};
  for (std::size_t i = 0; i < n.size(); ++i) l.labels[i] = std::uint8_t(r.bits(i) % classes);
  return l;
}

Grid3<std::uint8_t> box(Dims n, std::array<std::size_t, 3> lo, std::array<std::size_t, 3> hi) {
  Grid3<std::uint8_t> m(n);
  for (std::size_t z = lo[0]; z < hi[0]; ++z)
    for (std::size_t y = lo[1]; y < hi[1]; ++y)
      for (std::size_t x = lo[2]; x < hi[2]; ++x) m(z, y, x) = 1;
  return m;
}

}  // namespace

TEST(Confusion, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_labels(seed, {5, 6, 7}, 4), b = random_labels(seed + 50, {5, 6, 7}, 4);
    const auto k = confusion(a, b, 4);
    const auto o = oracle::tally(a.labels, b.labels, 4);
    EXPECT_EQ(k.tp, o.tp);
    EXPECT_EQ(k.fp, o.fp);
    EXPECT_EQ(k.fn, o.fn);
  }
}

TEST(Dice, HandValuesAndIdentity) {
  LabelVolume gt{Grid3<std::uint8_t>({1, 1, 4}, std::vector<std::uint8_t>{1, 1, 0, 0}), 2};
  LabelVolume pr{Grid3<std::uint8_t>({1, 1, 4}, std::vector<std::uint8_t>{1, 0, 1, 0}), 2};
  const auto k = confusion(pr, gt, 2);
  EXPECT_DOUBLE_EQ(*dice(k, 1), 0.5);
  EXPECT_DOUBLE_EQ(*iou(k, 1), 1.0 / 3.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_labels(seed, {4, 4, 4}, 3), b = random_labels(seed + 9, {4, 4, 4}, 3);
    const auto kk = confusion(a, b, 3);
    for (int c = 0; c < 3; ++c) {
      const double i = *iou(kk, c);
      EXPECT_NEAR(*dice(kk, c), 2 * i / (1 + i), 1e-15);
    }
  }
}

TEST(Dice, AbsentClassIsFailNotZero) {
  LabelVolume a{Grid3<std::uint8_t>({2, 2, 2}, 0), 3};
  const auto k = confusion(a, a, 3);
  EXPECT_FALSE(dice(k, 2).has_value());
  EXPECT_FALSE(iou(k, 2).has_value());
  EXPECT_DOUBLE_EQ(*dice(k, 0), 1.0);
  EXPECT_FALSE(weighted_miou(k).has_value());
  const std::vector<MetricValue> none{std::nullopt, std::nullopt};
  EXPECT_FALSE(mean_defined(none).has_value());
}

TEST(WeightedMiou, WeightsByGroundTruthShare) {
  // gt: 3 voxels of class 1, 1 voxel of class 2.
  LabelVolume gt{Grid3<std::uint8_t>({1, 1, 5}, std::vector<std::uint8_t>{1, 1, 1, 2, 0}), 3};
  LabelVolume pr{Grid3<std::uint8_t>({1, 1, 5}, std::vector<std::uint8_t>{1, 1, 0, 2, 2}), 3};
  const auto k = confusion(pr, gt, 3);
  EXPECT_NEAR(*weighted_miou(k), 0.75 * (2.0 / 3.0) + 0.25 * 0.5, 1e-15);
}

TEST(Hd95, SingleVoxelsOffsetThreeFour) {
  const Dims n{8, 8, 8};
  Grid3<std::uint8_t> a(n), b(n);
  a(2, 1, 1) = 1;
  b(2, 4, 5) = 1;
  EXPECT_EQ(*hd95(a, b), 5.0);
  EXPECT_EQ(*hd95(a, a), 0.0);
  const auto big = box(n, {1, 1, 1}, {6, 6, 6});
  EXPECT_EQ(*hd95(big, big), 0.0);
}

TEST(Hd95, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const rng::Stream r(seed);
    const Dims n{3 + r.bits(0) % 8, 3 + r.bits(1) % 8, 3 + r.bits(2) % 8};
    Grid3<std::uint8_t> a(n), b(n);
    for (std::size_t i = 0; i < n.size(); ++i) {
      a[i] = r.uniform(10 + 2 * i) < 0.3;
      b[i] = r.uniform(11 + 2 * i) < 0.3;
    }
    a[0] = b[n.size() - 1] = 1;
    EXPECT_DOUBLE_EQ(*hd95(a, b), oracle::hd95(a, b)) << seed;
  }
}

TEST(Hd95, AnisotropicSpacing) {
  const Dims n{8, 8, 8};
  const auto a = box(n, {1, 1, 1}, {3, 3, 3});
  const auto b = box(n, {4, 1, 1}, {6, 3, 3});
  const Spacing sp{2.5, 1.0, 0.5};
  EXPECT_NEAR(*hd95(a, b, sp), oracle::hd95(a, b, sp), 1e-12);
}

TEST(Hd95, EmptyMaskFails) {
  const Dims n{4, 4, 4};
  EXPECT_FALSE(hd95(Grid3<std::uint8_t>(n), box(n, {0, 0, 0}, {2, 2, 2})).has_value());
  EXPECT_THROW(hd95(Grid3<std::uint8_t>(n), Grid3<std::uint8_t>({4, 4, 5})), ContractError);
}

TEST(Hd95, DirectedMaxDominatesPooled) {
  const Dims n{6, 10, 10};
  const auto a = box(n, {1, 1, 1}, {5, 4, 4});
  const auto b = box(n, {1, 1, 1}, {5, 9, 9});
  EXPECT_GE(*hd95(a, b, {1, 1, 1}, HdMode::directed_max), *hd95(a, b));
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.95), 4.8);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.95), 7);
}

TEST(Psnr, InfiniteOnIdentity) {
  CtVolume a{Grid3<float>({1, 2, 2}, 0.25f), ValueDomain::normalized};
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  CtVolume b = a;
  b.voxels[0] = 0.35f;
  EXPECT_NEAR(mse(a, b), 0.01 / 4, 1e-9);
  EXPECT_NEAR(psnr(a, b), 10 * std::log10(400.0), 1e-5);
}
