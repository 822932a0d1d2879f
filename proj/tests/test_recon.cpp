#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "csvid/recon.hpp"

using namespace csvid;

namespace {

TEST(Dct2, ConstantBlockIsPureDc) {
  Dct2 dct(16);
  std::vector<double> block(256, 2.0);
  std::vector<double> coeffs = dct.forward(block);
  EXPECT_NEAR(coeffs[0], 2.0 * 16.0, 1e-12);  // DC = c * B for orthonormal scaling
  for (std::size_t i = 1; i < coeffs.size(); ++i) ASSERT_NEAR(coeffs[i], 0.0, 1e-12);
}

TEST(Dct2, InverseAndParseval) {
  Dct2 dct(8);
  Rng rng(3);
  std::vector<double> block(64);
  for (auto& v : block) v = rng.gaussian();
  std::vector<double> coeffs = dct.forward(block);
  std::vector<double> back = dct.inverse(coeffs);

  double ex = 0.0, ec = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    ASSERT_NEAR(back[i], block[i], 1e-12);
    ex += block[i] * block[i];
    ec += coeffs[i] * coeffs[i];
  }
  EXPECT_NEAR(ex, ec, 1e-12 * std::max(1.0, ex));
}

// Exactly K-sparse signal in the DCT basis, scaled to unit peak.
std::vector<double> sparse_block(const Dct2& dct, std::size_t k, Rng& rng) {
  std::size_t n = dct.block_size() * dct.block_size();
  std::vector<double> theta(n, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t idx = rng.next_u64() % n;
    while (theta[idx] != 0.0) idx = rng.next_u64() % n;
    theta[idx] = rng.gaussian() + (rng.next_u64() & 1 ? 2.0 : -2.0);
  }
  std::vector<double> x = dct.inverse(theta);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  for (auto& v : x) v /= peak;
  return x;
}

TEST(Ista, RecoversSparseSignals) {
  Dct2 dct(16);
  SensingMatrix phi = build_gaussian(64, 256, 77);  // r = 4
  Rng rng(5);
  ReconConfig cfg;
  cfg.iterations = 4000;  // plain (non-accelerated) ISTA converges linearly
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x = sparse_block(dct, 4, rng);
    std::vector<double> y = encode_block(phi, x);
    IstaResult r = ista_reconstruct(y, phi, cfg, &dct);
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - r.block[i];
      mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    double psnr_db = 10.0 * std::log10(1.0 / mse);
    EXPECT_GT(psnr_db, 40.0) << "trial " << trial;
  }
}

TEST(Ista, ZeroMeasurementsGiveZeroBlock) {
  SensingMatrix phi = build_gaussian(16, 64, 9);
  std::vector<double> y(16, 0.0);
  ReconConfig cfg;
  IstaResult r = ista_reconstruct(y, phi, cfg);
  for (double v : r.block) ASSERT_DOUBLE_EQ(v, 0.0);
}

TEST(Ista, ObjectiveMonotoneNonIncreasing) {
  Dct2 dct(16);
  SensingMatrix phi = build_gaussian(64, 256, 13);
  Rng rng(17);
  ReconConfig cfg;
  cfg.record_objective = true;
  cfg.iterations = 150;
  std::vector<double> x(256);
  for (auto& v : x) v = rng.uniform();
  std::vector<double> y = encode_block(phi, x);
  IstaResult r = ista_reconstruct(y, phi, cfg, &dct);
  ASSERT_EQ(r.objective.size(), 150u);
  for (std::size_t i = 1; i < r.objective.size(); ++i)
    ASSERT_LE(r.objective[i], r.objective[i - 1] + 1e-9 * std::max(1.0, r.objective[i - 1]));
}

TEST(Ista, IdentityIsExact) {
  SensingMatrix eye = build_identity(8);
  Rng rng(21);
  std::vector<double> x(64);
  for (auto& v : x) v = rng.uniform();
  ReconConfig cfg;
  IstaResult r = ista_reconstruct(x, eye, cfg);
  EXPECT_EQ(r.block, x);
}

TEST(Ista, DimensionMismatchThrows) {
  SensingMatrix phi = build_gaussian(16, 64, 2);
  ReconConfig cfg;
  std::vector<double> y(15, 0.0);
  EXPECT_THROW(ista_reconstruct(y, phi, cfg), Error);
}

TEST(Ista, HardThresholdVariantKeepsTopK) {
  Dct2 dct(8);
  SensingMatrix phi = build_gaussian(32, 64, 31);
  Rng rng(33);
  std::vector<double> x = sparse_block(dct, 3, rng);
  std::vector<double> y = encode_block(phi, x);
  ReconConfig cfg;
  cfg.sparsity = 3;
  cfg.iterations = 300;
  IstaResult r = ista_reconstruct(y, phi, cfg, &dct);
  std::vector<double> theta = dct.forward(r.block);
  std::size_t nz = 0;
  for (double t : theta)
    if (std::fabs(t) > 1e-9) ++nz;
  EXPECT_LE(nz, 3u);
}

VideoClip piecewise_clip(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
  VideoClip clip = VideoClip::create(t, h, w);
  Rng rng(seed);
  std::uint8_t bg = static_cast<std::uint8_t>(60 + rng.next_u64() % 60);
  for (auto& v : clip.data) v = bg;
  // a couple of flat rectangles per frame
  for (std::size_t f = 0; f < t; ++f) {
    std::size_t rx = rng.next_u64() % (w / 2), ry = rng.next_u64() % (h / 2);
    for (std::size_t y = ry; y < ry + h / 3; ++y)
      for (std::size_t x = rx; x < rx + w / 3; ++x)
        for (std::size_t c = 0; c < 3; ++c) clip.at(f, y, x, c) = 220;
  }
  return clip;
}

TEST(PrivacyGap, SameKeyGivesZeroGap) {
  VideoClip clip = piecewise_clip(1, 32, 32, 4);
  SensingMatrix phi = build_gaussian(64, 256, 5);
  ReconConfig cfg;
  cfg.iterations = 60;
  PrivacyGap g = privacy_gap(clip, phi, phi, cfg);
  EXPECT_EQ(g.gap, 0.0);
  EXPECT_EQ(g.psnr_true, g.psnr_wrong);
}

TEST(PrivacyGap, IdentityTrueKeyIsExact) {
  VideoClip clip = piecewise_clip(1, 16, 16, 6);
  SensingMatrix eye = build_identity(16);
  ReconConfig cfg;
  PrivacyGap g = privacy_gap(clip, eye, eye, cfg);
  EXPECT_TRUE(std::isinf(g.psnr_true));
  EXPECT_EQ(g.gap, 0.0);
}

TEST(PrivacyGap, WrongKeyLosesSignificantly) {
  VideoClip clip = piecewise_clip(2, 32, 32, 7);
  SensingMatrix true_phi = build_gaussian(64, 256, 100);
  SensingMatrix wrong_phi = build_gaussian(64, 256, 200);
  ReconConfig cfg;
  cfg.iterations = 120;
  PrivacyGap g = privacy_gap(clip, true_phi, wrong_phi, cfg);
  EXPECT_GT(g.gap, 0.0);
  EXPECT_GT(g.psnr_true, g.psnr_wrong);
}

TEST(PrivacyGap, GeometryMismatchThrows) {
  VideoClip clip = piecewise_clip(1, 32, 32, 8);
  SensingMatrix a = build_gaussian(64, 256, 1);
  SensingMatrix b = build_gaussian(32, 256, 1);
  ReconConfig cfg;
  EXPECT_THROW(privacy_gap(clip, a, b, cfg), Error);
}

}  // namespace
