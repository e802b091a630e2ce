#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/evalkit.hpp"
#include "gsreg/fine_reg.hpp"
#include "gsreg/splat_render.hpp"
#include "gsreg/synthetic.hpp"
#include "test_support.hpp"

namespace gsreg {
namespace {

using FeatureRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exhaustive reference: enumerate every adjacent pair, keep the first maximum.
std::size_t argmax_oracle(const std::vector<double>& p) {
  std::vector<double> sums;
  for (std::size_t l = 0; l + 1 < p.size(); ++l) sums.push_back(p[l] + p[l + 1]);
  return static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t d) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(d);
  double total = 0.0;
  for (double& v : p) total += (v = e(rng));
  for (double& v : p) v /= total;
  return p;
}

TEST(ConsecutiveArgmax, Examples) {
  EXPECT_EQ(consecutive_argmax(std::vector<double>{0.1, 0.2, 0.4, 0.3}), 2u);
  EXPECT_EQ(consecutive_argmax(std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.0}), 1u);
  EXPECT_EQ(consecutive_argmax(std::vector<double>(8, 0.125)), 0u);
  EXPECT_EQ(consecutive_argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_THROW(consecutive_argmax(std::vector<double>{1.0}), Error);
}

TEST(ConsecutiveArgmax, MatchesEnumerationOracle) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<std::size_t> size(2, 64);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> p = random_distribution(rng, size(rng));
    ASSERT_EQ(consecutive_argmax(p), argmax_oracle(p)) << "trial " << trial;
  }
}

TEST(DepthFeatureConfidence, WorkedExample) {
  const std::vector<double> p{0.1, 0.2, 0.4, 0.3};
  const std::vector<double> d{1, 2, 3, 4};
  FeatureRows f(4, 2);
  f << 0, 10, 1, 20, 2, 30, 3, 40;
  const PixelEstimate e = depth_feature_confidence(p, d, f);
  ASSERT_TRUE(e.valid);
  EXPECT_EQ(e.l0, 2u);
  EXPECT_NEAR(e.depth, 24.0 / 7.0, 1e-12);
  EXPECT_NEAR(e.confidence, 0.7, 1e-12);
  ASSERT_EQ(e.feature.size(), 2u);
  EXPECT_NEAR(e.feature[0], 2.0 * 4.0 / 7.0 + 3.0 * 3.0 / 7.0, 1e-6);
  EXPECT_NEAR(e.feature[1], 30.0 * 4.0 / 7.0 + 40.0 * 3.0 / 7.0, 1e-5);
}

TEST(DepthFeatureConfidence, SymmetricAndOneHot) {
  const std::vector<double> d{1.0, 1.5, 2.5, 4.0};
  const FeatureRows none(4, 0);
  const PixelEstimate mid = depth_feature_confidence(std::vector<double>{0.0, 0.5, 0.5, 0.0}, d, none);
  EXPECT_DOUBLE_EQ(mid.depth, 2.0);
  const PixelEstimate hot = depth_feature_confidence(std::vector<double>{0.0, 0.0, 1.0, 0.0}, d, none);
  EXPECT_EQ(hot.depth, 2.5);
  EXPECT_EQ(hot.confidence, 1.0);
  const PixelEstimate zero = depth_feature_confidence(std::vector<double>{0.0, 0.0, 0.0, 0.0}, d, none);
  EXPECT_FALSE(zero.valid);
}

TEST(DepthFeatureConfidence, MatchesOracleOnRandomDistributions) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 40;
    const std::vector<double> p = random_distribution(rng, n);
    const std::vector<double> d = inverse_depth_hypotheses(0.5, 12.0, n);
    FeatureRows f = FeatureRows::Random(static_cast<Eigen::Index>(n), 3);
    const PixelEstimate e = depth_feature_confidence(p, d, f);
    const std::size_t l = argmax_oracle(p);
    const double m = p[l] + p[l + 1];
    ASSERT_EQ(e.l0, l);
    EXPECT_NEAR(e.depth, (p[l] * d[l] + p[l + 1] * d[l + 1]) / m, 1e-12);
    EXPECT_GE(e.depth, std::min(d[l], d[l + 1]));
    EXPECT_LE(e.depth, std::max(d[l], d[l + 1]));
    EXPECT_GT(e.confidence, 0.0);
    EXPECT_LE(e.confidence, 1.0 + 1e-12);
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(e.feature[c], (p[l] * f(l, c) + p[l + 1] * f(l + 1, c)) / m, 1e-5);
    }
  }
}

CostVolume random_cost(std::mt19937_64& rng, int w, int h, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  CostVolume cv;
  cv.width = w;
  cv.height = h;
  cv.hypotheses = inverse_depth_hypotheses(1.0, 10.0, d);
  cv.values.resize(d * w * h);
  for (double& v : cv.values) v = u(rng);
  return cv;
}

TEST(CostToProbability, NormalisedPerPixel) {
  std::mt19937_64 rng(63);
  for (double temperature : {0.001, 0.05, 1.0, 100.0}) {
    const CostVolume cv = random_cost(rng, 9, 7, 64);
    const ProbabilityVolume p = cost_to_probability(cv, temperature);
    for (std::size_t px = 0; px < p.pixels(); ++px) {
      double sum = 0.0;
      for (std::size_t l = 0; l < p.depth_count; ++l) {
        EXPECT_GE(p.at(l, px), 0.0);
        sum += p.at(l, px);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(CostToProbability, UniformAndSharpLimits) {
  CostVolume cv;
  cv.width = 1;
  cv.height = 1;
  cv.hypotheses = {1, 2, 3, 4};
  cv.values = {0.3, 0.3, 0.3, 0.3};
  const ProbabilityVolume uniform = cost_to_probability(cv, 0.05);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(uniform.at(l, 0), 0.25, 1e-15);
  cv.values = {1.0, 0.0, 1.0, 1.0};
  EXPECT_NEAR(cost_to_probability(cv, 1e-3).at(1, 0), 1.0, 1e-12);
  EXPECT_THROW(cost_to_probability(cv, 0.0), Error);
}

TEST(DepthHypotheses, UniformInInverseDepth) {
  const auto h = inverse_depth_hypotheses(2.0, 10.0, 64);
  ASSERT_EQ(h.size(), 64u);
  EXPECT_EQ(h.front(), 2.0);
  EXPECT_EQ(h.back(), 10.0);
  const double step = 1.0 / h[1] - 1.0 / h[0];
  for (std::size_t l = 1; l < h.size(); ++l) {
    EXPECT_GT(h[l], h[l - 1]);
    EXPECT_NEAR(1.0 / h[l] - 1.0 / h[l - 1], step, 1e-12);
  }
  EXPECT_THROW(inverse_depth_hypotheses(2.0, 1.0, 8), Error);
  EXPECT_THROW(inverse_depth_hypotheses(1.0, 2.0, 1), Error);
}

TEST(DepthRange, ConstantPlaneIsPadded) {
  const auto [lo, hi] = depth_range(DepthMap(16, 16, 5.0));
  EXPECT_NEAR(lo, 4.75, 1e-12);
  EXPECT_NEAR(hi, 5.25, 1e-12);
  EXPECT_THROW(depth_range(DepthMap(4, 4, 0.0)), Error);
}

DepthConfidence flat_confidence(int w, int h) {
  DepthConfidence dc;
  dc.width = w;
  dc.height = h;
  dc.depth.assign(w * h, 2.0);
  dc.confidence.assign(w * h, 0.5);
  dc.valid.assign(w * h, 1);
  dc.camera = testing::look_at({0, 0, 0}, {0, 0, 1}, w, h, 10.0);
  return dc;
}

TEST(ConfidenceFilter, KeepsAboveMean) {
  DepthConfidence dc = flat_confidence(8, 4);
  for (std::size_t p = 0; p < dc.confidence.size(); ++p) dc.confidence[p] = p % 2 ? 0.9 : 0.1;
  dc.valid[0] = 0;  // invalid pixels neither count towards the mean nor survive
  const FilteredPoints f = confidence_filter(dc);
  EXPECT_EQ(f.points.size(), 16u);
  for (std::uint32_t px : f.pixels) EXPECT_EQ(px % 2, 1u);
  const Eigen::Vector3d expect = backproject({1.5, 0.5}, 2.0, dc.camera);
  EXPECT_LT((f.points.front() - expect).norm(), 1e-12);
}

TEST(ConfidenceFilter, ConstantFieldKeepsEverything) {
  const DepthConfidence dc = flat_confidence(5, 3);
  EXPECT_EQ(confidence_filter(dc).points.size(), 15u);
  DepthConfidence none = dc;
  std::fill(none.valid.begin(), none.valid.end(), 0);
  EXPECT_THROW(confidence_filter(none), Error);
}

// Fronto-parallel wall at depth `z` with a random block texture several
// pixels wide, so the views do not alias differently.
GaussianModel textured_wall(double z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.6f, 1.6f);
  constexpr int kHalf = 160, kBlock = 5;
  std::vector<float> blocks((2 * kHalf / kBlock + 1) * (2 * kHalf / kBlock + 1));
  for (float& b : blocks) b = u(rng);
  GaussianModel m;
  m.sh_degree = 0;
  for (int i = -kHalf; i <= kHalf; ++i) {
    for (int j = -kHalf; j <= kHalf; ++j) {
      Gaussian g;
      g.position = Eigen::Vector3f(0.02f * i, 0.02f * j, static_cast<float>(z));
      g.opacity_logit = 5.0f;
      g.log_scale = Eigen::Vector3f::Constant(std::log(0.016f));
      const int bi = (i + kHalf) / kBlock, bj = (j + kHalf) / kBlock;
      g.sh_dc = Eigen::Vector3f::Constant(blocks[bi * (2 * kHalf / kBlock + 1) + bj]);
      m.gaussians.push_back(g);
    }
  }
  return m;
}

TEST(CostVolume, IdenticalViewsCostNothing) {
  const GaussianModel wall = textured_wall(3.0, 64);
  const CameraPose cam = testing::look_at({0, 0, 0}, {0, 0, 1}, 64, 48, 60.0);
  const ColorImage img = render_color(wall, cam, 64, 48);
  const std::vector<ColorImage> src{img};
  const std::vector<CameraPose> src_cams{cam};
  const CostVolume cv = build_cost_volume(img, src, cam, src_cams, {2.0, 4.0}, 8);
  ASSERT_EQ(cv.depth_count(), 8u);
  for (int y = 3; y < 45; ++y) {
    for (int x = 3; x < 61; ++x) {
      for (std::size_t l = 0; l < 8; ++l) EXPECT_NEAR(cv.cost(l, y * 64 + x), 0.0, 1e-6);
    }
  }
}

TEST(CostVolume, TexturedPlaneArgminBracketsTrueDepth) {
  const double depth = 3.0;
  const GaussianModel wall = textured_wall(depth, 65);
  const int w = 96, h = 72;
  const CameraPose ref = testing::look_at({0, 0, 0}, {0, 0, 1}, w, h, 80.0);
  std::vector<CameraPose> src_cams;
  std::vector<ColorImage> src;
  // Baselines give about one pixel of disparity change per depth bin.
  for (const Eigen::Vector3d& c : {Eigen::Vector3d(0.5, 0, 0), Eigen::Vector3d(-0.5, 0, 0),
                                   Eigen::Vector3d(0, 0.4, 0)}) {
    src_cams.push_back(testing::look_at(c, c + Eigen::Vector3d::UnitZ(), w, h, 80.0));
    src.push_back(render_color(wall, src_cams.back(), w, h));
  }
  const CostVolume cv =
      build_cost_volume(render_color(wall, ref, w, h), src, ref, src_cams, {2.0, 5.0}, 16);
  // The truth lies in [d_l, d_l+1]; the argmin must be one of those two bins.
  const auto& d = cv.hypotheses;
  const std::size_t bracket = static_cast<std::size_t>(
      std::upper_bound(d.begin(), d.end(), depth) - d.begin() - 1);
  std::size_t interior = 0, hit = 0;
  for (int y = 8; y < h - 8; ++y) {
    for (int x = 8; x < w - 8; ++x) {
      const std::size_t px = static_cast<std::size_t>(y) * w + x;
      std::size_t best = 0;
      for (std::size_t l = 1; l < cv.depth_count(); ++l) {
        if (cv.cost(l, px) < cv.cost(best, px)) best = l;
      }
      ++interior;
      if (best == bracket || best == bracket + 1) ++hit;
    }
  }
  EXPECT_GE(static_cast<double>(hit) / interior, 0.95);
}

TEST(CostVolume, RejectsBadInput) {
  const ColorImage img(8, 8, Eigen::Vector3f::Zero());
  const CameraPose cam = testing::look_at({0, 0, 0}, {0, 0, 1}, 8, 8, 8.0);
  EXPECT_THROW(build_cost_volume(img, {}, cam, {}, {1.0, 2.0}, 8), Error);
  // A source looking the other way never overlaps.
  const std::vector<ColorImage> src{img};
  const std::vector<CameraPose> away{testing::look_at({0, 0, 0}, {0, 0, -1}, 8, 8, 8.0)};
  EXPECT_THROW(build_cost_volume(img, src, cam, away, {1.0, 2.0}, 8), Error);
}

SyntheticPair small_pair(std::uint64_t seed, double overlap, bool transform) {
  SyntheticConfig cfg;
  cfg.gaussian_count = 20000;
  cfg.cameras_per_side = 20;
  cfg.overlap = overlap;
  cfg.random_transform = transform;
  cfg.position_noise = 0.0;
  return make_synthetic_scene_pair(seed, cfg);
}

std::vector<CameraPose> first_cameras(const GaussianModel& m, std::size_t n) {
  return {m.cameras.begin(), m.cameras.begin() + static_cast<std::ptrdiff_t>(n)};
}

TEST(FineRegister, SelfRegistrationIsIdentity) {
  const SyntheticPair p = small_pair(66, 1.0, false);
  const auto cams = first_cameras(p.a, 5);
  const FineResult r = fine_register(p.a, p.a, cams, cams, Sim3{});
  ASSERT_NE(r.estimate.status, RegistrationStatus::kFallback);
  const Sim3& x = r.estimate.transform;
  EXPECT_NEAR(x.s, 1.0, 1e-3);
  EXPECT_LT((x.R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(x.T.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FineRegister, NoCamerasFallsBackToCoarse) {
  const SyntheticPair p = small_pair(67, 1.0, false);
  const Sim3 coarse = Sim3::create(1.1, axis_angle(Eigen::Vector3d::UnitZ(), 0.1), {0.1, 0, 0});
  const std::vector<CameraPose> one{p.a.cameras.front()};
  const FineResult r = fine_register(p.a, p.a, one, one, coarse);
  EXPECT_EQ(r.estimate.status, RegistrationStatus::kFallback);
  EXPECT_EQ(r.estimate.transform.s, coarse.s);
  EXPECT_EQ(r.estimate.transform.T, coarse.T);
}

}  // namespace
}  // namespace gsreg
