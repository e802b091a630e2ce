#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/evalkit.hpp"
#include "gsreg/pipeline.hpp"
#include "gsreg/synthetic.hpp"
#include "test_support.hpp"

namespace gsreg {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Rre, KnownAngles) {
  std::mt19937_64 rng(41);
  const Eigen::Matrix3d R = random_rotation(rng);
  EXPECT_NEAR(rre(R, R), 0.0, 1e-12);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d axis = testing::random_unit(rng);
    EXPECT_NEAR(rre(R * axis_angle(axis, kPi / 6), R), 30.0, 1e-6);
  }
  Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
  flip(0, 0) = flip(1, 1) = -1.0;
  EXPECT_NEAR(rre(flip * R, R), 180.0, 1e-9);
  EXPECT_NEAR(rre(axis_angle(Eigen::Vector3d::UnitX(), 1e-9), Eigen::Matrix3d::Identity()),
              1e-9 * 180.0 / kPi, 1e-15);
}

TEST(Rre, SymmetricAndRightInvariant) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d a = random_rotation(rng);
    const Eigen::Matrix3d b = random_rotation(rng);
    const Eigen::Matrix3d q = random_rotation(rng);
    EXPECT_NEAR(rre(a, b), rre(b, a), 1e-9);
    EXPECT_NEAR(rre(a * q, b * q), rre(a, b), 1e-9);
  }
}

TEST(Rre, RejectsNonRotation) {
  EXPECT_THROW(rre(2.0 * Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()), Error);
}

TEST(Rte, RatioAndAbsoluteMode) {
  EXPECT_DOUBLE_EQ(rte({1, 2, 3}, {1, 2, 3}).value, 0.0);
  const TranslationError t = rte({1.1, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(t.value, 0.1, 1e-12);
  EXPECT_FALSE(t.absolute);
  const TranslationError z = rte({0, 3, 4}, Eigen::Vector3d::Zero());
  EXPECT_TRUE(z.absolute);
  EXPECT_DOUBLE_EQ(z.value, 5.0);
}

TEST(Rse, Examples) {
  EXPECT_DOUBLE_EQ(rse(1.0, 1.0), 0.0);
  EXPECT_NEAR(rse(1.05, 1.0), 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(rse(2.0, 4.0), 0.5);
  EXPECT_THROW(rse(1.0, 0.0), Error);
}

TEST(Rde, Examples) {
  DepthMap gt(4, 3, 2.0);
  gt.at(0, 0) = 0.0;
  EXPECT_DOUBLE_EQ(rde(gt, gt), 0.0);
  DepthMap est = gt;
  for (double& d : est.data) d *= 1.1;
  EXPECT_NEAR(rde(est, gt), 0.1, 1e-12);

  DepthMap a(2, 1, 0.0), b(2, 1, 0.0);
  a.at(0, 0) = 1.0;
  b.at(1, 0) = 1.0;
  EXPECT_THROW(rde(a, b), Error);
  EXPECT_THROW(rde(DepthMap(2, 2, 1.0), DepthMap(3, 2, 1.0)), Error);
}

TEST(Evaluate, SuccessThreshold) {
  const Sim3 gt = Sim3::create(1.2, axis_angle(Eigen::Vector3d::UnitZ(), 0.3), {1, 2, 3});
  const MetricReport same = evaluate(gt, gt);
  EXPECT_NEAR(same.rre, 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(same.rte, 0.0);
  EXPECT_DOUBLE_EQ(same.rse, 0.0);
  EXPECT_TRUE(same.success);

  const Sim3 off = Sim3::create(1.26, gt.R * axis_angle(Eigen::Vector3d::UnitX(), kPi / 9), gt.T);
  const MetricReport r = evaluate(off, gt);
  EXPECT_NEAR(r.rre, 20.0, 1e-9);
  EXPECT_NEAR(r.rse, 0.05, 1e-12);
  EXPECT_FALSE(r.success);
  EXPECT_TRUE(evaluate(off, gt, 25.0).success);
}

TEST(Evaluate, CsvLayout) {
  BatchRow row;
  row.scene = "s1";
  row.report.rre = 1.5;
  row.report.rte = 0.25;
  row.report.rse = 0.125;
  row.report.success = true;
  row.seconds = 2.0;
  BatchRow with_rde = row;
  with_rde.scene = "s2";
  with_rde.report.rde = 0.5;
  with_rde.report.success = false;
  EXPECT_EQ(batch_to_csv({row, with_rde}),
            "scene,rre,rte,rse,rde,success,seconds\n"
            "s1,1.5,0.25,0.125,,1,2\n"
            "s2,1.5,0.25,0.125,0.5,0,2\n");
}

SyntheticConfig small_config() {
  SyntheticConfig cfg;
  cfg.gaussian_count = 4000;
  cfg.cameras_per_side = 12;
  return cfg;
}

TEST(Synthetic, DeterministicPerSeed) {
  const SyntheticConfig cfg = small_config();
  const SyntheticPair p = make_synthetic_scene_pair(7, cfg);
  const SyntheticPair q = make_synthetic_scene_pair(7, cfg);
  ASSERT_EQ(p.a.size(), q.a.size());
  ASSERT_EQ(p.b.size(), q.b.size());
  for (std::size_t i = 0; i < p.b.size(); ++i) {
    ASSERT_EQ(p.b.gaussians[i].position, q.b.gaussians[i].position);
    ASSERT_EQ(p.b.gaussians[i].sh_rest, q.b.gaussians[i].sh_rest);
  }
  EXPECT_EQ(p.ground_truth.R, q.ground_truth.R);
  EXPECT_EQ(p.ground_truth.T, q.ground_truth.T);
  EXPECT_EQ(p.ground_truth.s, q.ground_truth.s);
  const SyntheticPair other = make_synthetic_scene_pair(8, cfg);
  EXPECT_NE(other.ground_truth.T, p.ground_truth.T);
}

TEST(Synthetic, GroundTruthRestoresSourcePositions) {
  SyntheticConfig cfg = small_config();
  cfg.position_noise = 0.0;
  const SyntheticPair p = make_synthetic_scene_pair(9, cfg);
  ASSERT_EQ(p.source_b.size(), p.b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < p.b.size(); ++i) {
    const Eigen::Vector3d back = p.ground_truth.apply(p.b.gaussians[i].position_d());
    const Eigen::Vector3d src = p.scene.gaussians[p.source_b[i]].position_d();
    worst = std::max(worst, (back - src).norm());
  }
  // Positions are stored in single precision.
  EXPECT_LT(worst, 1e-4);
  EXPECT_GE(p.ground_truth.s, 1.0 / cfg.max_scale - 1e-12);
  EXPECT_LE(p.ground_truth.s, 1.0 / cfg.min_scale + 1e-12);
}

TEST(Synthetic, FullOverlapWithoutTransformGivesIdenticalModels) {
  SyntheticConfig cfg = small_config();
  cfg.overlap = 1.0;
  cfg.random_transform = false;
  cfg.position_noise = 0.0;
  const SyntheticPair p = make_synthetic_scene_pair(10, cfg);
  EXPECT_EQ(p.ground_truth.s, 1.0);
  EXPECT_EQ(p.ground_truth.R, Eigen::Matrix3d::Identity());
  EXPECT_EQ(p.ground_truth.T, Eigen::Vector3d::Zero());
  ASSERT_EQ(p.a.size(), p.b.size());
  for (std::size_t i = 0; i < p.a.size(); ++i) {
    ASSERT_EQ(p.a.gaussians[i].position, p.b.gaussians[i].position);
  }
}

TEST(Synthetic, OverlapRangeValidated) {
  SyntheticConfig cfg = small_config();
  for (double o : {0.2, 0.5, 0.8}) {
    cfg.overlap = o;
    EXPECT_NO_THROW(cfg.validate());
  }
  cfg.overlap = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.overlap = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(parse_synthetic_config(R"({"overlap": 0})"), Error);
  EXPECT_THROW(parse_synthetic_config(R"({"bogus": 1})"), Error);
  EXPECT_DOUBLE_EQ(parse_synthetic_config(R"({"overlap": 0.4})").overlap, 0.4);
}

TEST(PipelineConfig, DefaultsMatchStatedParameters) {
  const PipelineConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.opacity_threshold, 0.7);
  EXPECT_EQ(cfg.max_points, 30000u);
  EXPECT_EQ(cfg.overlap.subset_size, 30u);
  EXPECT_EQ(cfg.overlap.top_k, 10u);
  EXPECT_EQ(cfg.overlap.neighbors, 5u);
  EXPECT_EQ(cfg.fine.depth_hypotheses, 64u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(PipelineConfig, ParseRoundTrip) {
  const PipelineConfig cfg = parse_pipeline_config(
      R"({"seed": 7, "coarse_only": true, "coarse": {"ransac_candidates": 3},
          "overlap": {"top_k": 4}, "fine": {"depth_hypotheses": 32}})");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_TRUE(cfg.coarse_only);
  EXPECT_EQ(cfg.coarse.ransac_candidates, 3u);
  EXPECT_EQ(cfg.overlap.top_k, 4u);
  EXPECT_EQ(cfg.fine.depth_hypotheses, 32u);
  const PipelineConfig again = parse_pipeline_config(pipeline_config_to_json(cfg));
  EXPECT_EQ(pipeline_config_to_json(again), pipeline_config_to_json(cfg));
}

TEST(PipelineConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_pipeline_config(R"({"sed": 1})"), Error);
  EXPECT_THROW(parse_pipeline_config(R"({"fine": {"depth_hypotheses": 1}})"), Error);
  EXPECT_THROW(parse_pipeline_config(R"({"overlap": {"bogus": 1}})"), Error);
  EXPECT_THROW(parse_pipeline_config(R"({"opacity_threshold": 1.5})"), Error);
  EXPECT_THROW(parse_pipeline_config("[1]"), Error);
  EXPECT_NO_THROW(parse_pipeline_config("{}"));
}

}  // namespace
}  // namespace gsreg
