#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/overlap_select.hpp"
#include "gsreg/sh_transform.hpp"
#include "gsreg/splat_render.hpp"
#include "gsreg/synthetic.hpp"
#include "test_support.hpp"

namespace gsreg {
namespace {

using testing::look_at;

Gaussian opaque_at(const Eigen::Vector3d& p, double log_scale = -4.0) {
  Gaussian g;
  g.position = p.cast<float>();
  g.opacity_logit = 5.0f;
  g.log_scale = Eigen::Vector3f::Constant(static_cast<float>(log_scale));
  return g;
}

CameraPose axis_camera(int w = 64, int h = 48) {
  return look_at({0, 0, 0}, {0, 0, 1}, w, h, 50.0);
}

TEST(Projection, OpticalAxisAndBehindCamera) {
  const CameraPose cam = axis_camera();
  const auto p = project_point({0, 0, 5}, cam);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->pixel.x(), cam.cx, 1e-12);
  EXPECT_NEAR(p->pixel.y(), cam.cy, 1e-12);
  EXPECT_DOUBLE_EQ(p->depth, 5.0);
  EXPECT_FALSE(project_point({0, 0, -1}, cam));
  EXPECT_FALSE(project_point({1, 0, 0}, cam));
}

TEST(Projection, BackprojectIsInverse) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const CameraPose cam = look_at({1, -2, 0.5}, {0, 0, 0}, 320, 240, 300.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    const auto proj = project_point(p, cam);
    if (!proj) continue;
    EXPECT_LT((backproject(proj->pixel, proj->depth, cam) - p).norm(), 1e-9);
  }
}

TEST(Render, SingleGaussianOnAxis) {
  GaussianModel m;
  m.gaussians.push_back(opaque_at({0, 0, 5}));
  const CameraPose cam = axis_camera();
  const RenderResult r = render(m, cam, 64, 48, true);
  EXPECT_DOUBLE_EQ(r.depth.at(32, 24), 5.0);
  EXPECT_DOUBLE_EQ(r.depth.at(0, 0), 0.0);
  // sh_dc = 0 is mid gray.
  EXPECT_LT((r.color.at(32, 24) - Eigen::Vector3f::Constant(0.5f)).norm(), 1e-6f);
  EXPECT_EQ(r.color.at(0, 0), Eigen::Vector3f::Zero());
}

TEST(Render, NearestGaussianWins) {
  GaussianModel m;
  m.gaussians.push_back(opaque_at({0, 0, 7}, -1.0));
  m.gaussians.push_back(opaque_at({0, 0, 5}, -3.0));
  const DepthMap d = render_depth(m, axis_camera(), 64, 48);
  EXPECT_DOUBLE_EQ(d.at(32, 24), 5.0);
  // The far splat is larger and still shows around the near one.
  EXPECT_DOUBLE_EQ(d.at(32, 24 + 2), 7.0);
}

TEST(Render, BehindCameraAndTransparentGiveEmptyMaps) {
  GaussianModel m;
  m.gaussians.push_back(opaque_at({0, 0, -5}));
  Gaussian faint = opaque_at({0, 0, 5});
  faint.opacity_logit = 0.0f;  // sigmoid 0.5 is below the 0.7 threshold
  m.gaussians.push_back(faint);
  const RenderResult r = render(m, axis_camera(), 64, 48, true);
  EXPECT_TRUE(std::all_of(r.depth.data.begin(), r.depth.data.end(), [](double v) { return v == 0.0; }));
  EXPECT_TRUE(std::all_of(r.color.data.begin(), r.color.data.end(),
                          [](const Eigen::Vector3f& c) { return c.isZero(); }));
  EXPECT_THROW(render_depth(GaussianModel{}, axis_camera(), 8, 8), Error);
}

TEST(Render, TiltedPlaneMatchesRayPlaneDepth) {
  // Plane through (0, 0, 4) with normal n, sampled on a dense grid.
  const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.2, 1.0).normalized();
  const Eigen::Vector3d origin(0, 0, 4);
  const Eigen::Vector3d e1 = n.unitOrthogonal();
  const Eigen::Vector3d e2 = n.cross(e1);
  GaussianModel m;
  for (int i = -150; i <= 150; ++i) {
    for (int j = -150; j <= 150; ++j) {
      m.gaussians.push_back(opaque_at(origin + 0.02 * (i * e1 + j * e2), std::log(0.012)));
    }
  }
  const CameraPose cam = axis_camera(80, 60);
  const DepthMap d = render_depth(m, cam, 80, 60);
  std::size_t covered = 0, good = 0;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      if (d.at(x, y) <= 0.0) continue;
      ++covered;
      const Eigen::Vector3d ray((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
      const double z = n.dot(origin) / n.dot(ray);  // camera frame equals world frame
      if (std::abs(d.at(x, y) - z) / z < 0.02) ++good;
    }
  }
  ASSERT_GT(covered, std::size_t(80 * 60 / 2));
  EXPECT_GE(static_cast<double>(good) / covered, 0.9);
}

TEST(Render, ViewDependentColour) {
  GaussianModel m;
  Gaussian g = opaque_at({0, 0, 0});
  g.sh_rest[2] = 0.5f;  // degree-1 x component of the red channel
  m.gaussians.push_back(g);
  const CameraPose from_left = look_at({-5, 0, 0}, {0, 0, 0}, 32, 32, 50.0);
  const CameraPose from_right = look_at({5, 0, 0}, {0, 0, 0}, 32, 32, 50.0);
  const Eigen::Vector3f left = render_color(m, from_left, 32, 32).at(16, 16);
  const Eigen::Vector3f right = render_color(m, from_right, 32, 32).at(16, 16);
  const float expect_left = 0.5f + static_cast<float>(
      eval_sh(0.0f, g.sh_rest.data(), 3, Eigen::Vector3d::UnitX()));
  EXPECT_NEAR(left.x(), expect_left, 1e-6f);
  EXPECT_GT(std::abs(left.x() - right.x()), 0.1f);
  EXPECT_FLOAT_EQ(left.y(), 0.5f);
}

TEST(Overlap, SubsampleIndices) {
  const auto every_third = subsample_indices(90, 30);
  ASSERT_EQ(every_third.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(every_third[i], 3 * i);
  const auto all = subsample_indices(10, 30);
  ASSERT_EQ(all.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  const auto first = subsample_indices(17, 1);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0], 0u);
}

TEST(Overlap, CameraTransformEquivariance) {
  std::mt19937_64 rng(52);
  const CameraPose cam = look_at({1, 2, 3}, {0, 0, 0}, 64, 48, 60.0);
  const CameraPose same = apply_sim3_to_camera(cam, Sim3{});
  EXPECT_EQ(same.rotation, cam.rotation);
  EXPECT_EQ(same.translation, cam.translation);
  const CameraPose shifted = apply_sim3_to_camera(cam, Sim3::create(1.0, Eigen::Matrix3d::Identity(), {1, 0, 0}));
  EXPECT_EQ(shifted.rotation, cam.rotation);
  EXPECT_LT((shifted.translation - cam.translation - Eigen::Vector3d(1, 0, 0)).norm(), 1e-15);
  for (int i = 0; i < 20; ++i) {
    const Sim3 x = testing::random_sim3(rng);
    const CameraPose moved = apply_sim3_to_camera(cam, x);
    const Eigen::Vector3d p = 0.5 * Eigen::Vector3d::Random();
    const auto a = project_point(p, cam);
    const auto b = project_point(x.apply(p), moved);
    ASSERT_TRUE(a && b);
    EXPECT_LT((a->pixel - b->pixel).norm(), 1e-9);
    EXPECT_NEAR(b->depth, x.s * a->depth, 1e-9);
  }
}

TEST(Overlap, OrientationTopK) {
  std::vector<CameraPose> cams;
  for (const Eigen::Vector3d& dir : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0),
                                     Eigen::Vector3d(-1, 0, 0), Eigen::Vector3d(0, -1, 0)}) {
    cams.push_back(look_at({0, 0, 0}, dir, 32, 32, 30.0));
  }
  const auto top = orientation_topk(cams, cams, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_NEAR(top[0].orientation_cos, 1.0, 1e-12);
  // Four identical-cosine diagonal pairs: ties go to the smallest indices.
  EXPECT_EQ(top[0].index_a, 0u);
  EXPECT_EQ(top[0].index_b, 0u);
  const auto all = orientation_topk(cams, cams, 100);
  EXPECT_EQ(all.size(), 16u);
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_GE(all[i - 1].orientation_cos, all[i].orientation_cos - 1e-15);
  }

  const std::vector<CameraPose> fwd{look_at({0, 0, 0}, {1, 0, 0}, 32, 32, 30.0)};
  const std::vector<CameraPose> back{look_at({0, 0, 0}, {-1, 0, 0}, 32, 32, 30.0)};
  const auto opposed = orientation_topk(fwd, back, 5);
  ASSERT_EQ(opposed.size(), 1u);
  EXPECT_NEAR(opposed[0].orientation_cos, -1.0, 1e-12);
}

GaussianModel wall_model() {
  GaussianModel m;
  for (int i = -90; i <= 90; ++i) {
    for (int j = -90; j <= 90; ++j) m.gaussians.push_back(opaque_at({0.05 * i, 0.05 * j, 5.0}, -3.0));
  }
  return m;
}

TEST(Overlap, CovisibilityOfIdenticalAndDisjointViews) {
  const GaussianModel m = wall_model();
  const CameraPose cam = axis_camera(48, 48);
  EXPECT_DOUBLE_EQ(covisibility(cam, cam, m, m, 48, 48), 1.0);
  const CameraPose away = look_at({0, 0, 0}, {0, 0, -1}, 48, 48, 50.0);
  EXPECT_DOUBLE_EQ(covisibility(cam, away, m, m, 48, 48), 0.0);
  const DepthMap empty(48, 48, 0.0);
  EXPECT_DOUBLE_EQ(covisibility_from_depth(cam, empty, cam, empty), 0.0);
}

TEST(Overlap, CovisibilityMatchesPixelOracle) {
  // Two cameras side by side looking at a wall: each sees part of the other's
  // view. Oracle: lift every pixel, project into the other view, count hits.
  const GaussianModel m = wall_model();
  const CameraPose a = look_at({-1.5, 0, 0}, {-1.5, 0, 5}, 48, 48, 40.0);
  const CameraPose b = look_at({1.5, 0, 0}, {1.5, 0, 5}, 48, 48, 40.0);
  const DepthMap da = render_depth(m, a, 48, 48);
  const DepthMap db = render_depth(m, b, 48, 48);
  const auto one_way = [](const CameraPose& ca, const DepthMap& d1, const CameraPose& cb,
                          const DepthMap& d2) {
    std::size_t valid = 0, hit = 0;
    for (int y = 0; y < d1.height; ++y) {
      for (int x = 0; x < d1.width; ++x) {
        if (d1.at(x, y) <= 0.0) continue;
        ++valid;
        const auto p = project_point(backproject({x + 0.5, y + 0.5}, d1.at(x, y), ca), cb);
        if (!p) continue;
        const int u = static_cast<int>(std::floor(p->pixel.x()));
        const int v = static_cast<int>(std::floor(p->pixel.y()));
        if (u < 0 || v < 0 || u >= d2.width || v >= d2.height) continue;
        const double z = d2.at(u, v);
        if (z > 0.0 && std::abs(z - p->depth) <= 0.05 * z) ++hit;
      }
    }
    return valid ? static_cast<double>(hit) / valid : 0.0;
  };
  const double oracle = 0.5 * (one_way(a, da, b, db) + one_way(b, db, a, da));
  const double got = covisibility_from_depth(a, da, b, db);
  EXPECT_NEAR(got, oracle, 1e-12);
  EXPECT_GT(got, 0.2);
  EXPECT_LT(got, 0.8);
}

TEST(Overlap, SelfSelectionPicksMatchingCameras) {
  SyntheticConfig cfg;
  cfg.gaussian_count = 6000;
  cfg.cameras_per_side = 20;
  cfg.overlap = 1.0;
  cfg.random_transform = false;
  cfg.position_noise = 0.0;
  const SyntheticPair p = make_synthetic_scene_pair(53, cfg);
  OverlapConfig oc;
  oc.width = 48;
  oc.height = 36;
  const OverlapSelection sel = select_overlap_cameras(p.a, p.a, Sim3{}, oc);
  EXPECT_EQ(sel.best.index_a, sel.best.index_b);
  ASSERT_TRUE(sel.best.covisibility);
  EXPECT_NEAR(*sel.best.covisibility, 1.0, 1e-12);
  EXPECT_EQ(sel.indices_a.front(), sel.best.index_a);
  EXPECT_EQ(sel.indices_a.size(), oc.neighbors);
  EXPECT_EQ(sel.cameras_b.size(), oc.neighbors);
}

TEST(Overlap, InsufficientOverlapThrows) {
  const GaussianModel wall = wall_model();
  GaussianModel a = wall, b = wall;
  a.cameras = {axis_camera(32, 32)};
  b.cameras = {look_at({0, 0, 0}, {0, 0, -1}, 32, 32, 50.0)};
  OverlapConfig oc;
  oc.width = 32;
  oc.height = 32;
  try {
    select_overlap_cameras(a, b, Sim3{}, oc);
    FAIL() << "expected insufficient overlap";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientOverlap);
  }
}

}  // namespace
}  // namespace gsreg
