#include <cmath>
#include <random>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/sh_transform.hpp"
#include "test_support.hpp"

namespace gsreg {
namespace {

using testing::random_unit;

std::array<float, kShRestCount> random_rest(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::array<float, kShRestCount> rest{};
  for (float& c : rest) c = u(rng);
  return rest;
}

TEST(ShBasis, DegreeZeroIsConstant) {
  EXPECT_DOUBLE_EQ(eval_sh_basis(0, Eigen::Vector3d::UnitX())[0], kShC0);
  EXPECT_DOUBLE_EQ(eval_sh_basis(0, Eigen::Vector3d::UnitZ())[0], kShC0);
}

TEST(ShBasis, DegreeOneSigns) {
  // The splatting convention stores degree 1 as (-C1 y, C1 z, -C1 x).
  const Eigen::VectorXd b = eval_sh_basis(1, Eigen::Vector3d::UnitX());
  EXPECT_NEAR(b[0], 0.0, 1e-15);
  EXPECT_NEAR(b[1], 0.0, 1e-15);
  EXPECT_NEAR(b[2], -0.4886025119029199, 1e-15);
}

TEST(ShBasis, OrthonormalUnderMonteCarloIntegration) {
  // Real SH of one degree are orthonormal over the sphere; check with 200k
  // uniform samples (standard error about 2e-3).
  std::mt19937_64 rng(21);
  for (int l = 1; l <= 3; ++l) {
    const int n = 2 * l + 1;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) {
      const Eigen::VectorXd b = eval_sh_basis(l, random_unit(rng));
      gram += b * b.transpose();
    }
    gram *= 4.0 * M_PI / samples;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 0.03) << "degree " << l;
  }
}

TEST(ShBasis, RejectsBadInput) {
  EXPECT_THROW(eval_sh_basis(4, Eigen::Vector3d::UnitX()), Error);
  EXPECT_THROW(eval_sh_basis(1, Eigen::Vector3d(2, 0, 0)), Error);
}

TEST(ShRotation, SampleMatricesAreWellConditioned) {
  for (int l = 0; l <= kMaxShDegree; ++l) {
    const auto& dirs = sh_sample_directions(l);
    ASSERT_EQ(dirs.size(), static_cast<std::size_t>(2 * l + 1));
    Eigen::MatrixXd Q(2 * l + 1, 2 * l + 1);
    for (int k = 0; k <= 2 * l; ++k) Q.col(k) = eval_sh_basis(l, dirs[k]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q);
    const auto& sv = svd.singularValues();
    EXPECT_GT(sv[sv.size() - 1] / sv[0], 0.01) << "degree " << l;
  }
}

TEST(ShRotation, IdentityRotationGivesIdentityBlocks) {
  const ShRotation rot = build_sh_rotation(Eigen::Matrix3d::Identity());
  for (int l = 0; l <= kMaxShDegree; ++l) {
    EXPECT_LT((rot.blocks[l] - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)).norm(), 1e-12);
  }
}

TEST(ShRotation, BlocksAreOrthogonal) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 10; ++i) {
    const ShRotation rot = build_sh_rotation(random_rotation(rng));
    for (int l = 0; l <= kMaxShDegree; ++l) {
      const Eigen::MatrixXd& B = rot.blocks[l];
      EXPECT_LT((B.transpose() * B - Eigen::MatrixXd::Identity(B.rows(), B.cols())).norm(), 1e-9);
    }
  }
}

TEST(ShRotation, ComposesLikeRotations) {
  std::mt19937_64 rng(23);
  const Eigen::Matrix3d R1 = random_rotation(rng);
  const Eigen::Matrix3d R2 = random_rotation(rng);
  const ShRotation a = build_sh_rotation(R1);
  const ShRotation b = build_sh_rotation(R2);
  const ShRotation ab = build_sh_rotation(R1 * R2);
  for (int l = 1; l <= kMaxShDegree; ++l) {
    EXPECT_LT((a.blocks[l] * b.blocks[l] - ab.blocks[l]).norm(), 1e-9);
  }
}

TEST(ShRotation, RotatedFunctionMatchesOracle) {
  // f_rotated(R d) == f(d) for every direction.
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d R = random_rotation(rng);
    const ShRotation rot = build_sh_rotation(R);
    const auto rest = random_rest(rng);
    const Eigen::Vector3f dc(0.3f, -0.2f, 0.1f);
    const auto [dc_rot, rest_rot] = apply_sh_rotation(rot, dc, rest);
    EXPECT_EQ(dc_rot, dc);
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector3d d = random_unit(rng);
      for (int c = 0; c < 3; ++c) {
        const double before = eval_sh(dc[c], rest.data() + c * 15, 3, d);
        const double after = eval_sh(dc_rot[c], rest_rot.data() + c * 15, 3, (R * d).normalized());
        EXPECT_NEAR(after, before, 1e-5);
      }
    }
  }
}

TEST(ShRotation, RejectsNonRotation) {
  EXPECT_THROW(build_sh_rotation(2.0 * Eigen::Matrix3d::Identity()), Error);
}

}  // namespace
}  // namespace gsreg
