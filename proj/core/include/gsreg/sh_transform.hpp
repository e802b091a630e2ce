#pragma once

#include <array>
#include <utility>

#include <Eigen/Core>

#include "gsreg/gs_model.hpp"

namespace gsreg {

inline constexpr int kMaxShDegree = 3;

// Real SH basis of one degree in the splatting convention (m = -l..l, with
// the (-1)^m sign folded in). `direction` must be unit length to 1e-9.
Eigen::VectorXd eval_sh_basis(int degree, const Eigen::Vector3d& direction);

// Full expansion for one colour channel: dc * Y00 + sum_l rest_l . Y_l(d),
// with rest laid out as the 15 coefficients of degrees 1..3.
double eval_sh(double dc, const float* rest15, int max_degree, const Eigen::Vector3d& direction);

// Per-degree linear maps acting on SH coefficient vectors so that the
// rotated expansion evaluated at R*d equals the original evaluated at d.
struct ShRotation {
  std::array<Eigen::MatrixXd, kMaxShDegree + 1> blocks;

  static ShRotation identity();
};

// Sample-and-solve construction: for each degree l pick 2l+1 fixed unit
// vectors u_k, stack Q = [SH_l(u_k)], rotate the vectors and solve
// block_l = [SH_l(R u_k)] * pinv(Q). The pseudo-inverse uses an SVD with a
// relative singular-value cutoff of 1e-10; a numerically rank-deficient Q is
// reported as kConstruction.
ShRotation build_sh_rotation(const Eigen::Matrix3d& R);

// The fixed sample directions used for degree l: the first 2l+1 points of a
// (2l+3)-point Fibonacci lattice.
const std::vector<Eigen::Vector3d>& sh_sample_directions(int degree);

// Rotates every degree block of each colour channel; the DC term is returned
// unchanged.
std::pair<Eigen::Vector3f, std::array<float, kShRestCount>> apply_sh_rotation(
    const ShRotation& rot, const Eigen::Vector3f& sh_dc,
    const std::array<float, kShRestCount>& sh_rest);

}  // namespace gsreg
