#pragma once

#include <cstdint>
#include <vector>

#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"
#include "gsreg/sh_transform.hpp"

namespace gsreg {

// Position -> sRp + T, orientation -> R * rot, log_scale += log s, SH
// coefficients rotated by `sh_rot` (built from X.R); opacity untouched.
Gaussian transform_gaussian(const Gaussian& g, const Sim3& x, const ShRotation& sh_rot);

// All Gaussians share one SH rotation; cameras move with the scene.
GaussianModel transform_model(const GaussianModel& model, const Sim3& x);

struct MergePartition {
  std::vector<std::uint8_t> keep_a;
  std::vector<std::uint8_t> keep_b;
};

// keep a_i iff |a_i - c_A| <= |a_i - c_B|; keep b_j iff |b_j - c_B| < |b_j - c_A|.
MergePartition merge_partition(const GaussianModel& a, const GaussianModel& b_in_a,
                               const Eigen::Vector3d& center_a, const Eigen::Vector3d& center_b);

// Center-based merge of two models in the same frame. An empty input returns
// the other model. Throws kInvalidArgument when SH degrees differ.
GaussianModel merge_models(const GaussianModel& a, const GaussianModel& b_in_a);

}  // namespace gsreg
