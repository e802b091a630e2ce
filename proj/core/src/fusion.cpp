#include "gsreg/fusion.hpp"

#include <cmath>

#include "gsreg/error.hpp"
#include "gsreg/overlap_select.hpp"

namespace gsreg {

Gaussian transform_gaussian(const Gaussian& g, const Sim3& x, const ShRotation& sh_rot) {
  Gaussian out = g;
  out.position = x.apply(g.position_d()).cast<float>();
  out.rotation = matrix_to_quat_wxyz(x.R * quat_wxyz_to_matrix(g.rotation));
  out.log_scale = (g.log_scale.cast<double>().array() + std::log(x.s)).matrix().cast<float>();
  const auto [dc, rest] = apply_sh_rotation(sh_rot, g.sh_dc, g.sh_rest);
  out.sh_dc = dc;
  out.sh_rest = rest;
  return out;
}

GaussianModel transform_model(const GaussianModel& model, const Sim3& x) {
  if (!x.is_valid(1e-6)) fail(ErrorCode::kInvalidArgument, "transform is not a valid Sim3");
  const ShRotation sh_rot = build_sh_rotation(x.R);
  GaussianModel out;
  out.sh_degree = model.sh_degree;
  out.gaussians.reserve(model.gaussians.size());
  for (const Gaussian& g : model.gaussians) out.gaussians.push_back(transform_gaussian(g, x, sh_rot));
  out.cameras.reserve(model.cameras.size());
  for (const CameraPose& c : model.cameras) out.cameras.push_back(apply_sim3_to_camera(c, x));
  return out;
}

MergePartition merge_partition(const GaussianModel& a, const GaussianModel& b_in_a,
                               const Eigen::Vector3d& center_a, const Eigen::Vector3d& center_b) {
  MergePartition part;
  part.keep_a.reserve(a.size());
  for (const Gaussian& g : a.gaussians) {
    const Eigen::Vector3d p = g.position_d();
    part.keep_a.push_back((p - center_a).norm() <= (p - center_b).norm() ? 1 : 0);
  }
  part.keep_b.reserve(b_in_a.size());
  for (const Gaussian& g : b_in_a.gaussians) {
    const Eigen::Vector3d p = g.position_d();
    part.keep_b.push_back((p - center_b).norm() < (p - center_a).norm() ? 1 : 0);
  }
  return part;
}

GaussianModel merge_models(const GaussianModel& a, const GaussianModel& b_in_a) {
  if (a.empty()) return b_in_a;
  if (b_in_a.empty()) return a;
  if (a.sh_degree != b_in_a.sh_degree) {
    fail(ErrorCode::kInvalidArgument, "cannot merge models with different SH degrees");
  }
  const MergePartition part = merge_partition(a, b_in_a, model_center(a), model_center(b_in_a));
  GaussianModel out;
  out.sh_degree = a.sh_degree;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (part.keep_a[i]) out.gaussians.push_back(a.gaussians[i]);
  }
  for (std::size_t j = 0; j < b_in_a.size(); ++j) {
    if (part.keep_b[j]) out.gaussians.push_back(b_in_a.gaussians[j]);
  }
  out.cameras = a.cameras;
  out.cameras.insert(out.cameras.end(), b_in_a.cameras.begin(), b_in_a.cameras.end());
  return out;
}

}  // namespace gsreg
