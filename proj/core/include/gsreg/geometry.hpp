#pragma once

#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gsreg {

// Similarity transform p -> s * R * p + T.
struct Sim3 {
  double s = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d T = Eigen::Vector3d::Zero();

  static Sim3 identity() { return {}; }

  // Validating constructor: s > 0 and R a proper rotation to `tol`.
  static Sim3 create(double s, const Eigen::Matrix3d& R, const Eigen::Vector3d& T,
                     double tol = 1e-9);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return s * (R * p) + T; }
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return apply(p); }

  // (this * other)(p) == this(other(p))
  Sim3 operator*(const Sim3& other) const;
  Sim3 inverse() const;

  bool is_valid(double tol = 1e-9) const;
};

inline Sim3 compose(const Sim3& outer, const Sim3& inner) { return outer * inner; }
inline Sim3 inverse(const Sim3& x) { return x.inverse(); }

bool is_rotation(const Eigen::Matrix3d& R, double tol);

// Nearest rotation in Frobenius norm (SVD projection with det = +1).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M);

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad);

// Uniformly distributed rotation (Haar measure).
Eigen::Matrix3d random_rotation(std::mt19937_64& rng);

// Unit quaternion stored as (w, x, y, z) in single precision, matching the
// splat file layout.
Eigen::Matrix3d quat_wxyz_to_matrix(const Eigen::Vector4f& q);
Eigen::Vector4f matrix_to_quat_wxyz(const Eigen::Matrix3d& R);

// Pinhole camera; `rotation` maps camera axes to world axes (x right, y down,
// z forward) and `translation` is the camera centre in world coordinates.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  const Eigen::Vector3d& center() const { return translation; }
  Eigen::Vector3d forward() const { return rotation.col(2); }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const {
    return rotation * p_cam + translation;
  }

  // Same pose with intrinsics rescaled to a new image size.
  CameraPose resized(int new_width, int new_height) const;

  // Throws kInvalidArgument when the rotation is not orthonormal (1e-6) or the
  // focal lengths are not positive.
  void validate() const;
};

}  // namespace gsreg
