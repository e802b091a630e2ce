#include "gsreg/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "gsreg/error.hpp"

namespace gsreg {

Sim3 Sim3::create(double s, const Eigen::Matrix3d& R, const Eigen::Vector3d& T,
                  double tol) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    fail(ErrorCode::kInvalidArgument, "Sim3 scale must be positive and finite");
  }
  if (!is_rotation(R, tol)) {
    fail(ErrorCode::kInvalidArgument, "Sim3 rotation is not orthonormal with det +1");
  }
  if (!T.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "Sim3 translation is not finite");
  }
  return Sim3{s, R, T};
}

Sim3 Sim3::operator*(const Sim3& other) const {
  Sim3 out;
  out.s = s * other.s;
  out.R = R * other.R;
  out.T = s * (R * other.T) + T;
  return out;
}

Sim3 Sim3::inverse() const {
  Sim3 out;
  out.s = 1.0 / s;
  out.R = R.transpose();
  out.T = -(out.s * (out.R * T));
  return out;
}

bool Sim3::is_valid(double tol) const {
  return s > 0.0 && std::isfinite(s) && is_rotation(R, tol) && T.allFinite();
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  // Normalised 4D Gaussian sample is uniform on S^3.
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Eigen::Matrix3d quat_wxyz_to_matrix(const Eigen::Vector4f& q) {
  Eigen::Quaterniond qd(q[0], q[1], q[2], q[3]);
  qd.normalize();
  return qd.toRotationMatrix();
}

Eigen::Vector4f matrix_to_quat_wxyz(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return Eigen::Vector4f(static_cast<float>(q.w()), static_cast<float>(q.x()),
                         static_cast<float>(q.y()), static_cast<float>(q.z()));
}

CameraPose CameraPose::resized(int new_width, int new_height) const {
  CameraPose out = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  out.fx = fx * sx;
  out.fy = fy * sy;
  out.cx = cx * sx;
  out.cy = cy * sy;
  out.width = new_width;
  out.height = new_height;
  return out;
}

void CameraPose::validate() const {
  if (!is_rotation(rotation, 1e-6)) {
    fail(ErrorCode::kInvalidArgument, "camera rotation is not orthonormal");
  }
  if (!(fx > 0.0) || !(fy > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    fail(ErrorCode::kInvalidArgument, "camera resolution must be positive");
  }
  if (!translation.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "camera translation is not finite");
  }
}

}  // namespace gsreg
