#include "gsreg/sh_transform.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "gsreg/error.hpp"

namespace gsreg {
namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};
constexpr double kPinvCutoff = 1e-10;

// Offset into a 15-coefficient channel block where degree l starts.
constexpr int degree_offset(int l) { return l * l - 1; }

// First n points of a Fibonacci lattice with `lattice` points. Taking a strict
// prefix avoids antipodal pairs, which would make odd-degree samples dependent.
std::vector<Eigen::Vector3d> fibonacci_sphere(int n, int lattice) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / lattice;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& Q, int degree) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kPinvCutoff * sv[0];
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) {
      inv[i] = 1.0 / sv[i];
    } else {
      fail(ErrorCode::kConstruction,
           "SH sample matrix for degree " + std::to_string(degree) +
               " is rank deficient; choose a different set of sample directions");
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

Eigen::VectorXd eval_sh_basis(int degree, const Eigen::Vector3d& d) {
  if (degree < 0 || degree > kMaxShDegree) {
    fail(ErrorCode::kInvalidArgument, "SH degree must lie in [0, 3]");
  }
  if (std::abs(d.norm() - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidArgument, "SH direction must be a unit vector");
  }
  const double x = d.x(), y = d.y(), z = d.z();
  Eigen::VectorXd out(2 * degree + 1);
  switch (degree) {
    case 0:
      out << kShC0;
      break;
    case 1:
      out << -kC1 * y, kC1 * z, -kC1 * x;
      break;
    case 2: {
      const double xx = x * x, yy = y * y, zz = z * z;
      out << kC2[0] * x * y, kC2[1] * y * z, kC2[2] * (2.0 * zz - xx - yy), kC2[3] * x * z,
          kC2[4] * (xx - yy);
      break;
    }
    case 3: {
      const double xx = x * x, yy = y * y, zz = z * z;
      out << kC3[0] * y * (3.0 * xx - yy), kC3[1] * x * y * z, kC3[2] * y * (4.0 * zz - xx - yy),
          kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy), kC3[4] * x * (4.0 * zz - xx - yy),
          kC3[5] * z * (xx - yy), kC3[6] * x * (xx - 3.0 * yy);
      break;
    }
  }
  return out;
}

double eval_sh(double dc, const float* rest15, int max_degree, const Eigen::Vector3d& direction) {
  double value = kShC0 * dc;
  for (int l = 1; l <= max_degree; ++l) {
    const Eigen::VectorXd basis = eval_sh_basis(l, direction);
    for (int m = 0; m < 2 * l + 1; ++m) value += rest15[degree_offset(l) + m] * basis[m];
  }
  return value;
}

ShRotation ShRotation::identity() {
  ShRotation rot;
  for (int l = 0; l <= kMaxShDegree; ++l) {
    rot.blocks[l] = Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1);
  }
  return rot;
}

const std::vector<Eigen::Vector3d>& sh_sample_directions(int degree) {
  static const std::array<std::vector<Eigen::Vector3d>, kMaxShDegree + 1> kSamples = {
      fibonacci_sphere(1, 3), fibonacci_sphere(3, 5), fibonacci_sphere(5, 7), fibonacci_sphere(7, 9)};
  return kSamples.at(degree);
}

ShRotation build_sh_rotation(const Eigen::Matrix3d& R) {
  if (!is_rotation(R, 1e-6)) {
    fail(ErrorCode::kInvalidArgument, "SH rotation requires an orthonormal rotation matrix");
  }
  ShRotation rot;
  for (int l = 0; l <= kMaxShDegree; ++l) {
    const int n = 2 * l + 1;
    const auto& samples = sh_sample_directions(l);
    Eigen::MatrixXd Q(n, n);
    Eigen::MatrixXd Q_rotated(n, n);
    for (int k = 0; k < n; ++k) {
      Q.col(k) = eval_sh_basis(l, samples[k]);
      // Only the rotation acts on view directions.
      Q_rotated.col(k) = eval_sh_basis(l, (R * samples[k]).normalized());
    }
    rot.blocks[l] = Q_rotated * pinv(Q, l);
  }
  return rot;
}

std::pair<Eigen::Vector3f, std::array<float, kShRestCount>> apply_sh_rotation(
    const ShRotation& rot, const Eigen::Vector3f& sh_dc,
    const std::array<float, kShRestCount>& sh_rest) {
  std::array<float, kShRestCount> out{};
  for (int c = 0; c < 3; ++c) {
    for (int l = 1; l <= kMaxShDegree; ++l) {
      const int n = 2 * l + 1;
      const int base = c * 15 + degree_offset(l);
      Eigen::VectorXd coeffs(n);
      for (int m = 0; m < n; ++m) coeffs[m] = sh_rest[base + m];
      const Eigen::VectorXd rotated = rot.blocks[l] * coeffs;
      for (int m = 0; m < n; ++m) out[base + m] = static_cast<float>(rotated[m]);
    }
  }
  return {sh_dc, out};
}

}  // namespace gsreg
