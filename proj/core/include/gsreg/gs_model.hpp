#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "gsreg/geometry.hpp"

namespace gsreg {

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr int kShRestCount = 45;
inline constexpr double kDefaultOpacityThreshold = 0.7;
inline constexpr std::size_t kDefaultMaxPoints = 30000;
inline constexpr std::uint64_t kDefaultSubsampleSeed = 0x5eed;

// One anisotropic 3D Gaussian as stored by splat trainers. Single precision
// keeps the PLY round trip bit-exact.
struct Gaussian {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  float opacity_logit = 0.0f;
  Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};  // (w, x, y, z)
  Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
  Eigen::Vector3f sh_dc = Eigen::Vector3f::Zero();
  // Degrees 1..3, channel-major: sh_rest[c * 15 + k]. Unused for degree 0.
  std::array<float, kShRestCount> sh_rest{};

  double opacity() const;
  Eigen::Vector3d position_d() const { return position.cast<double>(); }
};

struct GaussianModel {
  std::vector<Gaussian> gaussians;
  std::vector<CameraPose> cameras;
  int sh_degree = 3;

  bool empty() const { return gaussians.empty(); }
  std::size_t size() const { return gaussians.size(); }
};

struct ColoredPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;
  std::vector<double> opacities;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void reserve(std::size_t n);
  void push_back(const Eigen::Vector3d& p, const Eigen::Vector3d& c, double opacity);
};

double sigmoid(double x);
double logit(double p);

// View-independent colour: clamp(0.5 + C0 * dc, 0, 1) per channel.
Eigen::Vector3d sh_dc_to_color(const Eigen::Vector3d& sh_dc);

// Gaussians with sigmoid(opacity) > threshold, coloured by their DC term and
// uniformly subsampled (seeded) down to max_points. Throws kEmptyCloud when
// nothing survives.
ColoredPointCloud extract_confident_points(const GaussianModel& model,
                                           double opacity_threshold = kDefaultOpacityThreshold,
                                           std::size_t max_points = kDefaultMaxPoints,
                                           std::uint64_t seed = kDefaultSubsampleSeed);

// Mean position of the confident Gaussians (threshold 0.7).
Eigen::Vector3d model_center(const GaussianModel& model);

Eigen::AlignedBox3d bounding_box(const std::vector<Eigen::Vector3d>& points);

}  // namespace gsreg
