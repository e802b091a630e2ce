#include "gsreg/gs_model.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <random>

#include "gsreg/error.hpp"

namespace gsreg {

double Gaussian::opacity() const { return sigmoid(opacity_logit); }

void ColoredPointCloud::reserve(std::size_t n) {
  points.reserve(n);
  colors.reserve(n);
  opacities.reserve(n);
}

void ColoredPointCloud::push_back(const Eigen::Vector3d& p, const Eigen::Vector3d& c,
                                  double opacity) {
  points.push_back(p);
  colors.push_back(c);
  opacities.push_back(opacity);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::Vector3d sh_dc_to_color(const Eigen::Vector3d& sh_dc) {
  return (Eigen::Vector3d::Constant(0.5) + kShC0 * sh_dc).cwiseMax(0.0).cwiseMin(1.0);
}

ColoredPointCloud extract_confident_points(const GaussianModel& model, double opacity_threshold,
                                           std::size_t max_points, std::uint64_t seed) {
  if (!(opacity_threshold > 0.0 && opacity_threshold < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "opacity threshold must lie in (0, 1)");
  }
  if (max_points == 0) fail(ErrorCode::kInvalidArgument, "max_points must be positive");

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < model.gaussians.size(); ++i) {
    if (model.gaussians[i].opacity() > opacity_threshold) survivors.push_back(i);
  }
  if (survivors.empty()) {
    fail(ErrorCode::kEmptyCloud, "no Gaussian exceeds the opacity threshold");
  }
  if (survivors.size() > max_points) {
    std::vector<std::size_t> picked;
    picked.reserve(max_points);
    std::mt19937_64 rng(seed);
    std::sample(survivors.begin(), survivors.end(), std::back_inserter(picked), max_points, rng);
    survivors = std::move(picked);
  }

  ColoredPointCloud cloud;
  cloud.reserve(survivors.size());
  for (std::size_t i : survivors) {
    const Gaussian& g = model.gaussians[i];
    cloud.push_back(g.position_d(), sh_dc_to_color(g.sh_dc.cast<double>()), g.opacity());
  }
  return cloud;
}

Eigen::Vector3d model_center(const GaussianModel& model) {
  if (model.empty()) fail(ErrorCode::kEmptyModel, "empty model");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (const Gaussian& g : model.gaussians) {
    if (g.opacity() > kDefaultOpacityThreshold) {
      sum += g.position_d();
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::kEmptyCloud, "model has no confident Gaussians");
  return sum / static_cast<double>(count);
}

Eigen::AlignedBox3d bounding_box(const std::vector<Eigen::Vector3d>& points) {
  Eigen::AlignedBox3d box;
  for (const auto& p : points) box.extend(p);
  return box;
}

}  // namespace gsreg
