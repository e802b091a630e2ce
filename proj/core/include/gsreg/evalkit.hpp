#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsreg/geometry.hpp"
#include "gsreg/image.hpp"

namespace gsreg {

inline constexpr double kSuccessRreDeg = 15.0;

// Geodesic angle between two rotations, degrees in [0, 180].
double rre(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt);

struct TranslationError {
  double value = 0.0;
  bool absolute = false;  // |T_gt| too small to normalise by
};
TranslationError rte(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt,
                     double epsilon = 1e-12);

double rse(double s_est, double s_gt);

// Mean |d_est - d_gt| / d_gt over pixels valid in both maps.
double rde(const DepthMap& depth_est, const DepthMap& depth_gt);

struct MetricReport {
  double rre = 0.0;
  double rte = 0.0;
  bool rte_absolute = false;
  double rse = 0.0;
  std::optional<double> rde;
  bool success = false;
};

MetricReport evaluate(const Sim3& estimate, const Sim3& ground_truth,
                      double success_rre_deg = kSuccessRreDeg);
std::string report_to_json(const MetricReport& report);

struct BatchRow {
  std::string scene;
  MetricReport report;
  double seconds = 0.0;
};
// Header: scene,rre,rte,rse,rde,success,seconds
std::string batch_to_csv(const std::vector<BatchRow>& rows);

}  // namespace gsreg
