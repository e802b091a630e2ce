#include "gsreg/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {

double rre(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt) {
  if (!is_rotation(r_est, 1e-6) || !is_rotation(r_gt, 1e-6)) {
    fail(ErrorCode::kInvalidArgument, "rre expects rotation matrices");
  }
  // acos((tr - 1) / 2), evaluated as atan2(sin, cos) so that tiny angles keep
  // full precision.
  const Eigen::Matrix3d m = r_est.transpose() * r_gt;
  const double c = (m.trace() - 1.0) / 2.0;
  const Eigen::Vector3d axis(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * axis.norm(), c) * 180.0 / std::numbers::pi;
}

TranslationError rte(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt, double epsilon) {
  const double diff = (t_est - t_gt).norm();
  const double norm = t_gt.norm();
  if (norm <= epsilon) return {diff, true};
  return {diff / norm, false};
}

double rse(double s_est, double s_gt) {
  if (!(s_gt > 0.0)) fail(ErrorCode::kInvalidArgument, "ground-truth scale must be positive");
  return std::abs(s_est - s_gt) / s_gt;
}

double rde(const DepthMap& depth_est, const DepthMap& depth_gt) {
  if (depth_est.width != depth_gt.width || depth_est.height != depth_gt.height) {
    fail(ErrorCode::kInvalidArgument, "depth maps differ in resolution");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < depth_gt.size(); ++i) {
    const double e = depth_est.data[i], g = depth_gt.data[i];
    if (e > 0.0 && g > 0.0) {
      sum += std::abs(e - g) / g;
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::kInvalidArgument, "depth maps share no valid pixel");
  return sum / static_cast<double>(n);
}

MetricReport evaluate(const Sim3& estimate, const Sim3& ground_truth, double success_rre_deg) {
  MetricReport r;
  r.rre = rre(estimate.R, ground_truth.R);
  const TranslationError t = rte(estimate.T, ground_truth.T);
  r.rte = t.value;
  r.rte_absolute = t.absolute;
  r.rse = rse(estimate.s, ground_truth.s);
  r.success = r.rre < success_rre_deg;
  return r;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j = {{"rre", report.rre},
                      {"rte", report.rte},
                      {"rte_absolute", report.rte_absolute},
                      {"rse", report.rse},
                      {"success", report.success}};
  j["rde"] = report.rde ? nlohmann::json(*report.rde) : nlohmann::json();
  return j.dump(2);
}

std::string batch_to_csv(const std::vector<BatchRow>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "scene,rre,rte,rse,rde,success,seconds\n";
  for (const BatchRow& row : rows) {
    out << row.scene << ',' << row.report.rre << ',' << row.report.rte << ',' << row.report.rse
        << ',';
    if (row.report.rde) out << *row.report.rde;
    out << ',' << (row.report.success ? 1 : 0) << ',' << row.seconds << '\n';
  }
  return out.str();
}

}  // namespace gsreg
