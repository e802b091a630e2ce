#include "gsreg/pipeline.hpp"

#include <chrono>
#include <set>

#include <json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {
namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kFormat, "config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) fail(ErrorCode::kFormat, "config: unknown key \"" + where + key + "\"");
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json matrix_json(const Eigen::Matrix3d& R) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(R(r, c));
  }
  return rot;
}

json sim3_json(const Sim3& x) {
  return {{"scale", x.s},
          {"rotation", matrix_json(x.R)},
          {"translation", {x.T.x(), x.T.y(), x.T.z()}}};
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kInvalidArgument, std::string("config: ") + what);
  };
  require(opacity_threshold > 0.0 && opacity_threshold < 1.0, "opacity_threshold must lie in (0, 1)");
  require(max_points > 0, "max_points must be positive");
  require(coarse.voxel_fraction > 0.0 && coarse.voxel_fraction < 1.0,
          "coarse.voxel_fraction must lie in (0, 1)");
  require(coarse.normal_k >= 3, "coarse.normal_k must be at least 3");
  require(coarse.descriptor_radius_factor > 0.0, "coarse.descriptor_radius_factor must be positive");
  require(coarse.ratio > 0.0 && coarse.ratio <= 1.0, "coarse.ratio must lie in (0, 1]");
  require(coarse.ransac_iterations > 0, "coarse.ransac_iterations must be positive");
  require(coarse.ransac_candidates > 0, "coarse.ransac_candidates must be positive");
  require(coarse.inlier_tol_factor > 0.0, "coarse.inlier_tol_factor must be positive");
  require(coarse.icp_tol >= 0.0, "coarse.icp_tol must be non-negative");
  require(overlap.subset_size > 0 && overlap.top_k > 0 && overlap.neighbors >= 2,
          "overlap sizes must be positive (neighbors >= 2)");
  require(overlap.width > 0 && overlap.height > 0, "overlap resolution must be positive");
  require(overlap.depth_tolerance > 0.0, "overlap.depth_tolerance must be positive");
  require(overlap.min_covisibility >= 0.0 && overlap.min_covisibility <= 1.0,
          "overlap.min_covisibility must lie in [0, 1]");
  require(fine.width >= 8 && fine.height >= 8, "fine resolution must be at least 8x8");
  require(fine.depth_hypotheses >= 2, "fine.depth_hypotheses must be at least 2");
  require(fine.temperature > 0.0, "fine.temperature must be positive");
  require(fine.ncc_window >= 1 && fine.ncc_window % 2 == 1, "fine.ncc_window must be odd");
  require(fine.voxel_fraction > 0.0 && fine.voxel_fraction < 1.0,
          "fine.voxel_fraction must lie in (0, 1)");
  require(fine.normal_k >= 3, "fine.normal_k must be at least 3");
  require(fine.ratio > 0.0 && fine.ratio <= 1.0, "fine.ratio must lie in (0, 1]");
  require(fine.match_gate_fraction > 0.0, "fine.match_gate_fraction must be positive");
  require(fine.ransac_iterations > 0, "fine.ransac_iterations must be positive");
  require(fine.ransac_candidates > 0, "fine.ransac_candidates must be positive");
  require(fine.icp_initial_gate_fraction > 0.0 && fine.icp_final_gate_factor > 0.0,
          "fine ICP gates must be positive");
}

PipelineConfig parse_pipeline_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  reject_unknown(j, {"opacity_threshold", "max_points", "seed", "coarse_only", "coarse", "overlap",
                     "fine"},
                 "");
  try {
    read(j, "opacity_threshold", cfg.opacity_threshold);
    read(j, "max_points", cfg.max_points);
    read(j, "seed", cfg.seed);
    read(j, "coarse_only", cfg.coarse_only);
    if (j.contains("coarse")) {
      const json& c = j.at("coarse");
      reject_unknown(c, {"voxel_fraction", "normal_k", "descriptor_radius_factor", "ratio",
                         "ransac_iterations", "ransac_candidates", "inlier_tol_factor", "icp_max_iters",
                         "icp_tol"},
                     "coarse.");
      read(c, "voxel_fraction", cfg.coarse.voxel_fraction);
      read(c, "normal_k", cfg.coarse.normal_k);
      read(c, "descriptor_radius_factor", cfg.coarse.descriptor_radius_factor);
      read(c, "ratio", cfg.coarse.ratio);
      read(c, "ransac_iterations", cfg.coarse.ransac_iterations);
      read(c, "ransac_candidates", cfg.coarse.ransac_candidates);
      read(c, "inlier_tol_factor", cfg.coarse.inlier_tol_factor);
      read(c, "icp_max_iters", cfg.coarse.icp_max_iters);
      read(c, "icp_tol", cfg.coarse.icp_tol);
    }
    if (j.contains("overlap")) {
      const json& o = j.at("overlap");
      reject_unknown(o, {"subset_size", "top_k", "neighbors", "width", "height", "depth_tolerance",
                         "min_covisibility"},
                     "overlap.");
      read(o, "subset_size", cfg.overlap.subset_size);
      read(o, "top_k", cfg.overlap.top_k);
      read(o, "neighbors", cfg.overlap.neighbors);
      read(o, "width", cfg.overlap.width);
      read(o, "height", cfg.overlap.height);
      read(o, "depth_tolerance", cfg.overlap.depth_tolerance);
      read(o, "min_covisibility", cfg.overlap.min_covisibility);
    }
    if (j.contains("fine")) {
      const json& f = j.at("fine");
      reject_unknown(f, {"width", "height", "depth_hypotheses", "temperature", "ncc_window",
                         "voxel_fraction", "normal_k", "descriptor_radius_factor", "ratio",
                         "match_gate_fraction", "ransac_iterations", "ransac_candidates", "inlier_tol_factor",
                         "icp_initial_gate_fraction", "icp_final_gate_factor", "icp_max_iters",
                         "icp_tol"},
                     "fine.");
      read(f, "width", cfg.fine.width);
      read(f, "height", cfg.fine.height);
      read(f, "depth_hypotheses", cfg.fine.depth_hypotheses);
      read(f, "temperature", cfg.fine.temperature);
      read(f, "ncc_window", cfg.fine.ncc_window);
      read(f, "voxel_fraction", cfg.fine.voxel_fraction);
      read(f, "normal_k", cfg.fine.normal_k);
      read(f, "descriptor_radius_factor", cfg.fine.descriptor_radius_factor);
      read(f, "ratio", cfg.fine.ratio);
      read(f, "match_gate_fraction", cfg.fine.match_gate_fraction);
      read(f, "ransac_iterations", cfg.fine.ransac_iterations);
      read(f, "ransac_candidates", cfg.fine.ransac_candidates);
      read(f, "inlier_tol_factor", cfg.fine.inlier_tol_factor);
      read(f, "icp_initial_gate_fraction", cfg.fine.icp_initial_gate_fraction);
      read(f, "icp_final_gate_factor", cfg.fine.icp_final_gate_factor);
      read(f, "icp_max_iters", cfg.fine.icp_max_iters);
      read(f, "icp_tol", cfg.fine.icp_tol);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  const json j = {
      {"opacity_threshold", cfg.opacity_threshold},
      {"max_points", cfg.max_points},
      {"seed", cfg.seed},
      {"coarse_only", cfg.coarse_only},
      {"coarse",
       {{"voxel_fraction", cfg.coarse.voxel_fraction},
        {"normal_k", cfg.coarse.normal_k},
        {"descriptor_radius_factor", cfg.coarse.descriptor_radius_factor},
        {"ratio", cfg.coarse.ratio},
        {"ransac_iterations", cfg.coarse.ransac_iterations},
        {"ransac_candidates", cfg.coarse.ransac_candidates},
        {"inlier_tol_factor", cfg.coarse.inlier_tol_factor},
        {"icp_max_iters", cfg.coarse.icp_max_iters},
        {"icp_tol", cfg.coarse.icp_tol}}},
      {"overlap",
       {{"subset_size", cfg.overlap.subset_size},
        {"top_k", cfg.overlap.top_k},
        {"neighbors", cfg.overlap.neighbors},
        {"width", cfg.overlap.width},
        {"height", cfg.overlap.height},
        {"depth_tolerance", cfg.overlap.depth_tolerance},
        {"min_covisibility", cfg.overlap.min_covisibility}}},
      {"fine",
       {{"width", cfg.fine.width},
        {"height", cfg.fine.height},
        {"depth_hypotheses", cfg.fine.depth_hypotheses},
        {"temperature", cfg.fine.temperature},
        {"ncc_window", cfg.fine.ncc_window},
        {"voxel_fraction", cfg.fine.voxel_fraction},
        {"normal_k", cfg.fine.normal_k},
        {"descriptor_radius_factor", cfg.fine.descriptor_radius_factor},
        {"ratio", cfg.fine.ratio},
        {"match_gate_fraction", cfg.fine.match_gate_fraction},
        {"ransac_iterations", cfg.fine.ransac_iterations},
        {"ransac_candidates", cfg.fine.ransac_candidates},
        {"inlier_tol_factor", cfg.fine.inlier_tol_factor},
        {"icp_initial_gate_fraction", cfg.fine.icp_initial_gate_fraction},
        {"icp_final_gate_factor", cfg.fine.icp_final_gate_factor},
        {"icp_max_iters", cfg.fine.icp_max_iters},
        {"icp_tol", cfg.fine.icp_tol}}}};
  return j.dump(2);
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kCoarse: return "coarse";
    case Stage::kFine: return "fine";
    case Stage::kFallback: return "fallback";
  }
  return "unknown";
}

RegistrationEstimate run_coarse_stage(const GaussianModel& a, const GaussianModel& b,
                                      const PipelineConfig& cfg, std::size_t* points_a,
                                      std::size_t* points_b) {
  const ColoredPointCloud pa =
      extract_confident_points(a, cfg.opacity_threshold, cfg.max_points, cfg.seed);
  const ColoredPointCloud pb =
      extract_confident_points(b, cfg.opacity_threshold, cfg.max_points, cfg.seed + 1);
  if (points_a) *points_a = pa.size();
  if (points_b) *points_b = pb.size();
  CoarseConfig cc = cfg.coarse;
  cc.seed = cfg.seed;
  return coarse_register(pa, pb, cc);
}

RegistrationReport run_fine_stage(const GaussianModel& a, const GaussianModel& b,
                                  const RegistrationEstimate& coarse, const PipelineConfig& cfg) {
  RegistrationReport report;
  report.coarse = coarse;
  report.transform = coarse.transform;
  report.stage = Stage::kFallback;
  const auto start = std::chrono::steady_clock::now();
  try {
    report.overlap = select_overlap_cameras(a, b, coarse.transform, cfg.overlap);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientOverlap) throw;
    report.insufficient_overlap = true;
    report.note = e.what();
    report.fine_seconds = seconds_since(start);
    return report;
  }
  FineConfig fc = cfg.fine;
  fc.seed = cfg.seed;
  report.fine = fine_register(a, b, report.overlap->cameras_a, report.overlap->cameras_b,
                              coarse.transform, fc);
  if (report.fine->estimate.status == RegistrationStatus::kOk) {
    report.transform = report.fine->estimate.transform;
    report.stage = Stage::kFine;
  } else {
    report.note = "fine registration failed; keeping the coarse transform";
  }
  report.fine_seconds = seconds_since(start);
  return report;
}

RegistrationReport register_models(const GaussianModel& a, const GaussianModel& b,
                                   const PipelineConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::size_t na = 0, nb = 0;
  const RegistrationEstimate coarse = run_coarse_stage(a, b, cfg, &na, &nb);
  const double coarse_seconds = seconds_since(start);

  RegistrationReport report;
  if (cfg.coarse_only) {
    report.coarse = coarse;
    report.transform = coarse.transform;
    report.stage = Stage::kCoarse;
  } else {
    report = run_fine_stage(a, b, coarse, cfg);
  }
  report.points_a = na;
  report.points_b = nb;
  report.coarse_seconds = coarse_seconds;
  return report;
}

std::string sim3_to_json(const Sim3& x) { return sim3_json(x).dump(2); }

std::string registration_to_json(const RegistrationReport& report, bool with_timings) {
  json j = sim3_json(report.transform);
  j["stage"] = std::string(to_string(report.stage));
  json diag = {{"points_a", report.points_a},
               {"points_b", report.points_b},
               {"insufficient_overlap", report.insufficient_overlap},
               {"coarse",
                {{"transform", sim3_json(report.coarse.transform)},
                 {"inlier_count", report.coarse.inlier_count},
                 {"rmse", report.coarse.rmse},
                 {"status", std::string(to_string(report.coarse.status))}}}};
  if (with_timings) {
    diag["coarse"]["seconds"] = report.coarse_seconds;
    diag["seconds"] = report.coarse_seconds + report.fine_seconds;
  }
  if (!report.note.empty()) diag["note"] = report.note;
  if (report.overlap) {
    diag["overlap"] = {{"cameras_a", report.overlap->indices_a},
                       {"cameras_b", report.overlap->indices_b},
                       {"best_pair", {report.overlap->best.index_a, report.overlap->best.index_b}},
                       {"best_covisibility", report.overlap->best.covisibility.value_or(0.0)}};
  }
  if (report.fine) {
    diag["fine"] = {{"inlier_count", report.fine->estimate.inlier_count},
                    {"rmse", report.fine->estimate.rmse},
                    {"status", std::string(to_string(report.fine->estimate.status))},
                    {"points_a", report.fine->points_a},
                    {"points_b", report.fine->points_b}};
    if (with_timings) diag["fine"]["seconds"] = report.fine_seconds;
  }
  j["diagnostics"] = std::move(diag);
  return j.dump(2);
}

}  // namespace gsreg
