#include "gsreg/overlap_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gsreg/error.hpp"
#include "gsreg/splat_render.hpp"

namespace gsreg {
namespace {

double visible_fraction(const CameraPose& cam_a, const DepthMap& depth_a, const CameraPose& cam_b,
                        const DepthMap& depth_b, double tolerance, bool& any_valid) {
  std::size_t valid = 0;
  std::size_t seen = 0;
  for (int y = 0; y < depth_a.height; ++y) {
    for (int x = 0; x < depth_a.width; ++x) {
      const double d = depth_a.at(x, y);
      if (!(d > 0.0)) continue;
      ++valid;
      const Eigen::Vector3d p = backproject({x + 0.5, y + 0.5}, d, cam_a);
      const auto proj = project_point(p, cam_b);
      if (!proj) continue;
      const double u = std::floor(proj->pixel.x());
      const double v = std::floor(proj->pixel.y());
      if (u < 0 || v < 0 || u >= depth_b.width || v >= depth_b.height) continue;
      const double db = depth_b.at(static_cast<int>(u), static_cast<int>(v));
      if (db > 0.0 && std::abs(proj->depth - db) <= tolerance * db) ++seen;
    }
  }
  any_valid = any_valid || valid > 0;
  return valid == 0 ? 0.0 : static_cast<double>(seen) / static_cast<double>(valid);
}

}  // namespace

std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n) {
  std::vector<std::size_t> out;
  if (count == 0 || n == 0) return out;
  if (count <= n) {
    out.resize(count);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(i * count / n);
  return out;
}

std::vector<CameraPose> subsample_cameras(const std::vector<CameraPose>& cams, std::size_t n) {
  std::vector<CameraPose> out;
  for (std::size_t i : subsample_indices(cams.size(), n)) out.push_back(cams[i]);
  return out;
}

CameraPose apply_sim3_to_camera(const CameraPose& cam, const Sim3& x) {
  CameraPose out = cam;
  out.rotation = x.R * cam.rotation;
  out.translation = x.apply(cam.translation);
  return out;
}

std::vector<CameraPairScore> orientation_topk(const std::vector<CameraPose>& a,
                                              const std::vector<CameraPose>& b_aligned,
                                              std::size_t k) {
  std::vector<CameraPairScore> all;
  all.reserve(a.size() * b_aligned.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Eigen::Vector3d fa = a[i].forward();
    for (std::size_t j = 0; j < b_aligned.size(); ++j) {
      const double c = std::clamp(fa.dot(b_aligned[j].forward()), -1.0, 1.0);
      all.push_back({i, j, c, std::nullopt});
    }
  }
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const CameraPairScore& x, const CameraPairScore& y) {
                      if (x.orientation_cos != y.orientation_cos) {
                        return x.orientation_cos > y.orientation_cos;
                      }
                      if (x.index_a != y.index_a) return x.index_a < y.index_a;
                      return x.index_b < y.index_b;
                    });
  all.resize(keep);
  return all;
}

double covisibility_from_depth(const CameraPose& cam_a, const DepthMap& depth_a,
                               const CameraPose& cam_b, const DepthMap& depth_b,
                               double tolerance) {
  const CameraPose ca = cam_a.resized(depth_a.width, depth_a.height);
  const CameraPose cb = cam_b.resized(depth_b.width, depth_b.height);
  bool any_valid = false;
  const double ab = visible_fraction(ca, depth_a, cb, depth_b, tolerance, any_valid);
  const double ba = visible_fraction(cb, depth_b, ca, depth_a, tolerance, any_valid);
  return any_valid ? 0.5 * (ab + ba) : 0.0;
}

double covisibility(const CameraPose& cam_a, const CameraPose& cam_b, const GaussianModel& model_a,
                    const GaussianModel& model_b_aligned, int width, int height,
                    double tolerance) {
  const DepthMap da = render_depth(model_a, cam_a, width, height);
  const DepthMap db = render_depth(model_b_aligned, cam_b, width, height);
  return covisibility_from_depth(cam_a, da, cam_b, db, tolerance);
}

CovisibilityScorer::CovisibilityScorer(const GaussianModel& model_a, const GaussianModel& model_b,
                                       const Sim3& coarse, const OverlapConfig& cfg)
    : a_(model_a),
      b_(model_b),
      coarse_(coarse),
      cfg_(cfg),
      cache_a_(model_a.cameras.size()),
      cache_b_(model_b.cameras.size()) {}

const DepthMap& CovisibilityScorer::depth_a(std::size_t i) {
  auto& slot = cache_a_.at(i);
  if (!slot) slot = render_depth(a_, a_.cameras[i], cfg_.width, cfg_.height);
  return *slot;
}

const DepthMap& CovisibilityScorer::depth_b(std::size_t j) {
  auto& slot = cache_b_.at(j);
  if (!slot) {
    DepthMap d = render_depth(b_, b_.cameras[j], cfg_.width, cfg_.height);
    for (double& v : d.data) v *= coarse_.s;
    slot = std::move(d);
  }
  return *slot;
}

CameraPose CovisibilityScorer::aligned_b(std::size_t camera_b) const {
  return apply_sim3_to_camera(b_.cameras.at(camera_b), coarse_);
}

double CovisibilityScorer::score(std::size_t camera_a, std::size_t camera_b) {
  return covisibility_from_depth(a_.cameras.at(camera_a), depth_a(camera_a), aligned_b(camera_b),
                                 depth_b(camera_b), cfg_.depth_tolerance);
}

OverlapSelection select_overlap_cameras(const GaussianModel& model_a, const GaussianModel& model_b,
                                        const Sim3& coarse, const OverlapConfig& cfg) {
  if (model_a.cameras.empty() || model_b.cameras.empty()) {
    fail(ErrorCode::kInsufficientOverlap, "overlap selection needs cameras on both models");
  }
  if (cfg.top_k == 0 || cfg.subset_size == 0 || cfg.neighbors == 0) {
    fail(ErrorCode::kInvalidArgument, "overlap selection sizes must be positive");
  }
  const auto sub_a = subsample_indices(model_a.cameras.size(), cfg.subset_size);
  const auto sub_b = subsample_indices(model_b.cameras.size(), cfg.subset_size);
  std::vector<CameraPose> cams_a, cams_b_aligned;
  for (std::size_t i : sub_a) cams_a.push_back(model_a.cameras[i]);
  for (std::size_t j : sub_b) cams_b_aligned.push_back(apply_sim3_to_camera(model_b.cameras[j], coarse));

  CovisibilityScorer scorer(model_a, model_b, coarse, cfg);
  OverlapSelection out;
  for (CameraPairScore pair : orientation_topk(cams_a, cams_b_aligned, cfg.top_k)) {
    pair.index_a = sub_a[pair.index_a];
    pair.index_b = sub_b[pair.index_b];
    pair.covisibility = scorer.score(pair.index_a, pair.index_b);
    out.scored.push_back(pair);
  }
  // First maximum in orientation order wins ties.
  const auto best = std::max_element(out.scored.begin(), out.scored.end(),
                                     [](const CameraPairScore& x, const CameraPairScore& y) {
                                       return *x.covisibility < *y.covisibility;
                                     });
  out.best = *best;
  if (*out.best.covisibility < cfg.min_covisibility) {
    fail(ErrorCode::kInsufficientOverlap,
         "best camera pair covisibility " + std::to_string(*out.best.covisibility) +
             " is below " + std::to_string(cfg.min_covisibility));
  }

  auto nearest = [&](const std::vector<CameraPose>& cams, std::size_t ref) {
    std::vector<std::size_t> idx(cams.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Eigen::Vector3d c = cams[ref].center();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      const double dx = (cams[x].center() - c).squaredNorm();
      const double dy = (cams[y].center() - c).squaredNorm();
      if (dx != dy) return dx < dy;
      return x < y;
    });
    // The reference itself always comes first.
    std::erase(idx, ref);
    idx.insert(idx.begin(), ref);
    idx.resize(std::min(idx.size(), cfg.neighbors));
    return idx;
  };
  out.indices_a = nearest(model_a.cameras, out.best.index_a);
  out.indices_b = nearest(model_b.cameras, out.best.index_b);
  for (std::size_t i : out.indices_a) out.cameras_a.push_back(model_a.cameras[i]);
  for (std::size_t j : out.indices_b) out.cameras_b.push_back(model_b.cameras[j]);
  return out;
}

std::string pair_scores_to_json(const std::vector<CameraPairScore>& scores) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CameraPairScore& s : scores) {
    nlohmann::json j = {{"index_a", s.index_a},
                        {"index_b", s.index_b},
                        {"orientation_cos", s.orientation_cos}};
    j["covisibility"] = s.covisibility ? nlohmann::json(*s.covisibility) : nlohmann::json();
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace gsreg
