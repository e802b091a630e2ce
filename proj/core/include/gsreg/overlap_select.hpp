#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"
#include "gsreg/image.hpp"

namespace gsreg {

struct CameraPairScore {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double orientation_cos = 0.0;
  std::optional<double> covisibility;  // only for pairs that passed the orientation filter
};

// n evenly spaced indices into [0, count): floor(i * count / n). All indices
// when count <= n.
std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n);
std::vector<CameraPose> subsample_cameras(const std::vector<CameraPose>& cams, std::size_t n);

// Moves a camera along with the scene: centre c -> sRc + T, axes -> R * axes.
CameraPose apply_sim3_to_camera(const CameraPose& cam, const Sim3& x);

// Every (a, b) pair scored by the cosine between forward axes; the k best are
// returned, ties broken by (index_a, index_b).
std::vector<CameraPairScore> orientation_topk(const std::vector<CameraPose>& a,
                                              const std::vector<CameraPose>& b_aligned,
                                              std::size_t k);

// Fraction of the valid pixels of `depth_a` that, lifted to 3D and projected
// into camera b, land inside b's image on a pixel whose depth agrees within
// `tolerance` (relative); averaged with the same quantity in the other
// direction. Both depth maps and cameras must live in the same frame.
double covisibility_from_depth(const CameraPose& cam_a, const DepthMap& depth_a,
                               const CameraPose& cam_b, const DepthMap& depth_b,
                               double tolerance = 0.05);

// Renders both depth maps at width x height and scores them as above.
double covisibility(const CameraPose& cam_a, const CameraPose& cam_b, const GaussianModel& model_a,
                    const GaussianModel& model_b_aligned, int width, int height,
                    double tolerance = 0.05);

struct OverlapConfig {
  std::size_t subset_size = 30;
  std::size_t top_k = 10;
  std::size_t neighbors = 5;
  int width = 64;
  int height = 64;
  double depth_tolerance = 0.05;
  double min_covisibility = 0.05;
};

struct OverlapSelection {
  std::vector<std::size_t> indices_a;  // into model_a.cameras, reference first
  std::vector<std::size_t> indices_b;  // into model_b.cameras, reference first
  std::vector<CameraPose> cameras_a;
  std::vector<CameraPose> cameras_b;  // in B's own frame
  CameraPairScore best;               // indices into the full camera lists
  std::vector<CameraPairScore> scored;  // step-2 candidates, full-list indices
};

// Depth-map cache and scorer for one coarse alignment: B's depth is rendered in
// B's frame and scaled by s, which equals rendering the aligned model.
class CovisibilityScorer {
 public:
  CovisibilityScorer(const GaussianModel& model_a, const GaussianModel& model_b, const Sim3& coarse,
                     const OverlapConfig& cfg);

  double score(std::size_t camera_a, std::size_t camera_b);
  CameraPose aligned_b(std::size_t camera_b) const;

 private:
  const DepthMap& depth_a(std::size_t i);
  const DepthMap& depth_b(std::size_t j);

  const GaussianModel& a_;
  const GaussianModel& b_;
  Sim3 coarse_;
  OverlapConfig cfg_;
  std::vector<std::optional<DepthMap>> cache_a_;
  std::vector<std::optional<DepthMap>> cache_b_;
};

// Three-step selection: subsample both camera sets, keep the top-k pairs by
// orientation (B aligned with `coarse`), rank those by covisibility and gather
// the n nearest camera centres around the winning pair on each side. Throws
// kInsufficientOverlap when the best covisibility is below the threshold.
OverlapSelection select_overlap_cameras(const GaussianModel& model_a, const GaussianModel& model_b,
                                        const Sim3& coarse, const OverlapConfig& cfg = {});

std::string pair_scores_to_json(const std::vector<CameraPairScore>& scores);

}  // namespace gsreg
