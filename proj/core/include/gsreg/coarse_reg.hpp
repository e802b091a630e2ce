#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"

namespace gsreg {

enum class ScaleLevel { kCoarse, kFine };

// Rotation-invariant local geometry descriptors (fast point-feature
// histograms: 3 angular features x 11 soft bins, L1-normalised).
struct DescriptorSet {
  static constexpr int kBins = 11;
  static constexpr int kDim = 3 * kBins;
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::vector<Eigen::Vector3d> keypoints;
  std::vector<std::uint32_t> cloud_index;  // keypoint -> index in the source cloud
  Matrix descriptors;                      // one row per keypoint
  ScaleLevel scale_level = ScaleLevel::kFine;

  std::size_t size() const { return keypoints.size(); }
};

struct Correspondence {
  std::uint32_t index_a;
  std::uint32_t index_b;
  double score;  // 1 - Lowe ratio, in [0, 1]
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::size_t size() const { return pairs.size(); }
};

enum class RegistrationStatus { kOk, kStarved, kFallback };
std::string_view to_string(RegistrationStatus status);

struct RegistrationEstimate {
  Sim3 transform;
  std::size_t inlier_count = 0;
  double rmse = 0.0;
  RegistrationStatus status = RegistrationStatus::kOk;
  // ICP objective sqrt(mean(min(d^2, gate^2))) over all sampled source points,
  // once for the initial guess and once per accepted iteration.
  std::vector<double> residual_history;
};

struct Normals {
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::uint8_t> low_confidence;  // rank-deficient neighbourhood
};

// One point per occupied voxel: centroid of members, colour and opacity
// averaged. Output order follows first occupancy in the input.
ColoredPointCloud voxel_downsample(const ColoredPointCloud& cloud, double voxel);

// Smallest-eigenvector normals of the k-NN covariance (k includes the point
// itself), oriented away from the cloud centroid.
Normals estimate_normals(const ColoredPointCloud& cloud, std::size_t k);

// Descriptors for every point of `cloud` with at least five neighbours inside
// `radius`; points with fewer are left out.
DescriptorSet compute_descriptors(const ColoredPointCloud& cloud, const Normals& normals,
                                  double radius, ScaleLevel level = ScaleLevel::kFine);

struct MatchOptions {
  double ratio = 0.9;
  // When set, candidates are restricted to keypoints within this distance
  // (keypoints of both sets must then live in the same frame).
  std::optional<double> spatial_gate;
};

// Mutual nearest neighbours in descriptor space passing the ratio test.
// Throws kNoOverlap when nothing survives.
CorrespondenceSet match_descriptors(const DescriptorSet& a, const DescriptorSet& b,
                                    const MatchOptions& options = {});

// Least-squares similarity dst ~ s R src + T (Umeyama). Throws kDegenerate for
// fewer than three points or rank < 2 configurations.
Sim3 umeyama_sim3(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst,
                  bool with_scale = true);

struct RansacOptions {
  std::size_t iterations = 5000;
  double inlier_tol = 0.0;
  std::uint64_t seed = 42;
  std::size_t min_inliers = 3;
  double min_scale = 1e-3;
  double max_scale = 1e3;
  // Reject minimal samples whose edge-length ratios b/a disagree by more than
  // this factor (similarities preserve them). <= 1 disables the check.
  double edge_ratio_tolerance = 1.3;
  std::size_t refinement_rounds = 5;
};

// Robust Sim3 mapping keypoints of `b` onto keypoints of `a`. Throws
// kRegistrationFailure when no hypothesis gathers min_inliers.
RegistrationEstimate ransac_sim3(const CorrespondenceSet& corr,
                                 std::span<const Eigen::Vector3d> a_keypoints,
                                 std::span<const Eigen::Vector3d> b_keypoints,
                                 const RansacOptions& options);

// Up to `max_candidates` mutually distinct hypotheses (they disagree by more
// than twice the inlier tolerance somewhere on the matched B keypoints), each
// refit on its inliers, sorted by inlier count. The first equals ransac_sim3.
std::vector<RegistrationEstimate> ransac_sim3_candidates(
    const CorrespondenceSet& corr, std::span<const Eigen::Vector3d> a_keypoints,
    std::span<const Eigen::Vector3d> b_keypoints, const RansacOptions& options,
    std::size_t max_candidates);

struct IcpOptions {
  double gate_factor = 3.0;  // gate = gate_factor * median NN spacing of dst
  std::optional<double> gate;  // absolute gate; overrides gate_factor
  bool with_scale = true;
  std::size_t min_pairs = 10;
  std::size_t max_src_points = 10000;  // evenly strided subset of src
};

// Point-to-point ICP with per-iteration Umeyama scale over the pairs inside the
// distance gate. Iterates until the truncated residual improves by less than
// `tol` or `max_iters` is reached; a step that would increase it is rejected,
// so residual_history is non-increasing. `rmse` is taken over the gated pairs.
// With fewer than min_pairs gated correspondences the init is returned with
// kStarved.
RegistrationEstimate scaled_icp(const ColoredPointCloud& src, const ColoredPointCloud& dst,
                                const Sim3& init, std::size_t max_iters, double tol,
                                const IcpOptions& options = {});

struct CoarseConfig {
  double voxel_fraction = 1.0 / 64.0;  // of the bounding-box diagonal
  std::size_t normal_k = 16;
  double descriptor_radius_factor = 5.0;  // coarse scale, in fine voxels
  double ratio = 0.9;
  std::size_t ransac_iterations = 5000;
  double inlier_tol_factor = 3.0;  // in fine voxels
  std::size_t icp_max_iters = 50;
  double icp_tol = 1e-6;
  std::size_t ransac_candidates = 8;  // hypotheses verified by ICP
  std::uint64_t seed = 42;
};

// Full coarse stage: both clouds are normalised to unit bounding-box diagonal,
// downsampled, described, matched, RANSAC-aligned and refined with scaled ICP.
// Returns the transform mapping B onto A in original units.
RegistrationEstimate coarse_register(const ColoredPointCloud& cloud_a,
                                     const ColoredPointCloud& cloud_b,
                                     const CoarseConfig& cfg = {});

// sqrt(mean(min(d^2, gate^2))) over every point of `src` mapped by `x`, d being
// the distance to the nearest point of `dst`.
double truncated_residual(const ColoredPointCloud& src, const ColoredPointCloud& dst,
                          const Sim3& x, double gate);

// Fraction of `src` points whose image under `x` lies within `tol` of `dst`.
double inlier_fraction(const ColoredPointCloud& src, const ColoredPointCloud& dst, const Sim3& x,
                       double tol);

// Geometric mean of the B->A inlier fraction under `x` and the A->B fraction
// under its inverse.
double mutual_overlap(const ColoredPointCloud& a, const ColoredPointCloud& b, const Sim3& x,
                      double tol);

// Describe, match, RANSAC and ICP for two clouds already expressed in a
// normalised frame. Every RANSAC candidate is refined by ICP on the voxel
// clouds and then the full clouds; the largest mutual overlap of the voxel
// clouds at one voxel wins.
struct FeatureRegistrationConfig {
  double voxel = 1.0 / 64.0;
  std::size_t normal_k = 16;
  double descriptor_radius = 5.0 / 64.0;
  MatchOptions match;
  RansacOptions ransac;
  std::size_t ransac_candidates = 8;
  std::size_t icp_max_iters = 50;
  double icp_tol = 1e-6;
};
RegistrationEstimate register_clouds(const ColoredPointCloud& cloud_a,
                                     const ColoredPointCloud& cloud_b,
                                     const FeatureRegistrationConfig& cfg);

// Median distance from a point to its nearest other point, estimated on an
// evenly strided subset of at most 2000 queries. 0 for fewer than two points.
double median_nn_spacing(const std::vector<Eigen::Vector3d>& points);

// Translation + uniform scale taking the bounding box centre to the origin
// and its diagonal to unit length.
Sim3 unit_box_normalizer(const std::vector<Eigen::Vector3d>& points);

std::vector<Eigen::Vector3d> transform_points(std::span<const Eigen::Vector3d> points,
                                              const Sim3& x);
ColoredPointCloud transform_cloud(const ColoredPointCloud& cloud, const Sim3& x);

}  // namespace gsreg
