#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsreg/coarse_reg.hpp"
#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"
#include "gsreg/image.hpp"

namespace gsreg {

// Matching cost per (hypothesis, pixel), lower is better, plus per-bin
// features: the NCC score against every source followed by the reference
// patch mean and variance.
struct CostVolume {
  int width = 0;
  int height = 0;
  std::vector<double> hypotheses;  // strictly increasing depths
  std::vector<double> values;      // [l][y][x]
  int feature_channels = 0;
  std::vector<float> features;     // [l][y][x][c]
  CameraPose reference_cam;        // already at width x height

  std::size_t depth_count() const { return hypotheses.size(); }
  std::size_t pixels() const { return std::size_t(width) * height; }
  double cost(std::size_t l, std::size_t pixel) const { return values[l * pixels() + pixel]; }
  const float* feature(std::size_t l, std::size_t pixel) const {
    return features.data() + (l * pixels() + pixel) * feature_channels;
  }
};

struct ProbabilityVolume {
  int width = 0;
  int height = 0;
  std::size_t depth_count = 0;
  std::vector<double> values;  // [l][y][x]

  std::size_t pixels() const { return std::size_t(width) * height; }
  double at(std::size_t l, std::size_t pixel) const { return values[l * pixels() + pixel]; }
};

struct DepthConfidence {
  int width = 0;
  int height = 0;
  int feature_channels = 0;
  std::vector<double> depth;
  std::vector<double> confidence;
  std::vector<float> features;  // [y][x][c]
  std::vector<std::uint8_t> valid;
  CameraPose camera;
};

// 2nd / 98th percentile of the non-zero depths, padded by 5% on each side.
// Throws kDegenerate for an empty map.
std::pair<double, double> depth_range(const DepthMap& depth);
std::pair<double, double> depth_range_from_render(const GaussianModel& model, const CameraPose& cam,
                                                  int width, int height);

// D depths spaced uniformly in inverse depth over [d_min, d_max].
std::vector<double> inverse_depth_hypotheses(double d_min, double d_max, std::size_t count);

// Plane-sweep volume: each source image is warped onto the reference through
// the homography of the fronto-parallel plane at every hypothesis and compared
// with 5x5 grayscale NCC; cost = mean over sources of (1 - NCC), with warps
// leaving a source frustum contributing 1. Cameras are rescaled to the
// reference image size. Throws kDegenerate when no source ever overlaps.
CostVolume build_cost_volume(const ColorImage& reference, std::span<const ColorImage> sources,
                             const CameraPose& reference_cam,
                             std::span<const CameraPose> source_cams, std::pair<double, double> range,
                             std::size_t depth_count, int window = 5);

// Per-pixel softmin over hypotheses at the given temperature.
ProbabilityVolume cost_to_probability(const CostVolume& cost, double temperature);

// argmax over l in [0, D-2] of P_l + P_{l+1}; the smallest l wins ties.
std::size_t consecutive_argmax(std::span<const double> probabilities);

struct PixelEstimate {
  std::size_t l0 = 0;
  double depth = 0.0;
  double confidence = 0.0;
  std::vector<float> feature;
  bool valid = false;
};

// Blends the two bins picked by consecutive_argmax with weights
// P_l0 / (P_l0 + P_l0+1) and P_l0+1 / (P_l0 + P_l0+1); confidence is the pair
// mass. `features` holds one row of C values per bin (may have zero columns).
PixelEstimate depth_feature_confidence(
    std::span<const double> probabilities, std::span<const double> hypotheses,
    const Eigen::Ref<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>&
        features);

DepthConfidence estimate_depth(const ProbabilityVolume& prob, const CostVolume& cost);

struct FilteredPoints {
  std::vector<Eigen::Vector3d> points;  // world frame of the reference camera
  std::vector<std::vector<float>> features;
  std::vector<std::uint32_t> pixels;
  double mean_confidence = 0.0;
};

// Keeps valid pixels with confidence above the mean over valid pixels (>= when
// every valid pixel shares one value) and lifts them to 3D. Throws kEmptyCloud
// when no pixel is valid.
FilteredPoints confidence_filter(const DepthConfidence& dc);

struct FineConfig {
  int width = 160;
  int height = 120;
  std::size_t depth_hypotheses = 64;
  double temperature = 0.05;
  int ncc_window = 5;
  double voxel_fraction = 1.0 / 64.0;
  std::size_t normal_k = 16;
  double descriptor_radius_factor = 5.0;
  double ratio = 0.9;
  double match_gate_fraction = 0.15;  // guided-matching radius, of the box diagonal
  std::size_t ransac_iterations = 2000;
  std::size_t ransac_candidates = 4;
  double inlier_tol_factor = 3.0;
  double icp_initial_gate_fraction = 0.1;
  double icp_final_gate_factor = 2.0;  // in voxels
  std::size_t icp_max_iters = 30;
  double icp_tol = 1e-7;
  std::uint64_t seed = 42;
};

struct FineResult {
  RegistrationEstimate estimate;  // composed transform B -> A
  Sim3 delta;                     // correction applied on top of the coarse transform
  std::size_t points_a = 0;
  std::size_t points_b = 0;
  DepthConfidence depth_a;
  DepthConfidence depth_b;
};

// Renders each camera set, estimates the reference depth of both sides from
// plane-sweep volumes, keeps the confident pixels, expresses B's points in A's
// frame through `coarse` and refines with guided descriptor matching, RANSAC
// and scaled ICP. The correction with the largest mutual overlap (tolerance =
// final ICP gate) wins, the identity included. The first camera of each list
// is the reference. Any failure returns `coarse` tagged kFallback.
FineResult fine_register(const GaussianModel& model_a, const GaussianModel& model_b,
                         std::span<const CameraPose> cams_a, std::span<const CameraPose> cams_b,
                         const Sim3& coarse, const FineConfig& cfg = {});

}  // namespace gsreg
