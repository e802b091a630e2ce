#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"

namespace gsreg {

struct SyntheticConfig {
  Eigen::Vector3d room_size{10.0, 6.0, 3.0};
  std::size_t gaussian_count = 40000;
  std::size_t furniture_count = 10;
  double floater_fraction = 0.05;
  double overlap = 0.5;  // fraction of each side's frames shared with the other
  std::size_t cameras_per_side = 60;
  int width = 640;
  int height = 480;
  double focal = 500.0;
  double yaw_sweep_deg = 280.0;
  double sh_rest_amplitude = 0.05;
  double position_noise = 0.005;  // independent per-side jitter, scene units
  bool random_transform = true;
  double min_scale = 0.7;
  double max_scale = 1.4;
  // Translation length, in room diagonals. A positive minimum keeps the
  // relative translation error well defined.
  double min_translation_diagonals = 0.5;
  double max_translation_diagonals = 2.0;

  // Throws kInvalidArgument on out-of-range values (overlap must be in (0, 1]).
  void validate() const;
};

struct SyntheticPair {
  GaussianModel a;
  GaussianModel b;          // already moved by inverse(ground_truth)
  Sim3 ground_truth;        // maps B onto A
  GaussianModel scene;      // full source scene in A's frame, no cameras
  std::vector<std::uint32_t> source_a;  // scene index of every Gaussian in a
  std::vector<std::uint32_t> source_b;  // scene index of every Gaussian in b
  std::size_t shared_frames = 0;
};

// Textured box room with furniture and floaters, a camera trajectory sweeping
// its yaw along the room, and two sub-models holding the Gaussians seen by the
// first and last cameras_per_side frames. Deterministic per seed.
SyntheticPair make_synthetic_scene_pair(std::uint64_t seed, const SyntheticConfig& cfg = {});

SyntheticConfig parse_synthetic_config(std::string_view json_text);

}  // namespace gsreg
