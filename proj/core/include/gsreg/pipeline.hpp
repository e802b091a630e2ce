#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "gsreg/coarse_reg.hpp"
#include "gsreg/fine_reg.hpp"
#include "gsreg/gs_model.hpp"
#include "gsreg/overlap_select.hpp"

namespace gsreg {

struct PipelineConfig {
  double opacity_threshold = kDefaultOpacityThreshold;
  std::size_t max_points = kDefaultMaxPoints;
  std::uint64_t seed = 42;  // drives point subsampling, RANSAC in both stages
  bool coarse_only = false;
  CoarseConfig coarse;
  OverlapConfig overlap;
  FineConfig fine;

  void validate() const;
};

// JSON object with optional top-level keys opacity_threshold, max_points,
// seed, coarse_only and sections "coarse", "overlap", "fine" whose keys mirror
// the config fields. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(std::string_view json_text);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

enum class Stage { kCoarse, kFine, kFallback };
std::string_view to_string(Stage stage);

struct RegistrationReport {
  Sim3 transform;  // maps B onto A
  Stage stage = Stage::kCoarse;
  RegistrationEstimate coarse;
  std::optional<FineResult> fine;
  std::optional<OverlapSelection> overlap;
  bool insufficient_overlap = false;
  std::string note;
  std::size_t points_a = 0;
  std::size_t points_b = 0;
  double coarse_seconds = 0.0;
  double fine_seconds = 0.0;
};

RegistrationEstimate run_coarse_stage(const GaussianModel& a, const GaussianModel& b,
                                      const PipelineConfig& cfg, std::size_t* points_a = nullptr,
                                      std::size_t* points_b = nullptr);

// Overlap selection and fine registration starting from a given coarse
// estimate. Insufficient overlap or a failed fine stage yields kFallback with
// the coarse transform.
RegistrationReport run_fine_stage(const GaussianModel& a, const GaussianModel& b,
                                  const RegistrationEstimate& coarse, const PipelineConfig& cfg);

// Full coarse-to-fine pipeline (coarse only when cfg.coarse_only).
RegistrationReport register_models(const GaussianModel& a, const GaussianModel& b,
                                   const PipelineConfig& cfg = {});

// {scale, rotation (row-major 9), translation, stage, diagnostics}. Timings are
// left out unless requested so identical runs produce identical bytes.
std::string registration_to_json(const RegistrationReport& report, bool with_timings = false);
std::string sim3_to_json(const Sim3& x);

}  // namespace gsreg
