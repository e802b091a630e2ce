#pragma once

#include <optional>

#include <Eigen/Core>

#include "gsreg/geometry.hpp"
#include "gsreg/gs_model.hpp"
#include "gsreg/image.hpp"

namespace gsreg {

struct Projection {
  Eigen::Vector2d pixel;  // continuous; pixel (u, v) covers [u, u+1) x [v, v+1)
  double depth;           // camera-frame z
};

// Pinhole projection; std::nullopt when the point is not in front of the
// camera (z <= 0).
std::optional<Projection> project_point(const Eigen::Vector3d& p, const CameraPose& cam);

// World point seen at `pixel` with camera-frame depth `depth`.
Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth, const CameraPose& cam);

struct RenderOptions {
  double opacity_threshold = kDefaultOpacityThreshold;
};

struct RenderResult {
  DepthMap depth;
  ColorImage color;
};

// Z-buffered disc splatting: every confident Gaussian covers the pixels whose
// centres fall within max(exp(log_scale)) * fx / z pixels (at least one) of
// its projected centre, at the depth of that centre. The nearest Gaussian wins
// and colours its pixels with its SH expansion at the view direction.
// `cam` is rescaled to width x height before rendering.
RenderResult render(const GaussianModel& model, const CameraPose& cam, int width, int height,
                    bool with_color, const RenderOptions& options = {});

DepthMap render_depth(const GaussianModel& model, const CameraPose& cam, int width, int height,
                      const RenderOptions& options = {});
ColorImage render_color(const GaussianModel& model, const CameraPose& cam, int width, int height,
                        const RenderOptions& options = {});

}  // namespace gsreg
