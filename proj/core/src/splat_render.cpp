#include "gsreg/splat_render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsreg/error.hpp"
#include "gsreg/sh_transform.hpp"

namespace gsreg {

std::optional<Projection> project_point(const Eigen::Vector3d& p, const CameraPose& cam) {
  const Eigen::Vector3d pc = cam.to_camera(p);
  if (!(pc.z() > 0.0)) return std::nullopt;
  return Projection{{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy},
                    pc.z()};
}

Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth, const CameraPose& cam) {
  const Eigen::Vector3d pc((pixel.x() - cam.cx) / cam.fx * depth,
                           (pixel.y() - cam.cy) / cam.fy * depth, depth);
  return cam.to_world(pc);
}

RenderResult render(const GaussianModel& model, const CameraPose& cam_in, int width, int height,
                    bool with_color, const RenderOptions& options) {
  if (model.empty()) fail(ErrorCode::kEmptyModel, "cannot render an empty model");
  if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "render size must be positive");
  const CameraPose cam = cam_in.resized(width, height);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Raster<double> zbuf(width, height, kInf);
  Raster<std::int64_t> owner(width, height, -1);

  for (std::size_t gi = 0; gi < model.gaussians.size(); ++gi) {
    const Gaussian& g = model.gaussians[gi];
    if (!(g.opacity() > options.opacity_threshold)) continue;
    const auto proj = project_point(g.position_d(), cam);
    if (!proj) continue;
    const double extent = std::exp(static_cast<double>(g.log_scale.maxCoeff()));
    const double radius = std::max(1.0, extent * cam.fx / proj->depth);
    const double u = proj->pixel.x();
    const double v = proj->pixel.y();
    // Pixel centres sit at integer + 0.5.
    const int x0 = std::max(0, static_cast<int>(std::ceil(u - radius - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(u + radius - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(v - radius - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(v + radius - 0.5)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y) {
      const double dy = y + 0.5 - v;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - u;
        if (dx * dx + dy * dy > r2) continue;
        double& z = zbuf.at(x, y);
        if (proj->depth < z) {
          z = proj->depth;
          owner.at(x, y) = static_cast<std::int64_t>(gi);
        }
      }
    }
  }

  RenderResult out;
  out.depth = DepthMap(width, height, 0.0);
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    if (owner.data[i] >= 0) out.depth.data[i] = zbuf.data[i];
  }
  if (with_color) {
    out.color = ColorImage(width, height, Eigen::Vector3f::Zero());
    const int degree = model.sh_degree;
    for (std::size_t i = 0; i < owner.size(); ++i) {
      if (owner.data[i] < 0) continue;
      const Gaussian& g = model.gaussians[static_cast<std::size_t>(owner.data[i])];
      const Eigen::Vector3d dir = (g.position_d() - cam.center()).normalized();
      Eigen::Vector3f rgb;
      for (int c = 0; c < 3; ++c) {
        const double value = eval_sh(g.sh_dc[c], g.sh_rest.data() + 15 * c, degree, dir);
        rgb[c] = static_cast<float>(std::clamp(value + 0.5, 0.0, 1.0));
      }
      out.color.data[i] = rgb;
    }
  }
  return out;
}

DepthMap render_depth(const GaussianModel& model, const CameraPose& cam, int width, int height,
                      const RenderOptions& options) {
  return render(model, cam, width, height, false, options).depth;
}

ColorImage render_color(const GaussianModel& model, const CameraPose& cam, int width, int height,
                        const RenderOptions& options) {
  return render(model, cam, width, height, true, options).color;
}

}  // namespace gsreg
