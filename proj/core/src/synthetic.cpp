#include "gsreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include <json.hpp>

#include "gsreg/error.hpp"
#include "gsreg/fusion.hpp"
#include "gsreg/splat_render.hpp"

namespace gsreg {
namespace {

constexpr double kPi = std::numbers::pi;

enum class SurfaceKind { kRect, kSphere, kCylinderSide, kDisc };

// One sampled surface: a rectangle (origin + two edges), a sphere, an open
// cylinder side or a horizontal disc.
struct Surface {
  SurfaceKind kind = SurfaceKind::kRect;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // rect corner or centre
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // rects and discs
  double radius = 0.0;
  double height = 0.0;
  Eigen::Vector3d base_color = Eigen::Vector3d::Constant(0.5);
  Eigen::Vector3d frequency = Eigen::Vector3d::Ones();
  double phase = 0.0;

  double area() const {
    switch (kind) {
      case SurfaceKind::kRect: return u.norm() * v.norm();
      case SurfaceKind::kSphere: return 4.0 * kPi * radius * radius;
      case SurfaceKind::kCylinderSide: return 2.0 * kPi * radius * height;
      case SurfaceKind::kDisc: return kPi * radius * radius;
    }
    return 0.0;
  }
};

struct SurfaceSample {
  Eigen::Vector3d position;
  Eigen::Vector3d normal;
};

SurfaceSample sample_surface(const Surface& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (s.kind) {
    case SurfaceKind::kRect:
      return {s.origin + unit(rng) * s.u + unit(rng) * s.v, s.normal};
    case SurfaceKind::kSphere: {
      const double z = 2.0 * unit(rng) - 1.0;
      const double phi = 2.0 * kPi * unit(rng);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Eigen::Vector3d n(r * std::cos(phi), r * std::sin(phi), z);
      return {s.origin + s.radius * n, n};
    }
    case SurfaceKind::kCylinderSide: {
      const double phi = 2.0 * kPi * unit(rng);
      const Eigen::Vector3d n(std::cos(phi), std::sin(phi), 0.0);
      return {s.origin + s.radius * n + unit(rng) * s.height * Eigen::Vector3d::UnitZ(), n};
    }
    case SurfaceKind::kDisc: {
      const double r = s.radius * std::sqrt(unit(rng));
      const double phi = 2.0 * kPi * unit(rng);
      return {s.origin + Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), 0.0), s.normal};
    }
  }
  return {s.origin, s.normal};
}

Eigen::Vector3d random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.15, 0.85);
  return {c(rng), c(rng), c(rng)};
}

void decorate(Surface& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(1.5, 4.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  s.base_color = random_color(rng);
  s.frequency = {freq(rng), freq(rng), freq(rng)};
  s.phase = phase(rng);
}

void add_box(std::vector<Surface>& out, const Eigen::Vector3d& lo, const Eigen::Vector3d& size,
             bool inward, std::mt19937_64& rng) {
  const Eigen::Vector3d ex = size.x() * Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = size.y() * Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ez = size.z() * Eigen::Vector3d::UnitZ();
  const double sign = inward ? -1.0 : 1.0;
  auto rect = [&](const Eigen::Vector3d& o, const Eigen::Vector3d& u, const Eigen::Vector3d& v,
                  const Eigen::Vector3d& outward) {
    Surface s;
    s.kind = SurfaceKind::kRect;
    s.origin = o;
    s.u = u;
    s.v = v;
    s.normal = sign * outward;
    decorate(s, rng);
    out.push_back(s);
  };
  if (inward) rect(lo, ex, ey, -Eigen::Vector3d::UnitZ());  // floor; furniture has no bottom
  rect(lo + ez, ex, ey, Eigen::Vector3d::UnitZ());
  rect(lo, ex, ez, -Eigen::Vector3d::UnitY());
  rect(lo + ey, ex, ez, Eigen::Vector3d::UnitY());
  rect(lo, ey, ez, -Eigen::Vector3d::UnitX());
  rect(lo + ex, ey, ez, Eigen::Vector3d::UnitX());
}

std::vector<Surface> build_room(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  std::vector<Surface> surfaces;
  const Eigen::Vector3d& room = cfg.room_size;
  add_box(surfaces, Eigen::Vector3d::Zero(), room, true, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  // Furniture stays out of a central corridor so the trajectory is never inside it.
  const double corridor = 0.2 * room.y();
  for (std::size_t i = 0; i < cfg.furniture_count; ++i) {
    const bool low_side = unit(rng) < 0.5;
    const double band = 0.5 * room.y() - corridor;
    const double y = low_side ? 0.1 * room.y() + unit(rng) * (band - 0.1 * room.y())
                              : room.y() - 0.1 * room.y() - unit(rng) * (band - 0.1 * room.y());
    const double x = 0.05 * room.x() + unit(rng) * 0.9 * room.x();
    switch (kind(rng)) {
      case 0: {
        const Eigen::Vector3d size(0.4 + 1.1 * unit(rng), 0.4 + 0.8 * unit(rng),
                                   std::min(0.4 + 1.4 * unit(rng), 0.8 * room.z()));
        add_box(surfaces, Eigen::Vector3d(x - 0.5 * size.x(), y - 0.5 * size.y(), 0.0), size,
                false, rng);
        break;
      }
      case 1: {
        Surface s;
        s.kind = SurfaceKind::kSphere;
        s.radius = 0.25 + 0.35 * unit(rng);
        s.origin = {x, y, s.radius + unit(rng) * 0.8};
        decorate(s, rng);
        surfaces.push_back(s);
        break;
      }
      default: {
        Surface side;
        side.kind = SurfaceKind::kCylinderSide;
        side.radius = 0.15 + 0.3 * unit(rng);
        side.height = std::min(0.5 + 1.5 * unit(rng), 0.9 * room.z());
        side.origin = {x, y, 0.0};
        decorate(side, rng);
        Surface top = side;
        top.kind = SurfaceKind::kDisc;
        top.origin = {x, y, side.height};
        top.normal = Eigen::Vector3d::UnitZ();
        surfaces.push_back(side);
        surfaces.push_back(top);
        break;
      }
    }
  }
  return surfaces;
}

Eigen::Vector4f disc_orientation(const Eigen::Vector3d& normal, double spin) {
  const Eigen::Vector3d t1 = normal.unitOrthogonal();
  const Eigen::Vector3d t2 = normal.cross(t1);
  Eigen::Matrix3d R;
  R.col(0) = std::cos(spin) * t1 + std::sin(spin) * t2;
  R.col(1) = normal.cross(R.col(0));
  R.col(2) = normal;
  return matrix_to_quat_wxyz(R);
}

GaussianModel build_scene(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  const std::vector<Surface> surfaces = build_room(cfg, rng);
  const auto n_floaters =
      static_cast<std::size_t>(std::round(cfg.floater_fraction * cfg.gaussian_count));
  const std::size_t n_surface = cfg.gaussian_count - n_floaters;

  // Area-proportional allocation; largest remainders get the leftovers.
  double total_area = 0.0;
  for (const Surface& s : surfaces) total_area += s.area();
  std::vector<std::size_t> counts(surfaces.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const double exact = n_surface * surfaces[i].area() / total_area;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t k = 0; assigned < n_surface; ++k, ++assigned) ++counts[remainders[k].second];

  const double spacing = std::sqrt(total_area / std::max<std::size_t>(1, n_surface));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GaussianModel scene;
  scene.sh_degree = 3;
  scene.gaussians.reserve(cfg.gaussian_count);
  for (std::size_t si = 0; si < surfaces.size(); ++si) {
    const Surface& s = surfaces[si];
    for (std::size_t k = 0; k < counts[si]; ++k) {
      const SurfaceSample smp = sample_surface(s, rng);
      Gaussian g;
      g.position = smp.position.cast<float>();
      g.opacity_logit = static_cast<float>(2.5 + unit(rng));
      g.rotation = disc_orientation(smp.normal, 2.0 * kPi * unit(rng));
      const double tangent = std::log(0.8 * spacing * (0.85 + 0.3 * unit(rng)));
      g.log_scale = Eigen::Vector3d(tangent, tangent, std::log(0.1 * spacing)).cast<float>();
      const Eigen::Vector3d p = smp.position;
      const double pattern = std::sin(s.frequency.x() * p.x() + s.phase) *
                             std::sin(s.frequency.y() * p.y() + 0.5 * s.phase) *
                             std::cos(s.frequency.z() * p.z());
      Eigen::Vector3d color = s.base_color + Eigen::Vector3d::Constant(0.2 * pattern);
      for (int c = 0; c < 3; ++c) color[c] += 0.12 * (2.0 * unit(rng) - 1.0);
      color = color.cwiseMax(0.02).cwiseMin(0.98);
      g.sh_dc = ((color.array() - 0.5) / kShC0).matrix().cast<float>();
      for (float& r : g.sh_rest) r = static_cast<float>(cfg.sh_rest_amplitude * gauss(rng));
      scene.gaussians.push_back(g);
    }
  }
  for (std::size_t k = 0; k < n_floaters; ++k) {
    Gaussian g;
    const Eigen::Vector3d p(unit(rng) * cfg.room_size.x(), unit(rng) * cfg.room_size.y(),
                            unit(rng) * cfg.room_size.z());
    g.position = p.cast<float>();
    g.opacity_logit = static_cast<float>(-2.0 + unit(rng));
    g.log_scale = Eigen::Vector3f::Constant(static_cast<float>(std::log(0.5 * spacing)));
    g.sh_dc = ((random_color(rng).array() - 0.5) / kShC0).matrix().cast<float>();
    for (float& r : g.sh_rest) r = static_cast<float>(cfg.sh_rest_amplitude * gauss(rng));
    scene.gaussians.push_back(g);
  }
  return scene;
}

std::vector<CameraPose> build_trajectory(const SyntheticConfig& cfg, std::size_t frames) {
  const Eigen::Vector3d& room = cfg.room_size;
  std::vector<CameraPose> cams;
  cams.reserve(frames);
  const double pitch = -12.0 * kPi / 180.0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double t = frames > 1 ? static_cast<double>(i) / static_cast<double>(frames - 1) : 0.5;
    const double yaw = (-0.5 + t) * cfg.yaw_sweep_deg * kPi / 180.0;
    const Eigen::Vector3d center(room.x() * (0.15 + 0.7 * t),
                                 room.y() * (0.5 + 0.08 * std::sin(2.0 * kPi * t)),
                                 room.z() * 0.5);
    const Eigen::Vector3d f(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch),
                            std::sin(pitch));
    const Eigen::Vector3d right = f.cross(Eigen::Vector3d::UnitZ()).normalized();
    const Eigen::Vector3d down = f.cross(right);
    CameraPose cam;
    cam.rotation.col(0) = right;
    cam.rotation.col(1) = down;
    cam.rotation.col(2) = f;
    cam.translation = center;
    cam.fx = cam.fy = cfg.focal;
    cam.cx = 0.5 * cfg.width;
    cam.cy = 0.5 * cfg.height;
    cam.width = cfg.width;
    cam.height = cfg.height;
    cams.push_back(cam);
  }
  return cams;
}

std::vector<std::uint32_t> visible_set(const GaussianModel& scene,
                                       const std::vector<CameraPose>& cams, double far) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Eigen::Vector3d p = scene.gaussians[i].position_d();
    for (const CameraPose& cam : cams) {
      const auto proj = project_point(p, cam);
      if (!proj || proj->depth < 0.05 || proj->depth > far) continue;
      if (proj->pixel.x() >= 0.0 && proj->pixel.y() >= 0.0 && proj->pixel.x() < cam.width &&
          proj->pixel.y() < cam.height) {
        out.push_back(static_cast<std::uint32_t>(i));
        break;
      }
    }
  }
  return out;
}

GaussianModel sub_model(const GaussianModel& scene, const std::vector<std::uint32_t>& ids,
                        std::vector<CameraPose> cams, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  GaussianModel out;
  out.sh_degree = scene.sh_degree;
  out.cameras = std::move(cams);
  out.gaussians.reserve(ids.size());
  for (std::uint32_t id : ids) {
    Gaussian g = scene.gaussians[id];
    if (noise > 0.0) {
      const Eigen::Vector3d jitter(gauss(rng), gauss(rng), gauss(rng));
      g.position = (g.position_d() + noise * jitter).cast<float>();
    }
    out.gaussians.push_back(g);
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (!(overlap > 0.0 && overlap <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "overlap fraction must lie in (0, 1]");
  }
  if ((room_size.array() <= 0.0).any()) fail(ErrorCode::kInvalidArgument, "room size must be positive");
  if (gaussian_count == 0) fail(ErrorCode::kInvalidArgument, "gaussian_count must be positive");
  if (cameras_per_side == 0) fail(ErrorCode::kInvalidArgument, "cameras_per_side must be positive");
  if (!(floater_fraction >= 0.0 && floater_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "floater_fraction must lie in [0, 1)");
  }
  if (width <= 0 || height <= 0 || !(focal > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "camera intrinsics must be positive");
  }
  if (!(min_scale > 0.0 && max_scale >= min_scale)) {
    fail(ErrorCode::kInvalidArgument, "scale range must satisfy 0 < min_scale <= max_scale");
  }
  if (position_noise < 0.0 || sh_rest_amplitude < 0.0 || min_translation_diagonals < 0.0) {
    fail(ErrorCode::kInvalidArgument, "noise, SH amplitude and translation must be non-negative");
  }
  if (max_translation_diagonals < min_translation_diagonals) {
    fail(ErrorCode::kInvalidArgument, "max_translation_diagonals must be >= the minimum");
  }
}

SyntheticPair make_synthetic_scene_pair(std::uint64_t seed, const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 scene_rng(seed);
  SyntheticPair pair;
  pair.scene = build_scene(cfg, scene_rng);

  const std::size_t n = cfg.cameras_per_side;
  const auto frames = static_cast<std::size_t>(std::llround(n * (2.0 - cfg.overlap)));
  const std::vector<CameraPose> trajectory = build_trajectory(cfg, std::max(frames, n));
  const std::vector<CameraPose> cams_a(trajectory.begin(), trajectory.begin() + n);
  const std::vector<CameraPose> cams_b(trajectory.end() - n, trajectory.end());
  pair.shared_frames = 2 * n - trajectory.size();

  const double far = cfg.room_size.norm();
  pair.source_a = visible_set(pair.scene, cams_a, far);
  pair.source_b = visible_set(pair.scene, cams_b, far);

  std::mt19937_64 side_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  pair.a = sub_model(pair.scene, pair.source_a, cams_a, cfg.position_noise, side_rng);
  GaussianModel b = sub_model(pair.scene, pair.source_b, cams_b, cfg.position_noise, side_rng);

  // Drawn unconditionally so the flag does not shift any other random draw.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = cfg.min_scale + unit(side_rng) * (cfg.max_scale - cfg.min_scale);
  const Eigen::Matrix3d R = random_rotation(side_rng);
  Eigen::Vector3d dir(unit(side_rng) - 0.5, unit(side_rng) - 0.5, unit(side_rng) - 0.5);
  if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
  const double t = (cfg.min_translation_diagonals +
                    unit(side_rng) * (cfg.max_translation_diagonals - cfg.min_translation_diagonals)) *
                   far;
  Sim3 x = Sim3::create(s, R, t * dir.normalized(), 1e-9);
  if (!cfg.random_transform) x = Sim3::identity();

  pair.b = transform_model(b, x);
  pair.ground_truth = x.inverse();
  return pair;
}

SyntheticConfig parse_synthetic_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("synthetic config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kFormat, "synthetic config must be a JSON object");
  SyntheticConfig cfg;
  static const std::set<std::string> kKeys = {
      "room_size",      "gaussian_count",   "furniture_count", "floater_fraction",
      "overlap",        "cameras_per_side", "width",           "height",
      "focal",          "yaw_sweep_deg",    "sh_rest_amplitude", "position_noise",
      "random_transform", "min_scale",      "max_scale",       "min_translation_diagonals",
      "max_translation_diagonals"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) fail(ErrorCode::kFormat, "synthetic config: unknown key \"" + key + "\"");
  }
  try {
    if (j.contains("room_size")) {
      const auto v = j.at("room_size").get<std::vector<double>>();
      if (v.size() != 3) fail(ErrorCode::kFormat, "synthetic config: room_size needs 3 values");
      cfg.room_size = {v[0], v[1], v[2]};
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("gaussian_count", cfg.gaussian_count);
    read("furniture_count", cfg.furniture_count);
    read("floater_fraction", cfg.floater_fraction);
    read("overlap", cfg.overlap);
    read("cameras_per_side", cfg.cameras_per_side);
    read("width", cfg.width);
    read("height", cfg.height);
    read("focal", cfg.focal);
    read("yaw_sweep_deg", cfg.yaw_sweep_deg);
    read("sh_rest_amplitude", cfg.sh_rest_amplitude);
    read("position_noise", cfg.position_noise);
    read("random_transform", cfg.random_transform);
    read("min_scale", cfg.min_scale);
    read("max_scale", cfg.max_scale);
    read("min_translation_diagonals", cfg.min_translation_diagonals);
    read("max_translation_diagonals", cfg.max_translation_diagonals);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("synthetic config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace gsreg
