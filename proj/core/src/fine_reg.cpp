#include "gsreg/fine_reg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsreg/error.hpp"
#include "gsreg/splat_render.hpp"

namespace gsreg {
namespace {

// Window sums of `src` (W x H) over a (2r+1)^2 box clipped at the borders.
void box_sum(const std::vector<double>& src, int w, int h, int r, std::vector<double>& integral,
             std::vector<double>& out) {
  const int iw = w + 1;
  integral.assign(std::size_t(iw) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += src[std::size_t(y) * w + x];
      integral[std::size_t(y + 1) * iw + x + 1] = integral[std::size_t(y) * iw + x + 1] + row;
    }
  }
  out.resize(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
      out[std::size_t(y) * w + x] =
          integral[std::size_t(y1) * iw + x1] - integral[std::size_t(y0) * iw + x1] -
          integral[std::size_t(y1) * iw + x0] + integral[std::size_t(y0) * iw + x0];
    }
  }
}

double bilinear(const GrayImage& img, double sx, double sy) {
  const int x0 = std::min(static_cast<int>(sx), img.width - 2);
  const int y0 = std::min(static_cast<int>(sy), img.height - 2);
  const double fx = sx - x0, fy = sy - y0;
  return (1 - fy) * ((1 - fx) * img.at(x0, y0) + fx * img.at(x0 + 1, y0)) +
         fy * ((1 - fx) * img.at(x0, y0 + 1) + fx * img.at(x0 + 1, y0 + 1));
}

struct Side {
  DepthConfidence dc;
  FilteredPoints points;
};

Side reconstruct_side(const GaussianModel& model, std::span<const CameraPose> cams,
                      const FineConfig& cfg) {
  std::vector<ColorImage> images;
  images.reserve(cams.size());
  DepthMap ref_depth;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    RenderResult r = render(model, cams[i], cfg.width, cfg.height, true);
    if (i == 0) ref_depth = std::move(r.depth);
    images.push_back(std::move(r.color));
  }
  const auto range = depth_range(ref_depth);
  const CostVolume cost =
      build_cost_volume(images[0], std::span(images).subspan(1), cams[0], cams.subspan(1), range,
                        cfg.depth_hypotheses, cfg.ncc_window);
  Side side;
  side.dc = estimate_depth(cost_to_probability(cost, cfg.temperature), cost);
  for (std::size_t p = 0; p < ref_depth.size(); ++p) {
    if (!(ref_depth.data[p] > 0.0)) side.dc.valid[p] = 0;
  }
  side.points = confidence_filter(side.dc);
  return side;
}

ColoredPointCloud as_cloud(const std::vector<Eigen::Vector3d>& points) {
  ColoredPointCloud cloud;
  cloud.points = points;
  cloud.colors.assign(points.size(), Eigen::Vector3d::Constant(0.5));
  cloud.opacities.assign(points.size(), 1.0);
  return cloud;
}

// ICP with a gate shrinking geometrically from `start` to `end`.
RegistrationEstimate annealed_icp(const ColoredPointCloud& src, const ColoredPointCloud& dst,
                                  const Sim3& init, double start, double end,
                                  const FineConfig& cfg) {
  Sim3 x = init;
  for (double gate = std::max(start, end);; gate = std::max(end, gate * 0.5)) {
    IcpOptions opts;
    opts.gate = gate;
    const RegistrationEstimate step = scaled_icp(src, dst, x, cfg.icp_max_iters, cfg.icp_tol, opts);
    if (step.status == RegistrationStatus::kOk) x = step.transform;
    if (gate <= end) break;
  }
  IcpOptions final_opts;
  final_opts.gate = end;
  return scaled_icp(src, dst, x, 0, cfg.icp_tol, final_opts);
}

}  // namespace

std::pair<double, double> depth_range(const DepthMap& depth) {
  std::vector<double> values;
  for (double d : depth.data) {
    if (d > 0.0) values.push_back(d);
  }
  if (values.empty()) fail(ErrorCode::kDegenerate, "depth map has no valid pixel");
  std::sort(values.begin(), values.end());
  auto percentile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {percentile(0.02) * 0.95, percentile(0.98) * 1.05};
}

std::pair<double, double> depth_range_from_render(const GaussianModel& model, const CameraPose& cam,
                                                  int width, int height) {
  return depth_range(render_depth(model, cam, width, height));
}

std::vector<double> inverse_depth_hypotheses(double d_min, double d_max, std::size_t count) {
  if (count < 2) fail(ErrorCode::kInvalidArgument, "need at least two depth hypotheses");
  if (!(d_min > 0.0) || !(d_max > d_min)) {
    fail(ErrorCode::kInvalidArgument, "depth range must satisfy 0 < d_min < d_max");
  }
  std::vector<double> out(count);
  const double inv_near = 1.0 / d_min, inv_far = 1.0 / d_max;
  for (std::size_t l = 0; l < count; ++l) {
    const double t = static_cast<double>(l) / static_cast<double>(count - 1);
    out[l] = 1.0 / (inv_near + t * (inv_far - inv_near));
  }
  out.front() = d_min;
  out.back() = d_max;
  return out;
}

CostVolume build_cost_volume(const ColorImage& reference, std::span<const ColorImage> sources,
                             const CameraPose& reference_cam,
                             std::span<const CameraPose> source_cams, std::pair<double, double> range,
                             std::size_t depth_count, int window) {
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "cost volume needs a source image");
  if (sources.size() != source_cams.size()) {
    fail(ErrorCode::kInvalidArgument, "source images and cameras differ in count");
  }
  if (window < 1 || window % 2 == 0) fail(ErrorCode::kInvalidArgument, "NCC window must be odd");
  const int w = reference.width, h = reference.height;
  if (w < 2 || h < 2) fail(ErrorCode::kInvalidArgument, "reference image too small");
  const int r = window / 2;
  const std::size_t n_pix = std::size_t(w) * h;
  const std::size_t n_src = sources.size();

  CostVolume vol;
  vol.width = w;
  vol.height = h;
  vol.hypotheses = inverse_depth_hypotheses(range.first, range.second, depth_count);
  vol.reference_cam = reference_cam.resized(w, h);
  vol.feature_channels = static_cast<int>(n_src) + 2;
  vol.values.assign(depth_count * n_pix, 0.0);
  vol.features.assign(depth_count * n_pix * vol.feature_channels, 0.0f);

  const GrayImage ref_gray = to_gray(reference);
  std::vector<double> ref_i(n_pix), ref_i2(n_pix), ones(n_pix, 1.0);
  for (std::size_t p = 0; p < n_pix; ++p) {
    ref_i[p] = ref_gray.data[p];
    ref_i2[p] = ref_i[p] * ref_i[p];
  }
  std::vector<double> integral, count, sum_i, sum_i2;
  box_sum(ones, w, h, r, integral, count);
  box_sum(ref_i, w, h, r, integral, sum_i);
  box_sum(ref_i2, w, h, r, integral, sum_i2);

  const CameraPose& rc = vol.reference_cam;
  std::vector<Eigen::Vector3d> rays(n_pix);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      rays[std::size_t(y) * w + x] = {(x + 0.5 - rc.cx) / rc.fx, (y + 0.5 - rc.cy) / rc.fy, 1.0};
    }
  }

  constexpr double kVarEps = 1e-6;
  std::vector<double> warped(n_pix), warped2(n_pix), cross(n_pix), outside(n_pix);
  std::vector<double> sum_j, sum_j2, sum_ij, sum_out;
  bool any_overlap = false;
  for (std::size_t s = 0; s < n_src; ++s) {
    const GrayImage src_gray = to_gray(sources[s]);
    if (src_gray.width < 2 || src_gray.height < 2) {
      fail(ErrorCode::kInvalidArgument, "source image too small");
    }
    const CameraPose sc = source_cams[s].resized(src_gray.width, src_gray.height);
    const Eigen::Matrix3d A = sc.rotation.transpose() * rc.rotation;
    const Eigen::Vector3d b = sc.rotation.transpose() * (rc.translation - sc.translation);
    std::vector<Eigen::Vector3d> dirs(n_pix);
    for (std::size_t p = 0; p < n_pix; ++p) dirs[p] = A * rays[p];

    for (std::size_t l = 0; l < depth_count; ++l) {
      const double d = vol.hypotheses[l];
      for (std::size_t p = 0; p < n_pix; ++p) {
        const Eigen::Vector3d xs = d * dirs[p] + b;
        double value = 0.0;
        bool inside = false;
        if (xs.z() > 0.0) {
          const double sx = sc.fx * xs.x() / xs.z() + sc.cx - 0.5;
          const double sy = sc.fy * xs.y() / xs.z() + sc.cy - 0.5;
          if (sx >= 0.0 && sy >= 0.0 && sx <= src_gray.width - 1 && sy <= src_gray.height - 1) {
            inside = true;
            value = bilinear(src_gray, sx, sy);
          }
        }
        warped[p] = value;
        warped2[p] = value * value;
        cross[p] = value * ref_i[p];
        outside[p] = inside ? 0.0 : 1.0;
      }
      box_sum(warped, w, h, r, integral, sum_j);
      box_sum(warped2, w, h, r, integral, sum_j2);
      box_sum(cross, w, h, r, integral, sum_ij);
      box_sum(outside, w, h, r, integral, sum_out);

      double* cost = vol.values.data() + l * n_pix;
      float* feat = vol.features.data() + l * n_pix * vol.feature_channels;
      for (std::size_t p = 0; p < n_pix; ++p) {
        double ncc = 0.0;
        if (sum_out[p] > 0.0) {
          cost[p] += 1.0;
        } else {
          any_overlap = true;
          const double n = count[p];
          const double var_i = sum_i2[p] - sum_i[p] * sum_i[p] / n;
          const double var_j = sum_j2[p] - sum_j[p] * sum_j[p] / n;
          if (var_i > kVarEps * n && var_j > kVarEps * n) {
            ncc = std::clamp((sum_ij[p] - sum_i[p] * sum_j[p] / n) / std::sqrt(var_i * var_j),
                             -1.0, 1.0);
          }
          cost[p] += 1.0 - ncc;
        }
        feat[p * vol.feature_channels + s] = static_cast<float>(ncc);
      }
    }
  }
  if (!any_overlap) {
    fail(ErrorCode::kDegenerate, "no source view overlaps the reference at any depth hypothesis");
  }

  const double inv_src = 1.0 / static_cast<double>(n_src);
  for (double& c : vol.values) c *= inv_src;
  for (std::size_t l = 0; l < depth_count; ++l) {
    float* feat = vol.features.data() + l * n_pix * vol.feature_channels;
    for (std::size_t p = 0; p < n_pix; ++p) {
      const double mean = sum_i[p] / count[p];
      const double var = std::max(0.0, sum_i2[p] / count[p] - mean * mean);
      feat[p * vol.feature_channels + n_src] = static_cast<float>(mean);
      feat[p * vol.feature_channels + n_src + 1] = static_cast<float>(var);
    }
  }
  return vol;
}

ProbabilityVolume cost_to_probability(const CostVolume& cost, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorCode::kInvalidArgument, "temperature must be positive");
  const std::size_t d = cost.depth_count();
  const std::size_t n_pix = cost.pixels();
  ProbabilityVolume prob;
  prob.width = cost.width;
  prob.height = cost.height;
  prob.depth_count = d;
  prob.values.resize(d * n_pix);
  for (std::size_t p = 0; p < n_pix; ++p) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < d; ++l) lowest = std::min(lowest, cost.cost(l, p));
    double total = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double e = std::exp(-(cost.cost(l, p) - lowest) / temperature);
      prob.values[l * n_pix + p] = e;
      total += e;
    }
    for (std::size_t l = 0; l < d; ++l) prob.values[l * n_pix + p] /= total;
  }
  return prob;
}

std::size_t consecutive_argmax(std::span<const double> p) {
  if (p.size() < 2) fail(ErrorCode::kInvalidArgument, "need at least two bins");
  std::size_t best = 0;
  double best_sum = p[0] + p[1];
  for (std::size_t l = 1; l + 1 < p.size(); ++l) {
    const double s = p[l] + p[l + 1];
    if (s > best_sum) {
      best_sum = s;
      best = l;
    }
  }
  return best;
}

PixelEstimate depth_feature_confidence(
    std::span<const double> probabilities, std::span<const double> hypotheses,
    const Eigen::Ref<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>&
        features) {
  if (probabilities.size() != hypotheses.size()) {
    fail(ErrorCode::kInvalidArgument, "probabilities and hypotheses differ in length");
  }
  if (features.cols() > 0 && features.rows() != static_cast<Eigen::Index>(hypotheses.size())) {
    fail(ErrorCode::kInvalidArgument, "need one feature row per hypothesis");
  }
  PixelEstimate out;
  out.l0 = consecutive_argmax(probabilities);
  const double p0 = probabilities[out.l0];
  const double p1 = probabilities[out.l0 + 1];
  const double mass = p0 + p1;
  if (!(mass > 0.0)) return out;
  const double w0 = p0 / mass, w1 = p1 / mass;
  out.depth = w0 * hypotheses[out.l0] + w1 * hypotheses[out.l0 + 1];
  out.confidence = mass;
  out.feature.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    out.feature[static_cast<std::size_t>(c)] = static_cast<float>(
        w0 * features(static_cast<Eigen::Index>(out.l0), c) +
        w1 * features(static_cast<Eigen::Index>(out.l0 + 1), c));
  }
  out.valid = true;
  return out;
}

DepthConfidence estimate_depth(const ProbabilityVolume& prob, const CostVolume& cost) {
  const std::size_t d = prob.depth_count;
  const std::size_t n_pix = prob.pixels();
  if (d != cost.depth_count() || n_pix != cost.pixels()) {
    fail(ErrorCode::kInvalidArgument, "probability and cost volumes differ in shape");
  }
  const int c = cost.feature_channels;
  DepthConfidence out;
  out.width = prob.width;
  out.height = prob.height;
  out.feature_channels = c;
  out.camera = cost.reference_cam;
  out.depth.assign(n_pix, 0.0);
  out.confidence.assign(n_pix, 0.0);
  out.features.assign(n_pix * c, 0.0f);
  out.valid.assign(n_pix, 0);

  std::vector<double> column(d);
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> feats(d, c);
  for (std::size_t p = 0; p < n_pix; ++p) {
    for (std::size_t l = 0; l < d; ++l) {
      column[l] = prob.at(l, p);
      for (int k = 0; k < c; ++k) feats(static_cast<Eigen::Index>(l), k) = cost.feature(l, p)[k];
    }
    const PixelEstimate est = depth_feature_confidence(column, cost.hypotheses, feats);
    if (!est.valid) continue;
    out.depth[p] = est.depth;
    out.confidence[p] = est.confidence;
    std::copy(est.feature.begin(), est.feature.end(), out.features.begin() + p * c);
    out.valid[p] = 1;
  }
  return out;
}

FilteredPoints confidence_filter(const DepthConfidence& dc) {
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n_valid = 0;
  for (std::size_t p = 0; p < dc.valid.size(); ++p) {
    if (!dc.valid[p]) continue;
    sum += dc.confidence[p];
    lo = std::min(lo, dc.confidence[p]);
    hi = std::max(hi, dc.confidence[p]);
    ++n_valid;
  }
  if (n_valid == 0) fail(ErrorCode::kEmptyCloud, "no valid depth pixel to filter");
  FilteredPoints out;
  out.mean_confidence = sum / static_cast<double>(n_valid);
  const bool constant = lo == hi;
  for (std::size_t p = 0; p < dc.valid.size(); ++p) {
    if (!dc.valid[p]) continue;
    const double conf = dc.confidence[p];
    if (!(conf > out.mean_confidence || (constant && conf >= out.mean_confidence))) continue;
    const int x = static_cast<int>(p % dc.width);
    const int y = static_cast<int>(p / dc.width);
    out.points.push_back(backproject({x + 0.5, y + 0.5}, dc.depth[p], dc.camera));
    out.features.emplace_back(dc.features.begin() + p * dc.feature_channels,
                              dc.features.begin() + (p + 1) * dc.feature_channels);
    out.pixels.push_back(static_cast<std::uint32_t>(p));
  }
  return out;
}

FineResult fine_register(const GaussianModel& model_a, const GaussianModel& model_b,
                         std::span<const CameraPose> cams_a, std::span<const CameraPose> cams_b,
                         const Sim3& coarse, const FineConfig& cfg) {
  FineResult result;
  result.estimate.transform = coarse;
  result.estimate.status = RegistrationStatus::kFallback;
  if (cams_a.size() < 2 || cams_b.size() < 2) return result;

  try {
    Side a = reconstruct_side(model_a, cams_a, cfg);
    Side b = reconstruct_side(model_b, cams_b, cfg);
    result.points_a = a.points.points.size();
    result.points_b = b.points.points.size();

    const Sim3 norm = unit_box_normalizer(a.points.points);
    const ColoredPointCloud cloud_a = as_cloud(transform_points(a.points.points, norm));
    const ColoredPointCloud cloud_b =
        as_cloud(transform_points(b.points.points, norm * coarse));
    result.depth_a = std::move(a.dc);
    result.depth_b = std::move(b.dc);

    const double voxel = cfg.voxel_fraction;
    const ColoredPointCloud down_a = voxel_downsample(cloud_a, voxel);
    const ColoredPointCloud down_b = voxel_downsample(cloud_b, voxel);
    const double final_gate = cfg.icp_final_gate_factor * voxel;
    const double first_gate = cfg.icp_initial_gate_fraction;

    // Candidates: the coarse transform itself, ICP from it, and ICP from each
    // feature-matched RANSAC hypothesis. The largest mutual overlap wins, so a
    // refinement is only kept when it explains both reconstructions better.
    std::vector<RegistrationEstimate> candidates;
    RegistrationEstimate keep;
    keep.transform = Sim3::identity();
    candidates.push_back(keep);
    candidates.push_back(annealed_icp(down_b, down_a, Sim3::identity(), first_gate, final_gate, cfg));
    try {
      const DescriptorSet da = compute_descriptors(down_a, estimate_normals(down_a, cfg.normal_k),
                                                   cfg.descriptor_radius_factor * voxel,
                                                   ScaleLevel::kFine);
      const DescriptorSet db = compute_descriptors(down_b, estimate_normals(down_b, cfg.normal_k),
                                                   cfg.descriptor_radius_factor * voxel,
                                                   ScaleLevel::kFine);
      MatchOptions mo;
      mo.ratio = cfg.ratio;
      mo.spatial_gate = cfg.match_gate_fraction;
      RansacOptions ro;
      ro.iterations = cfg.ransac_iterations;
      ro.inlier_tol = cfg.inlier_tol_factor * voxel;
      ro.seed = cfg.seed;
      ro.min_scale = 0.8;
      ro.max_scale = 1.25;
      for (const RegistrationEstimate& seed :
           ransac_sim3_candidates(match_descriptors(da, db, mo), da.keypoints, db.keypoints, ro,
                                  cfg.ransac_candidates)) {
        candidates.push_back(
            annealed_icp(down_b, down_a, seed.transform, first_gate, final_gate, cfg));
      }
    } catch (const Error&) {
      // Too few features or matches; the ICP candidates stand on their own.
    }
    const RegistrationEstimate* chosen = nullptr;
    double best_score = -1.0;
    for (const RegistrationEstimate& c : candidates) {
      if (c.status != RegistrationStatus::kOk) continue;
      const double score = mutual_overlap(down_a, down_b, c.transform, final_gate);
      if (score > best_score) {
        best_score = score;
        chosen = &c;
      }
    }
    const RegistrationEstimate best = *chosen;

    result.delta = norm.inverse() * best.transform * norm;
    result.estimate.transform = result.delta * coarse;
    result.estimate.inlier_count = best.inlier_count;
    result.estimate.rmse = best.rmse / norm.s;
    result.estimate.status = RegistrationStatus::kOk;
  } catch (const Error&) {
    result.estimate.transform = coarse;
    result.estimate.status = RegistrationStatus::kFallback;
    result.delta = Sim3::identity();
  }
  return result;
}

}  // namespace gsreg
