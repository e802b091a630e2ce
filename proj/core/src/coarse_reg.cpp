#include "gsreg/coarse_reg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gsreg/error.hpp"
#include "gsreg/kdtree.hpp"

namespace gsreg {
namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

// Pair features (alpha, phi, theta) of two oriented points, with source and
// target chosen so that the result does not depend on query order.
bool pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1,
                   const Eigen::Vector3d& p2, const Eigen::Vector3d& n2, double& alpha,
                   double& phi, double& theta) {
  Eigen::Vector3d d = p2 - p1;
  const double len = d.norm();
  if (len <= 0.0) return false;
  d /= len;
  const double a1 = n1.dot(d);
  const double a2 = n2.dot(d);
  Eigen::Vector3d u = n1;
  Eigen::Vector3d nt = n2;
  // The source is the point whose normal makes the smaller angle with the
  // connecting line. Near ties (equal normals) keep the given order, otherwise
  // rounding would flip the sign of phi.
  if (std::abs(a1) < std::abs(a2) - 1e-9) {
    u = n2;
    nt = n1;
    d = -d;
    phi = -a2;
  } else {
    phi = a1;
  }
  Eigen::Vector3d v = d.cross(u);
  const double vn = v.norm();
  if (vn <= 1e-12) return false;
  v /= vn;
  const Eigen::Vector3d w = u.cross(v);
  alpha = v.dot(nt);
  theta = std::atan2(w.dot(nt), u.dot(nt));
  return true;
}

// Linear interpolation between neighbouring bin centres.
void soft_bin(double value, double lo, double hi, float* hist, float weight) {
  constexpr int kBins = DescriptorSet::kBins;
  const double t = (value - lo) / (hi - lo) * kBins - 0.5;
  const double fl = std::floor(t);
  const int i0 = static_cast<int>(fl);
  const double frac = t - fl;
  const int c0 = std::clamp(i0, 0, kBins - 1);
  const int c1 = std::clamp(i0 + 1, 0, kBins - 1);
  hist[c0] += weight * static_cast<float>(1.0 - frac);
  hist[c1] += weight * static_cast<float>(frac);
}

double median_spacing(const std::vector<Eigen::Vector3d>& points, const KdTree& tree) {
  const std::size_t stride = std::max<std::size_t>(1, points.size() / 2000);
  std::vector<double> dists;
  for (std::size_t i = 0; i < points.size(); i += stride) {
    const Neighbor nn = tree.nearest(points[i], static_cast<std::int64_t>(i));
    if (std::isfinite(nn.distance_sq)) dists.push_back(std::sqrt(nn.distance_sq));
  }
  if (dists.empty()) return 0.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

}  // namespace

double median_nn_spacing(const std::vector<Eigen::Vector3d>& points) {
  if (points.size() < 2) return 0.0;
  const KdTree tree(points);
  return median_spacing(points, tree);
}

Sim3 unit_box_normalizer(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) return Sim3::identity();
  const Eigen::AlignedBox3d box = bounding_box(points);
  const double diag = box.diagonal().norm();
  const double k = diag > 0.0 ? 1.0 / diag : 1.0;
  Sim3 n;
  n.s = k;
  n.T = -k * box.center();
  return n;
}

std::string_view to_string(RegistrationStatus status) {
  switch (status) {
    case RegistrationStatus::kOk: return "ok";
    case RegistrationStatus::kStarved: return "starved";
    case RegistrationStatus::kFallback: return "fallback";
  }
  return "unknown";
}

std::vector<Eigen::Vector3d> transform_points(std::span<const Eigen::Vector3d> points,
                                              const Sim3& x) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(x.apply(p));
  return out;
}

ColoredPointCloud transform_cloud(const ColoredPointCloud& cloud, const Sim3& x) {
  ColoredPointCloud out = cloud;
  for (auto& p : out.points) p = x.apply(p);
  return out;
}

ColoredPointCloud voxel_downsample(const ColoredPointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) fail(ErrorCode::kInvalidArgument, "voxel size must be positive");
  if (cloud.empty()) fail(ErrorCode::kEmptyCloud, "cannot downsample an empty cloud");

  struct Accum {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double o = 0.0;
    std::size_t n = 0;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  std::vector<Accum> acc;
  slot.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                       static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                       static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    auto [it, inserted] = slot.try_emplace(key, acc.size());
    if (inserted) acc.emplace_back();
    Accum& a = acc[it->second];
    a.p += p;
    a.c += cloud.colors[i];
    a.o += cloud.opacities[i];
    ++a.n;
  }
  ColoredPointCloud out;
  out.reserve(acc.size());
  for (const Accum& a : acc) {
    const double inv = 1.0 / static_cast<double>(a.n);
    out.push_back(a.p * inv, a.c * inv, a.o * inv);
  }
  return out;
}

Normals estimate_normals(const ColoredPointCloud& cloud, std::size_t k) {
  if (k < 3) fail(ErrorCode::kInvalidArgument, "normal estimation needs k >= 3");
  if (cloud.size() <= k) {
    fail(ErrorCode::kInvalidArgument, "normal estimation needs more points than k");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  const KdTree tree(cloud.points);
  Normals out;
  out.normals.resize(cloud.size());
  out.low_confidence.assign(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = tree.knn(cloud.points[i], k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const Neighbor& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Neighbor& n : nbrs) {
      const Eigen::Vector3d d = cloud.points[n.index] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    Eigen::Vector3d normal = eig.eigenvectors().col(0);
    if (evals[1] <= 1e-9 * std::max(evals[2], std::numeric_limits<double>::min())) {
      out.low_confidence[i] = 1;
      // Any unit vector orthogonal to the dominant direction.
      const Eigen::Vector3d line = eig.eigenvectors().col(2);
      normal = line.unitOrthogonal();
    }
    if (normal.dot(cloud.points[i] - centroid) < 0.0) normal = -normal;
    out.normals[i] = normal.normalized();
  }
  return out;
}

DescriptorSet compute_descriptors(const ColoredPointCloud& cloud, const Normals& normals,
                                  double radius, ScaleLevel level) {
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidArgument, "descriptor radius must be positive");
  if (normals.normals.size() != cloud.size()) {
    fail(ErrorCode::kInvalidArgument, "normals and cloud sizes differ");
  }
  constexpr int kBins = DescriptorSet::kBins;
  constexpr int kDim = DescriptorSet::kDim;
  constexpr std::size_t kMinNeighbors = 5;
  const std::size_t n = cloud.size();
  const KdTree tree(cloud.points);

  // Simplified histograms per point plus the neighbourhoods they came from.
  std::vector<std::vector<Neighbor>> neighborhoods(n);
  Eigen::Matrix<float, Eigen::Dynamic, kDim, Eigen::RowMajor> spfh(n, kDim);
  spfh.setZero();
  std::vector<Neighbor> found;
  for (std::size_t i = 0; i < n; ++i) {
    tree.radius_search(cloud.points[i], radius, found);
    auto& nb = neighborhoods[i];
    nb.clear();
    for (const Neighbor& f : found) {
      if (f.index != i) nb.push_back(f);
    }
    std::sort(nb.begin(), nb.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.index < b.index;
    });
    float* row = spfh.row(static_cast<Eigen::Index>(i)).data();
    std::size_t used = 0;
    for (const Neighbor& f : nb) {
      double alpha, phi, theta;
      if (!pair_features(cloud.points[i], normals.normals[i], cloud.points[f.index],
                         normals.normals[f.index], alpha, phi, theta)) {
        continue;
      }
      soft_bin(alpha, -1.0, 1.0, row, 1.0f);
      soft_bin(phi, -1.0, 1.0, row + kBins, 1.0f);
      soft_bin(theta, -std::numbers::pi, std::numbers::pi, row + 2 * kBins, 1.0f);
      ++used;
    }
    if (used > 0) spfh.row(static_cast<Eigen::Index>(i)) /= static_cast<float>(used);
  }

  DescriptorSet out;
  out.scale_level = level;
  std::vector<Eigen::Matrix<float, 1, kDim>> rows;
  const double min_weight_dist = 0.1 * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = neighborhoods[i];
    if (nb.size() < kMinNeighbors) continue;
    Eigen::Matrix<float, 1, kDim> d = spfh.row(static_cast<Eigen::Index>(i));
    Eigen::Matrix<float, 1, kDim> sum = Eigen::Matrix<float, 1, kDim>::Zero();
    for (const Neighbor& f : nb) {
      const double w = 1.0 / std::max(std::sqrt(f.distance_sq), min_weight_dist);
      sum += static_cast<float>(w) * spfh.row(f.index);
    }
    d += sum / static_cast<float>(nb.size());
    const float l1 = d.cwiseAbs().sum();
    if (!(l1 > 0.0f)) continue;
    d /= l1;
    rows.push_back(d);
    out.keypoints.push_back(cloud.points[i]);
    out.cloud_index.push_back(static_cast<std::uint32_t>(i));
  }
  out.descriptors.resize(static_cast<Eigen::Index>(rows.size()), kDim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.descriptors.row(static_cast<Eigen::Index>(r)) = rows[r];
  }
  return out;
}

CorrespondenceSet match_descriptors(const DescriptorSet& a, const DescriptorSet& b,
                                    const MatchOptions& options) {
  if (a.size() == 0 || b.size() == 0) {
    fail(ErrorCode::kNoOverlap, "cannot match an empty descriptor set");
  }
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  struct Best {
    std::int64_t index = -1;
    double d1 = kInf;  // squared
    double d2 = kInf;
  };
  std::vector<Best> best_a(static_cast<std::size_t>(na));
  std::vector<Best> best_b(static_cast<std::size_t>(nb));
  auto offer = [](Best& best, std::int64_t idx, double d) {
    if (d < best.d1 || (d == best.d1 && idx < best.index)) {
      best.d2 = best.d1;
      best.d1 = d;
      best.index = idx;
    } else if (d < best.d2) {
      best.d2 = d;
    }
  };

  if (options.spatial_gate) {
    const KdTree tree_b(b.keypoints);
    std::vector<Neighbor> cand;
    for (Eigen::Index i = 0; i < na; ++i) {
      tree_b.radius_search(a.keypoints[static_cast<std::size_t>(i)], *options.spatial_gate,
                           cand);
      std::sort(cand.begin(), cand.end(),
                [](const Neighbor& x, const Neighbor& y) { return x.index < y.index; });
      for (const Neighbor& c : cand) {
        const double d = static_cast<double>(
            (a.descriptors.row(i) - b.descriptors.row(c.index)).squaredNorm());
        offer(best_a[static_cast<std::size_t>(i)], c.index, d);
        offer(best_b[c.index], i, d);
      }
    }
  } else {
    const Eigen::VectorXf norm_b = b.descriptors.rowwise().squaredNorm();
    constexpr Eigen::Index kBlock = 256;
    for (Eigen::Index start = 0; start < na; start += kBlock) {
      const Eigen::Index rows = std::min(kBlock, na - start);
      const auto block = a.descriptors.middleRows(start, rows);
      const Eigen::MatrixXf dots = block * b.descriptors.transpose();
      const Eigen::VectorXf norm_a = block.rowwise().squaredNorm();
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < nb; ++c) {
          const double d =
              std::max(0.0, static_cast<double>(norm_a[r] + norm_b[c] - 2.0f * dots(r, c)));
          offer(best_a[static_cast<std::size_t>(start + r)], c, d);
          offer(best_b[static_cast<std::size_t>(c)], start + r, d);
        }
      }
    }
  }

  CorrespondenceSet out;
  for (Eigen::Index i = 0; i < na; ++i) {
    const Best& ba = best_a[static_cast<std::size_t>(i)];
    if (ba.index < 0) continue;
    if (best_b[static_cast<std::size_t>(ba.index)].index != i) continue;  // not mutual
    const double ratio = std::isfinite(ba.d2)
                             ? (ba.d2 > 0.0 ? std::sqrt(ba.d1) / std::sqrt(ba.d2) : 1.0)
                             : 0.0;
    if (!(ratio < options.ratio)) continue;
    out.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(ba.index),
                         1.0 - ratio});
  }
  if (out.pairs.empty()) {
    fail(ErrorCode::kNoOverlap, "no descriptor correspondences survived matching");
  }
  return out;
}

Sim3 umeyama_sim3(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst,
                  bool with_scale) {
  if (src.size() != dst.size()) {
    fail(ErrorCode::kInvalidArgument, "umeyama: point sets differ in size");
  }
  if (src.size() < 3) fail(ErrorCode::kDegenerate, "umeyama: need at least three points");
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d cov_s = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d ds = src[i] - mu_s;
    const Eigen::Vector3d dd = dst[i] - mu_d;
    cov += dd * ds.transpose();
    cov_s += ds * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  cov_s /= n;
  var_s /= n;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig_s(cov_s);
  const Eigen::Vector3d ev = eig_s.eigenvalues();
  if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2]) {
    fail(ErrorCode::kDegenerate, "umeyama: source points are colinear or coincident");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    fail(ErrorCode::kDegenerate, "umeyama: cross-covariance has rank < 2");
  }
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

  Sim3 out;
  out.R = svd.matrixU() * S * svd.matrixV().transpose();
  out.s = with_scale ? (sv.asDiagonal() * S).trace() / var_s : 1.0;
  if (!(out.s > 0.0)) fail(ErrorCode::kDegenerate, "umeyama: non-positive scale");
  out.T = mu_d - out.s * (out.R * mu_s);
  return out;
}

std::vector<RegistrationEstimate> ransac_sim3_candidates(
    const CorrespondenceSet& corr, std::span<const Eigen::Vector3d> a_keypoints,
    std::span<const Eigen::Vector3d> b_keypoints, const RansacOptions& options,
    std::size_t max_candidates) {
  if (corr.size() < 3) {
    fail(ErrorCode::kRegistrationFailure, "RANSAC needs at least three correspondences");
  }
  if (!(options.inlier_tol > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "RANSAC inlier tolerance must be positive");
  }
  if (max_candidates == 0) fail(ErrorCode::kInvalidArgument, "max_candidates must be positive");
  for (const Correspondence& c : corr.pairs) {
    if (c.index_a >= a_keypoints.size() || c.index_b >= b_keypoints.size()) {
      fail(ErrorCode::kInvalidArgument, "correspondence index out of range");
    }
  }
  const std::size_t m = corr.size();
  const double tol2 = options.inlier_tol * options.inlier_tol;

  auto count_inliers = [&](const Sim3& x, std::vector<std::uint32_t>* inliers) {
    std::size_t count = 0;
    if (inliers) inliers->clear();
    for (std::size_t k = 0; k < m; ++k) {
      const Correspondence& c = corr.pairs[k];
      if ((a_keypoints[c.index_a] - x.apply(b_keypoints[c.index_b])).squaredNorm() <= tol2) {
        ++count;
        if (inliers) inliers->push_back(static_cast<std::uint32_t>(k));
      }
    }
    return count;
  };
  auto fit = [&](std::span<const std::uint32_t> ids, Sim3& out) {
    std::vector<Eigen::Vector3d> src, dst;
    src.reserve(ids.size());
    dst.reserve(ids.size());
    for (std::uint32_t k : ids) {
      src.push_back(b_keypoints[corr.pairs[k].index_b]);
      dst.push_back(a_keypoints[corr.pairs[k].index_a]);
    }
    try {
      out = umeyama_sim3(src, dst, true);
    } catch (const Error&) {
      return false;
    }
    return out.s >= options.min_scale && out.s <= options.max_scale;
  };

  // Hypotheses closer than this on the matched B keypoints count as one.
  Eigen::Vector3d b_centroid = Eigen::Vector3d::Zero();
  for (const Correspondence& c : corr.pairs) b_centroid += b_keypoints[c.index_b];
  b_centroid /= static_cast<double>(m);
  double b_extent = 0.0;
  for (const Correspondence& c : corr.pairs) {
    b_extent = std::max(b_extent, (b_keypoints[c.index_b] - b_centroid).norm());
  }
  auto same = [&](const Sim3& x, const Sim3& y) {
    const Eigen::Vector3d probes[4] = {b_centroid, b_centroid + b_extent * Eigen::Vector3d::UnitX(),
                                       b_centroid + b_extent * Eigen::Vector3d::UnitY(),
                                       b_centroid + b_extent * Eigen::Vector3d::UnitZ()};
    for (const auto& q : probes) {
      if ((x.apply(q) - y.apply(q)).norm() > 2.0 * options.inlier_tol) return false;
    }
    return true;
  };

  struct Hypothesis {
    Sim3 x;
    std::size_t count;
  };
  // Refinement can pull distinct raw hypotheses together, so a larger pool is
  // kept and deduplicated again afterwards.
  const std::size_t pool_size = 4 * max_candidates;
  std::vector<Hypothesis> top;  // sorted by count, descending, mutually distinct
  auto offer = [&](const Sim3& x, std::size_t count) {
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (!same(top[i].x, x)) continue;
      if (count <= top[i].count) return;
      top.erase(top.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
    if (top.size() == pool_size && count <= top.back().count) return;
    auto pos = std::find_if(top.begin(), top.end(), [&](const Hypothesis& h) { return h.count < count; });
    top.insert(pos, {x, count});
    if (top.size() > pool_size) top.pop_back();
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::uint32_t ids[3];
    ids[0] = static_cast<std::uint32_t>(pick(rng));
    do ids[1] = static_cast<std::uint32_t>(pick(rng)); while (ids[1] == ids[0] && m > 1);
    do ids[2] = static_cast<std::uint32_t>(pick(rng));
    while ((ids[2] == ids[0] || ids[2] == ids[1]) && m > 2);

    if (options.edge_ratio_tolerance > 1.0) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      bool ok = true;
      for (int e = 0; e < 3 && ok; ++e) {
        const auto& c0 = corr.pairs[ids[e]];
        const auto& c1 = corr.pairs[ids[(e + 1) % 3]];
        const double la = (a_keypoints[c0.index_a] - a_keypoints[c1.index_a]).norm();
        const double lb = (b_keypoints[c0.index_b] - b_keypoints[c1.index_b]).norm();
        if (la <= 0.0 || lb <= 0.0) {
          ok = false;
          break;
        }
        lo = std::min(lo, lb / la);
        hi = std::max(hi, lb / la);
      }
      if (!ok || hi > options.edge_ratio_tolerance * lo) continue;
    }

    Sim3 x;
    if (!fit(ids, x)) continue;
    const std::size_t count = count_inliers(x, nullptr);
    if (count >= std::max<std::size_t>(3, options.min_inliers)) offer(x, count);
  }
  if (top.empty()) {
    fail(ErrorCode::kRegistrationFailure, "RANSAC found no hypothesis with enough inliers");
  }

  std::vector<RegistrationEstimate> out;
  for (const Hypothesis& h : top) {
    if (out.size() == max_candidates) break;
    Sim3 best = h.x;
    std::vector<std::uint32_t> inliers;
    count_inliers(best, &inliers);
    for (std::size_t round = 0; round < options.refinement_rounds; ++round) {
      Sim3 refit;
      if (!fit(inliers, refit)) break;
      std::vector<std::uint32_t> next;
      const std::size_t count = count_inliers(refit, &next);
      if (count < inliers.size()) break;
      best = refit;
      const bool stable = next == inliers;
      inliers = std::move(next);
      if (stable) break;
    }
    RegistrationEstimate est;
    est.transform = best;
    est.inlier_count = inliers.size();
    double sum = 0.0;
    for (std::uint32_t k : inliers) {
      const auto& c = corr.pairs[k];
      sum += (a_keypoints[c.index_a] - best.apply(b_keypoints[c.index_b])).squaredNorm();
    }
    est.rmse = inliers.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(inliers.size()));
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const RegistrationEstimate& e) {
      return same(e.transform, est.transform);
    });
    if (!duplicate) out.push_back(std::move(est));
  }
  std::stable_sort(out.begin(), out.end(), [](const RegistrationEstimate& x, const RegistrationEstimate& y) {
    return x.inlier_count > y.inlier_count;
  });
  return out;
}

RegistrationEstimate ransac_sim3(const CorrespondenceSet& corr,
                                 std::span<const Eigen::Vector3d> a_keypoints,
                                 std::span<const Eigen::Vector3d> b_keypoints,
                                 const RansacOptions& options) {
  return ransac_sim3_candidates(corr, a_keypoints, b_keypoints, options, 1).front();
}

RegistrationEstimate scaled_icp(const ColoredPointCloud& src, const ColoredPointCloud& dst,
                                const Sim3& init, std::size_t max_iters, double tol,
                                const IcpOptions& options) {
  if (!init.is_valid(1e-6)) fail(ErrorCode::kInvalidArgument, "ICP init is not a valid Sim3");
  if (src.empty() || dst.empty()) fail(ErrorCode::kEmptyCloud, "ICP on an empty cloud");

  const KdTree tree(dst.points);
  const double gate =
      options.gate ? *options.gate : options.gate_factor * median_spacing(dst.points, tree);
  const double gate2 = gate * gate;

  std::vector<Eigen::Vector3d> src_pts;
  const std::size_t stride =
      options.max_src_points > 0
          ? std::max<std::size_t>(1, (src.size() + options.max_src_points - 1) /
                                         options.max_src_points)
          : 1;
  for (std::size_t i = 0; i < src.size(); i += stride) src_pts.push_back(src.points[i]);

  struct Pairs {
    std::vector<Eigen::Vector3d> s, d;
    double rmse = std::numeric_limits<double>::infinity();  // over gated pairs
    double residual = std::numeric_limits<double>::infinity();  // truncated, over all
  };
  auto associate = [&](const Sim3& x) {
    Pairs p;
    double sum = 0.0, truncated = 0.0;
    for (const auto& q : src_pts) {
      const Eigen::Vector3d xq = x.apply(q);
      const Neighbor nn = tree.nearest(xq);
      if (nn.distance_sq <= gate2) {
        p.s.push_back(q);
        p.d.push_back(dst.points[nn.index]);
        sum += nn.distance_sq;
        truncated += nn.distance_sq;
      } else {
        truncated += gate2;
      }
    }
    if (!p.s.empty()) p.rmse = std::sqrt(sum / static_cast<double>(p.s.size()));
    p.residual = std::sqrt(truncated / static_cast<double>(src_pts.size()));
    return p;
  };

  RegistrationEstimate est;
  est.transform = init;
  Pairs cur = associate(init);
  est.inlier_count = cur.s.size();
  est.rmse = cur.rmse;
  if (cur.s.size() < options.min_pairs || !(gate > 0.0)) {
    est.status = RegistrationStatus::kStarved;
    return est;
  }
  est.residual_history.push_back(cur.residual);

  for (std::size_t it = 0; it < max_iters; ++it) {
    Sim3 next;
    try {
      next = umeyama_sim3(cur.s, cur.d, options.with_scale);
    } catch (const Error&) {
      break;
    }
    Pairs cand = associate(next);
    if (cand.s.size() < options.min_pairs || cand.residual > cur.residual) break;
    const double improvement = cur.residual - cand.residual;
    est.transform = next;
    cur = std::move(cand);
    est.residual_history.push_back(cur.residual);
    if (improvement < tol) break;
  }
  est.inlier_count = cur.s.size();
  est.rmse = cur.rmse;
  return est;
}

double truncated_residual(const ColoredPointCloud& src, const ColoredPointCloud& dst,
                          const Sim3& x, double gate) {
  if (src.empty() || dst.empty()) fail(ErrorCode::kEmptyCloud, "residual on an empty cloud");
  if (!(gate > 0.0)) fail(ErrorCode::kInvalidArgument, "residual gate must be positive");
  const KdTree tree(dst.points);
  const double gate2 = gate * gate;
  double sum = 0.0;
  for (const auto& q : src.points) sum += std::min(gate2, tree.nearest(x.apply(q)).distance_sq);
  return std::sqrt(sum / static_cast<double>(src.size()));
}

double inlier_fraction(const ColoredPointCloud& src, const ColoredPointCloud& dst, const Sim3& x,
                       double tol) {
  if (src.empty() || dst.empty()) fail(ErrorCode::kEmptyCloud, "inlier fraction on an empty cloud");
  const KdTree tree(dst.points);
  const double tol2 = tol * tol;
  std::size_t count = 0;
  for (const auto& q : src.points) count += tree.nearest(x.apply(q)).distance_sq <= tol2 ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(src.size());
}

double mutual_overlap(const ColoredPointCloud& a, const ColoredPointCloud& b, const Sim3& x,
                      double tol) {
  return std::sqrt(inlier_fraction(b, a, x, tol) * inlier_fraction(a, b, x.inverse(), tol));
}

RegistrationEstimate register_clouds(const ColoredPointCloud& cloud_a,
                                     const ColoredPointCloud& cloud_b,
                                     const FeatureRegistrationConfig& cfg) {
  const ColoredPointCloud fine_a = voxel_downsample(cloud_a, cfg.voxel);
  const ColoredPointCloud fine_b = voxel_downsample(cloud_b, cfg.voxel);
  if (fine_a.size() <= cfg.normal_k || fine_b.size() <= cfg.normal_k) {
    fail(ErrorCode::kRegistrationFailure, "too few points after downsampling");
  }
  const DescriptorSet desc_a = compute_descriptors(
      fine_a, estimate_normals(fine_a, cfg.normal_k), cfg.descriptor_radius, ScaleLevel::kCoarse);
  const DescriptorSet desc_b = compute_descriptors(
      fine_b, estimate_normals(fine_b, cfg.normal_k), cfg.descriptor_radius, ScaleLevel::kCoarse);
  const CorrespondenceSet corr = match_descriptors(desc_a, desc_b, cfg.match);
  const std::vector<RegistrationEstimate> seeds = ransac_sim3_candidates(
      corr, desc_a.keypoints, desc_b.keypoints, cfg.ransac, cfg.ransac_candidates);

  // Each hypothesis is refined by ICP, first on the downsampled clouds (whose
  // spacing matches the RANSAC tolerance) and then on the full clouds. The
  // winner has the largest mutual overlap: one-sided scores favour shrinking B
  // into a dense part of A.
  std::optional<RegistrationEstimate> best;
  double best_score = -1.0;
  for (const RegistrationEstimate& seed : seeds) {
    const RegistrationEstimate level =
        scaled_icp(fine_b, fine_a, seed.transform, cfg.icp_max_iters, cfg.icp_tol);
    if (level.status == RegistrationStatus::kStarved) continue;
    RegistrationEstimate refined =
        scaled_icp(cloud_b, cloud_a, level.transform, cfg.icp_max_iters, cfg.icp_tol);
    if (refined.status == RegistrationStatus::kStarved) continue;
    const double score = mutual_overlap(fine_a, fine_b, refined.transform, cfg.voxel);
    if (score > best_score) {
      best_score = score;
      best = std::move(refined);
    }
  }
  if (!best) {
    RegistrationEstimate out = seeds.front();
    out.status = RegistrationStatus::kStarved;
    return out;
  }
  return *best;
}

RegistrationEstimate coarse_register(const ColoredPointCloud& cloud_a,
                                     const ColoredPointCloud& cloud_b, const CoarseConfig& cfg) {
  if (cloud_a.empty() || cloud_b.empty()) {
    fail(ErrorCode::kEmptyCloud, "coarse registration needs two non-empty clouds");
  }
  const Sim3 norm_a = unit_box_normalizer(cloud_a.points);
  const Sim3 norm_b = unit_box_normalizer(cloud_b.points);

  FeatureRegistrationConfig fc;
  fc.voxel = cfg.voxel_fraction;
  fc.normal_k = cfg.normal_k;
  fc.descriptor_radius = cfg.descriptor_radius_factor * cfg.voxel_fraction;
  fc.match.ratio = cfg.ratio;
  fc.ransac.iterations = cfg.ransac_iterations;
  fc.ransac.inlier_tol = cfg.inlier_tol_factor * cfg.voxel_fraction;
  fc.ransac.seed = cfg.seed;
  fc.ransac.min_scale = 0.25;
  fc.ransac.max_scale = 4.0;
  fc.icp_max_iters = cfg.icp_max_iters;
  fc.icp_tol = cfg.icp_tol;
  fc.ransac_candidates = cfg.ransac_candidates;

  RegistrationEstimate est =
      register_clouds(transform_cloud(cloud_a, norm_a), transform_cloud(cloud_b, norm_b), fc);
  est.transform = norm_a.inverse() * est.transform * norm_b;
  const double to_a_units = 1.0 / norm_a.s;
  est.rmse *= to_a_units;
  for (double& r : est.residual_history) r *= to_a_units;
  return est;
}

}  // namespace gsreg
