#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gsreg {

struct Neighbor {
  std::uint32_t index;
  double distance_sq;
};

// Static 3D kd-tree over a borrowed point array. The points must outlive the
// tree and must not be modified after construction.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }

  // Nearest point; `exclude` skips one index (self queries). Returns
  // distance_sq = +inf when the tree holds no eligible point.
  Neighbor nearest(const Eigen::Vector3d& query,
                   std::int64_t exclude = -1) const;

  // k nearest, sorted by ascending distance.
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, std::size_t k) const;

  // All points within `radius` (inclusive), unsorted.
  void radius_search(const Eigen::Vector3d& query, double radius,
                     std::vector<Neighbor>& out) const;

 private:
  struct Node {
    // Leaves: [begin, end) into order_. Inner nodes: split on axis at value.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = -1;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::span<const Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace gsreg
