#include "gsreg/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace gsreg {
namespace {

constexpr std::uint32_t kLeafSize = 12;

}  // namespace

KdTree::KdTree(std::span<const Eigen::Vector3d> points) : points_(points) {
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points.empty()) {
    nodes_.reserve(2 * points.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(points.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

Neighbor KdTree::nearest(const Eigen::Vector3d& query, std::int64_t exclude) const {
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  if (nodes_.empty()) return best;
  // Explicit stack of (node, squared distance lower bound).
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound >= best.distance_sq) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        if (static_cast<std::int64_t>(idx) == exclude) continue;
        const double d = (points_[idx] - query).squaredNorm();
        if (d < best.distance_sq || (d == best.distance_sq && idx < best.index)) {
          best = {idx, d};
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  return best;
}

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& query, std::size_t k) const {
  std::vector<Neighbor> result;
  if (nodes_.empty() || k == 0) return result;
  auto cmp = [](const Neighbor& a, const Neighbor& b) {
    return a.distance_sq < b.distance_sq ||
           (a.distance_sq == b.distance_sq && a.index < b.index);
  };
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(cmp)> heap(cmp);
  auto worst = [&] {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().distance_sq;
  };

  std::vector<std::pair<std::int32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - query).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cmp(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  result.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    result[i] = heap.top();
    heap.pop();
  }
  return result;
}

void KdTree::radius_search(const Eigen::Vector3d& query, double radius,
                           std::vector<Neighbor>& out) const {
  out.clear();
  if (nodes_.empty()) return;
  const double r2 = radius * radius;
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > r2) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d = (points_[idx] - query).squaredNorm();
        if (d <= r2) out.push_back({idx, d});
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
}

}  // namespace gsreg
