#include "stream4d/metrics/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace stream4d::metrics {

KdTree::KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  std::vector<std::size_t> order(points_.size());
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(order, 0, order.size());
}

int KdTree::build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  if (begin >= end) return -1;
  // Split on the axis of largest extent.
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order[i]]);
    hi = hi.cwiseMax(points_[order[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({order[mid], axis, -1, -1});
  const int left = build(order, begin, mid);
  const int right = build(order, mid + 1, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Hit KdTree::nearest(const Eigen::Vector3d& query) const {
  const auto hits = k_nearest(query, 1);
  return hits.front();
}

std::vector<KdTree::Hit> KdTree::k_nearest(const Eigen::Vector3d& query, std::size_t k) const {
  // Max-heap on squared distance, ties resolved toward the lower index.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  if (k == 0 || root_ < 0) return {};
  struct Frame {
    int node;
    double plane_gap2;  // squared lower bound on the distance to the subtree
  };
  std::vector<Frame> todo{{root_, 0.0}};
  while (!todo.empty()) {
    const Frame f = todo.back();
    todo.pop_back();
    if (f.node < 0) continue;
    if (heap.size() == k && f.plane_gap2 > heap.top().first) continue;
    const Node& n = nodes_[f.node];
    const Eigen::Vector3d& p = points_[n.point];
    const double d2 = (p - query).squaredNorm();
    if (heap.size() < k) {
      heap.emplace(d2, n.point);
    } else if (d2 < heap.top().first ||
               (d2 == heap.top().first && n.point < heap.top().second)) {
      heap.pop();
      heap.emplace(d2, n.point);
    }
    const double delta = query[n.axis] - p[n.axis];
    const int near = delta < 0.0 ? n.left : n.right;
    const int far = delta < 0.0 ? n.right : n.left;
    // Far side first on the stack so the near side is explored first.
    todo.push_back({far, std::max(f.plane_gap2, delta * delta)});
    todo.push_back({near, f.plane_gap2});
  }
  std::vector<Hit> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().second, std::sqrt(heap.top().first)};
    heap.pop();
  }
  return out;
}

}  // namespace stream4d::metrics
