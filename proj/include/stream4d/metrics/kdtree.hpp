#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace stream4d::metrics {

// Static 3-d tree over a point set. Queries are exact.
class KdTree {
 public:
  explicit KdTree(std::vector<Eigen::Vector3d> points);

  struct Hit {
    std::size_t index = 0;
    double distance = 0.0;
  };

  // Nearest point; the tree must be nonempty.
  Hit nearest(const Eigen::Vector3d& query) const;
  // The k nearest points sorted by distance (fewer if the set is smaller).
  std::vector<Hit> k_nearest(const Eigen::Vector3d& query, std::size_t k) const;

  std::size_t size() const { return points_.size(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

 private:
  struct Node {
    std::size_t point = 0;  // index into points_
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end);

  std::vector<Eigen::Vector3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace stream4d::metrics
