#pragma once

#include "stream4d/geometry/types.hpp"

#include <vector>

namespace stream4d::metrics {

struct Summary {
  double mean = 0.0;
  double median = 0.0;
};

// Mean and median of `values` (median of an even count averages the middle
// pair). Throws EmptyCloud on empty input.
Summary summarize(std::vector<double> values);

// Predicted -> nearest ground-truth distance.
Summary accuracy(const std::vector<Eigen::Vector3d>& pred,
                 const std::vector<Eigen::Vector3d>& gt);
// Ground-truth -> nearest predicted distance.
Summary completion(const std::vector<Eigen::Vector3d>& pred,
                   const std::vector<Eigen::Vector3d>& gt);

struct NormalCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // unit length
};

// Normals from central differences on the pixel grid; pixels with an
// invalid 4-neighbour or a degenerate cross product are dropped.
NormalCloud grid_normals(const Pointmap& points);
// Normals of unstructured points from the covariance of their k nearest
// neighbours (the point itself included).
NormalCloud pca_normals(const std::vector<Eigen::Vector3d>& points, std::size_t k = 16);

// |n_pred . n_gt| over predicted -> nearest ground-truth pairs.
Summary normal_consistency(const NormalCloud& pred, const NormalCloud& gt);
Summary normal_consistency(const Pointmap& pred, const Pointmap& gt);

struct ReconReport {
  Summary accuracy;
  Summary completion;
  Summary normal_consistency;
};

struct DepthReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;  // fraction with max ratio < 1.25
  double delta2 = 0.0;  // < 1.25^2
  double delta3 = 0.0;  // < 1.25^3
  std::size_t pixels = 0;
};

// Over pixels valid in both maps. Throws EmptyMask when none are shared and
// NonPositiveDepth for a shared pixel with depth <= 0.
DepthReport depth_metrics(const DepthMap& pred, const DepthMap& gt);

}  // namespace stream4d::metrics
