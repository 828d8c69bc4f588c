#pragma once

#include "stream4d/geometry/types.hpp"

#include <cstdint>
#include <vector>

namespace stream4d {

struct FocalOptions {
  int max_iterations = 10;
  double relative_tolerance = 1e-6;
  std::size_t min_points = 32;
};

// Recovers a shared focal length (pixels) from a pixel-aligned camera-frame
// pointmap, principal point fixed at the image center. Weiszfeld-style
// reweighting of the per-pixel 2D residual norms.
// Throws DegenerateGeometry when every ray is on the optical axis or fewer
// than `min_points` points are usable.
double estimate_focal(const Pointmap& camera_points, const FocalOptions& options = {});

// Robust cost minimized by estimate_focal; exposed for independent checks.
double focal_cost(const Pointmap& camera_points, double focal);

struct PoseOptions {
  bool ransac = false;
  int ransac_iterations = 256;
  double ransac_threshold_px = 2.0;
  int max_gauss_newton_iterations = 50;
  std::uint64_t seed = 0;
};

// 2D-3D correspondence between the pixel grid and a pointmap.
struct Correspondences {
  std::vector<Eigen::Vector2d> pixels;
  std::vector<Eigen::Vector3d> points;
};
Correspondences grid_correspondences(const Pointmap& points);

// Camera-to-external pose of a pixel-aligned pointmap given intrinsics.
// DLT initialization, optional RANSAC, Gauss-Newton on reprojection error.
// Throws DegenerateGeometry (< 6 points, coplanar or collinear support) and
// NonConvergence.
SE3Pose estimate_pose(const Pointmap& points, const Intrinsics& k,
                      const PoseOptions& options = {});
SE3Pose estimate_pose(const Correspondences& corr, const Intrinsics& k,
                      const PoseOptions& options = {});

struct CameraEstimate {
  Intrinsics intrinsics;
  SE3Pose pose;  // camera-to-external
};

// Focal then pose. For pointmaps not tagged as camera-frame, an uncalibrated
// DLT first brings the points into an approximate camera frame so the focal
// estimate sees camera-frame coordinates.
CameraEstimate pose_estimate(const Pointmap& points, const PoseOptions& options = {});

// Mean reprojection error in pixels.
double reprojection_error(const Correspondences& corr, const Intrinsics& k,
                          const SE3Pose& camera_to_external);

}  // namespace stream4d
