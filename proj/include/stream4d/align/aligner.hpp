#pragma once

#include "stream4d/geometry/pose_estimation.hpp"
#include "stream4d/geometry/types.hpp"

#include <vector>

namespace stream4d::align {

// Registers a pointmap into the world frame using its recovered camera and
// the ground-truth camera: the depth of each pixel in the estimated camera is
// unprojected through gt_k and gt_pose. Pixel (u, v) of the output is pixel
// (u, v) of the input.
Pointmap align_to_world(const Pointmap& points, const Intrinsics& gt_k, const SE3Pose& gt_pose,
                        const PoseOptions& options = {});
// Same with an already recovered camera.
Pointmap align_to_world(const Pointmap& points, const CameraEstimate& estimate,
                        const Intrinsics& gt_k, const SE3Pose& gt_pose);

struct ScenePoint {
  Eigen::Vector3d position;
  double confidence = 1.0;
  int sensor = 0;
  int t_index = 0;
};

struct FrameCloud {
  const Pointmap* points = nullptr;  // world frame
  const ConfidenceMap* confidence = nullptr;
  int sensor = 0;
  int t_index = 0;
};

// Valid points with confidence >= gamma, in frame order then pixel order.
std::vector<ScenePoint> assemble_scene(const std::vector<FrameCloud>& frames, double gamma = 1.5);

struct AlignedFrame {
  const Pointmap* points = nullptr;  // world frame
  Intrinsics intrinsics;
  SE3Pose pose;  // camera-to-world
  int sensor = 0;
};

struct ConsistencyReport {
  double max = 0.0;
  double mean = 0.0;
  std::size_t samples = 0;
};

// For every ordered pair of frames, points of the first that project into
// the second and pass its depth test are compared against the second's local
// tangent plane. Pixels whose 3x3 neighbourhood is not planar (edges) in
// either frame, or whose two tangent planes disagree in orientation
// (|n_a . n_b| < normal_agreement), are treated as not co-visible.
ConsistencyReport cross_sensor_consistency(const std::vector<AlignedFrame>& frames,
                                           double depth_tolerance = 0.02,
                                           double normal_agreement = 0.99);

}  // namespace stream4d::align
