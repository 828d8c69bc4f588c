#pragma once

#include "stream4d/geometry/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace stream4d::synth {

// Infinite plane {x : normal . x = offset}.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  double albedo = 0.5;
};

// Oriented box; `rotation` is an axis-angle vector.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  double albedo = 0.5;
};

// Box moving with constant linear (m/s) and angular (rad/s) velocity. `box`
// gives its pose at time 0; rotation is about the box center.
struct DynamicBody {
  Box box;
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
};

struct SensorSpec {
  Intrinsics intrinsics;
  SE3Pose rig;  // camera-to-ego
};

struct SceneSpec {
  std::vector<Plane> planes;
  std::vector<Box> static_boxes;
  std::vector<DynamicBody> dynamic_bodies;
  std::vector<SensorSpec> sensors;
  std::vector<double> timestamps;  // seconds, strictly increasing
  std::vector<SE3Pose> ego_poses;  // ego-to-world, one per timestamp
  Eigen::Vector3d light_direction = Eigen::Vector3d(-0.3, -0.5, -0.8).normalized();
  double ambient = 0.25;
  std::uint64_t seed = 0;
  double depth_noise_sigma = 0.0;  // meters; 0 renders exact depth

  // Throws ConfigError on violated invariants.
  void validate() const;

  int num_sensors() const { return static_cast<int>(sensors.size()); }
  int num_timestamps() const { return static_cast<int>(timestamps.size()); }
  int num_primitives() const;
  bool is_dynamic_primitive(int id) const;
  SE3Pose camera_to_world(int t_index, int sensor) const;
  // Local-to-world pose of a dynamic body at absolute time `time`.
  SE3Pose body_pose(int body, double time) const;
};

// Ground plane, four walls, two static boxes, two moving boxes, a six-camera
// ring rig of 224x224 cameras and five timestamps 0.5 s apart.
SceneSpec default_scene();

struct RigOptions {
  int num_cameras = 6;
  int image_size = 224;
  double focal = 100.0;
  double radius = 0.5;
  double height = 1.6;
};
std::vector<SensorSpec> ring_rig(const RigOptions& options);

// Ego moving along +x at `speed` m/s with constant yaw rate.
std::vector<SE3Pose> straight_trajectory(const std::vector<double>& timestamps, double speed,
                                         double yaw_rate = 0.0);

struct RayHit {
  double t = 0.0;  // ray parameter; equals camera depth for z-unit rays
  int primitive = -1;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
};

struct FrameBundle {
  int t_index = 0;
  double timestamp = 0.0;
  int sensor = 0;
  DepthMap depth;
  Pointmap world_points;  // unproject(depth, intrinsics, pose)
  Intrinsics intrinsics;
  SE3Pose pose;  // camera-to-world
  DynamicMask dynamic_mask;
  Image image;
  Grid<int> hit_primitive;  // -1 where nothing was hit
};

// Nearest hit of a world-space ray against all primitives at `time`.
std::optional<RayHit> cast_ray(const SceneSpec& scene, double time, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& direction);

FrameBundle render_frame(const SceneSpec& scene, int t_index, int sensor);

// Ground-truth flow from frame (t1, sensor) to (t2, sensor); see gt_flow_from.
FlowField gt_flow(const SceneSpec& scene, int t1, int t2, int sensor);
// Same, reusing an already rendered source bundle.
FlowField gt_flow_from(const SceneSpec& scene, const FrameBundle& source, int t2);

}  // namespace stream4d::synth
