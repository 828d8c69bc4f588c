#include "stream4d/synth/scene.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace stream4d::synth {
namespace {

constexpr double kRayEpsilon = 1e-9;

std::optional<RayHit> intersect_plane(const Plane& plane, const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& direction) {
  const double denom = plane.normal.dot(direction);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (plane.offset - plane.normal.dot(origin)) / denom;
  if (!(t > kRayEpsilon)) return std::nullopt;
  return RayHit{t, -1, plane.normal.normalized()};
}

// Slab test in the box frame. Origins inside the box report no hit.
std::optional<RayHit> intersect_box(const Eigen::Vector3d& center, const Eigen::Matrix3d& rotation,
                                    const Eigen::Vector3d& half, const Eigen::Vector3d& origin,
                                    const Eigen::Vector3d& direction) {
  const Eigen::Vector3d o = rotation.transpose() * (origin - center);
  const Eigen::Vector3d d = rotation.transpose() * direction;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - o[a]) / d[a];
    double t2 = (half[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      near_axis = a;
    }
    t_far = std::min(t_far, t2);
  }
  if (near_axis < 0 || t_near > t_far || !(t_near > kRayEpsilon)) return std::nullopt;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[near_axis] = d[near_axis] > 0.0 ? -1.0 : 1.0;
  return RayHit{t_near, -1, rotation * n};
}

double primitive_albedo(const SceneSpec& scene, int id) {
  const int np = static_cast<int>(scene.planes.size());
  const int ns = static_cast<int>(scene.static_boxes.size());
  if (id < np) return scene.planes[id].albedo;
  if (id < np + ns) return scene.static_boxes[id - np].albedo;
  return scene.dynamic_bodies[id - np - ns].box.albedo;
}

}  // namespace

void SceneSpec::validate() const {
  if (sensors.empty()) throw ConfigError("scene needs at least one sensor");
  if (timestamps.empty()) throw ConfigError("scene needs at least one timestamp");
  if (ego_poses.size() != timestamps.size()) {
    throw ConfigError("scene needs one ego pose per timestamp");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw ConfigError("scene timestamps must be strictly increasing");
    }
  }
  auto check_box = [](const Box& b) {
    if (!(b.half_extents.array() > 0.0).all()) {
      throw ConfigError("box extents must be positive");
    }
  };
  for (const auto& b : static_boxes) check_box(b);
  for (const auto& b : dynamic_bodies) check_box(b.box);
  for (const auto& p : planes) {
    if (!(p.normal.norm() > 0.0)) throw ConfigError("plane normal must be nonzero");
  }
  for (const auto& s : sensors) {
    if (!s.intrinsics.is_valid()) throw ConfigError("sensor intrinsics are invalid");
    if (!s.rig.is_valid(1e-9)) throw ConfigError("sensor rig rotation is not orthonormal");
  }
  for (const auto& e : ego_poses) {
    if (!e.is_valid(1e-9)) throw ConfigError("ego rotation is not orthonormal");
  }
  if (!(depth_noise_sigma >= 0.0)) throw ConfigError("depth noise must be nonnegative");
}

int SceneSpec::num_primitives() const {
  return static_cast<int>(planes.size() + static_boxes.size() + dynamic_bodies.size());
}

bool SceneSpec::is_dynamic_primitive(int id) const {
  return id >= static_cast<int>(planes.size() + static_boxes.size()) && id < num_primitives();
}

SE3Pose SceneSpec::camera_to_world(int t_index, int sensor) const {
  return ego_poses.at(t_index) * sensors.at(sensor).rig;
}

SE3Pose SceneSpec::body_pose(int body, double time) const {
  const DynamicBody& b = dynamic_bodies.at(body);
  SE3Pose pose;
  pose.rotation = exp_so3(b.angular_velocity * time) * exp_so3(b.box.rotation);
  pose.translation = b.box.center + b.linear_velocity * time;
  return pose;
}

std::vector<SensorSpec> ring_rig(const RigOptions& options) {
  std::vector<SensorSpec> rig;
  for (int i = 0; i < options.num_cameras; ++i) {
    const double yaw = 2.0 * std::numbers::pi * i / options.num_cameras;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    SensorSpec spec;
    spec.intrinsics = Intrinsics::centered(options.focal, options.image_size, options.image_size);
    // Camera axes: x right, y down, z forward.
    spec.rig.rotation.col(0) = Eigen::Vector3d(s, -c, 0.0);
    spec.rig.rotation.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);
    spec.rig.rotation.col(2) = Eigen::Vector3d(c, s, 0.0);
    spec.rig.translation = Eigen::Vector3d(options.radius * c, options.radius * s, options.height);
    rig.push_back(spec);
  }
  return rig;
}

std::vector<SE3Pose> straight_trajectory(const std::vector<double>& timestamps, double speed,
                                         double yaw_rate) {
  std::vector<SE3Pose> poses;
  for (double t : timestamps) {
    poses.push_back(SE3Pose::from_axis_angle(Eigen::Vector3d(0.0, 0.0, yaw_rate * t),
                                             Eigen::Vector3d(speed * t, 0.0, 0.0)));
  }
  return poses;
}

SceneSpec default_scene() {
  SceneSpec scene;
  scene.planes = {
      {Eigen::Vector3d::UnitZ(), 0.0, 0.5},
      {Eigen::Vector3d::UnitX(), 30.0, 0.6},
      {Eigen::Vector3d::UnitX(), -30.0, 0.65},
      {Eigen::Vector3d::UnitY(), 25.0, 0.7},
      {Eigen::Vector3d::UnitY(), -25.0, 0.75},
  };
  scene.static_boxes = {
      {Eigen::Vector3d(7.0, 7.0, 1.0), Eigen::Vector3d(1.2, 1.2, 1.0), Eigen::Vector3d::Zero(), 0.3},
      {Eigen::Vector3d(-8.0, -6.0, 1.5), Eigen::Vector3d(1.0, 1.5, 1.5),
       Eigen::Vector3d(0.0, 0.0, 0.4), 0.85},
  };
  DynamicBody car;
  car.box = {Eigen::Vector3d(14.0, -5.0, 0.9), Eigen::Vector3d(1.8, 0.9, 0.9),
             Eigen::Vector3d::Zero(), 0.95};
  car.linear_velocity = Eigen::Vector3d(0.0, 5.0, 0.0);
  DynamicBody van;
  van.box = {Eigen::Vector3d(-12.0, 6.0, 0.75), Eigen::Vector3d(1.0, 2.0, 0.75),
             Eigen::Vector3d::Zero(), 0.15};
  van.linear_velocity = Eigen::Vector3d(0.0, -4.0, 0.0);
  van.angular_velocity = Eigen::Vector3d(0.0, 0.0, 0.2);
  scene.dynamic_bodies = {car, van};
  scene.sensors = ring_rig({});
  scene.timestamps = {0.0, 0.5, 1.0, 1.5, 2.0};
  scene.ego_poses = straight_trajectory(scene.timestamps, 3.0);
  return scene;
}

std::optional<RayHit> cast_ray(const SceneSpec& scene, double time, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& direction) {
  std::optional<RayHit> best;
  auto consider = [&](std::optional<RayHit> hit, int id) {
    if (hit && (!best || hit->t < best->t)) {
      hit->primitive = id;
      best = hit;
    }
  };
  int id = 0;
  for (const auto& plane : scene.planes) consider(intersect_plane(plane, origin, direction), id++);
  for (const auto& box : scene.static_boxes) {
    consider(intersect_box(box.center, exp_so3(box.rotation), box.half_extents, origin, direction),
             id++);
  }
  for (int b = 0; b < static_cast<int>(scene.dynamic_bodies.size()); ++b) {
    const SE3Pose pose = scene.body_pose(b, time);
    consider(intersect_box(pose.translation, pose.rotation, scene.dynamic_bodies[b].box.half_extents,
                           origin, direction),
             id++);
  }
  return best;
}

FrameBundle render_frame(const SceneSpec& scene, int t_index, int sensor) {
  const SensorSpec& spec = scene.sensors.at(sensor);
  const Intrinsics& k = spec.intrinsics;
  FrameBundle out;
  out.t_index = t_index;
  out.timestamp = scene.timestamps.at(t_index);
  out.sensor = sensor;
  out.intrinsics = k;
  out.pose = scene.camera_to_world(t_index, sensor);
  out.depth = DepthMap(k.width, k.height);
  out.dynamic_mask = DynamicMask(k.width, k.height, 0);
  out.image = Image(k.width, k.height, 0.0);
  out.hit_primitive = Grid<int>(k.width, k.height, -1);

  const Eigen::Vector3d light = -scene.light_direction.normalized();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d ray_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = out.pose.rotation * ray_cam;
      const auto hit = cast_ray(scene, out.timestamp, out.pose.translation, dir);
      if (!hit) continue;
      const std::size_t i = out.depth.depth.index(u, v);
      out.depth.depth[i] = hit->t;
      out.depth.valid[i] = 1;
      out.hit_primitive[i] = hit->primitive;
      out.dynamic_mask[i] = scene.is_dynamic_primitive(hit->primitive) ? 1 : 0;
      Eigen::Vector3d n = hit->normal;
      if (n.dot(dir) > 0.0) n = -n;
      const double shade = scene.ambient + (1.0 - scene.ambient) * std::max(0.0, n.dot(light));
      out.image[i] = std::clamp(primitive_albedo(scene, hit->primitive) * shade, 0.0, 1.0);
    }
  }

  if (scene.depth_noise_sigma > 0.0) {
    std::mt19937_64 rng(scene.seed ^ (0x9E3779B97F4A7C15ULL * (1 + t_index * 131 + sensor)));
    std::normal_distribution<double> noise(0.0, scene.depth_noise_sigma);
    for (std::size_t i = 0; i < out.depth.depth.size(); ++i) {
      if (!out.depth.valid[i]) continue;
      out.depth.depth[i] = std::max(out.depth.depth[i] + noise(rng), 1e-3);
    }
  }
  out.world_points = unproject(out.depth, k, out.pose, FrameTag::kWorld);
  return out;
}

FlowField gt_flow_from(const SceneSpec& scene, const FrameBundle& source, int t2) {
  const double time1 = source.timestamp;
  const double time2 = scene.timestamps.at(t2);
  const Intrinsics& k = scene.sensors.at(source.sensor).intrinsics;
  const SE3Pose world_to_cam2 = scene.camera_to_world(t2, source.sensor).inverse();
  const int first_dynamic = static_cast<int>(scene.planes.size() + scene.static_boxes.size());

  std::vector<SE3Pose> advance(scene.dynamic_bodies.size());
  for (std::size_t b = 0; b < advance.size(); ++b) {
    advance[b] = scene.body_pose(static_cast<int>(b), time2) *
                 scene.body_pose(static_cast<int>(b), time1).inverse();
  }

  FlowField flow(source.depth.width(), source.depth.height());
  for (int v = 0; v < flow.height(); ++v) {
    for (int u = 0; u < flow.width(); ++u) {
      const std::size_t i = flow.flow.index(u, v);
      if (!source.world_points.valid[i]) continue;
      Eigen::Vector3d x = source.world_points.points[i];
      const int prim = source.hit_primitive[i];
      if (scene.is_dynamic_primitive(prim)) x = advance[prim - first_dynamic].apply(x);
      Eigen::Vector2d uv;
      if (!project_point(world_to_cam2.apply(x), k, &uv)) continue;
      flow.flow[i] = uv - Eigen::Vector2d(u, v);
      flow.valid[i] = 1;
    }
  }
  return flow;
}

FlowField gt_flow(const SceneSpec& scene, int t1, int t2, int sensor) {
  return gt_flow_from(scene, render_frame(scene, t1, sensor), t2);
}

}  // namespace stream4d::synth
