#include "stream4d/align/aligner.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"

#include <cmath>

namespace stream4d::align {

Pointmap align_to_world(const Pointmap& points, const CameraEstimate& estimate,
                        const Intrinsics& gt_k, const SE3Pose& gt_pose) {
  if (points.width() != gt_k.width || points.height() != gt_k.height) {
    throw DimensionMismatch("pointmap and intrinsics image sizes differ");
  }
  const SE3Pose to_camera = estimate.pose.inverse();
  DepthMap depth(points.width(), points.height());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid[i]) continue;
    const double z = to_camera.apply(points.points[i]).z();
    if (z > kMinProjectionDepth && std::isfinite(z)) {
      depth.depth[i] = z;
      depth.valid[i] = 1;
    }
  }
  return unproject(depth, gt_k, gt_pose, FrameTag::kWorld);
}

Pointmap align_to_world(const Pointmap& points, const Intrinsics& gt_k, const SE3Pose& gt_pose,
                        const PoseOptions& options) {
  return align_to_world(points, pose_estimate(points, options), gt_k, gt_pose);
}

std::vector<ScenePoint> assemble_scene(const std::vector<FrameCloud>& frames, double gamma) {
  std::vector<ScenePoint> out;
  for (const auto& f : frames) {
    if (f.points->frame != FrameTag::kWorld) {
      throw DimensionMismatch("assemble_scene expects world-frame pointmaps");
    }
    if (f.confidence->raw.width != f.points->width() ||
        f.confidence->raw.height != f.points->height()) {
      throw DimensionMismatch("confidence map shape differs from pointmap");
    }
    for (std::size_t i = 0; i < f.points->size(); ++i) {
      if (!f.points->valid[i]) continue;
      const double c = f.confidence->value(i);
      if (c < gamma) continue;
      out.push_back({f.points->points[i], c, f.sensor, f.t_index});
    }
  }
  return out;
}

namespace {

// Tangent plane at (u, v) from central differences; false when the 3x3
// neighbourhood is incomplete or bends more than `tolerance` off the plane.
bool local_plane(const Pointmap& p, int u, int v, double tolerance, Eigen::Vector3d* normal) {
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      if (!p.valid.contains(u + du, v + dv) || !p.valid(u + du, v + dv)) return false;
    }
  }
  const Eigen::Vector3d c = p.points(u, v);
  const Eigen::Vector3d n = (p.points(u + 1, v) - p.points(u - 1, v))
                                .cross(p.points(u, v + 1) - p.points(u, v - 1));
  if (!(n.norm() > 0.0)) return false;
  *normal = n.normalized();
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      if (std::abs(normal->dot(p.points(u + du, v + dv) - c)) > tolerance) return false;
    }
  }
  return true;
}

}  // namespace

ConsistencyReport cross_sensor_consistency(const std::vector<AlignedFrame>& frames,
                                           double depth_tolerance, double normal_agreement) {
  // Relative off-plane tolerance of a 3x3 neighbourhood.
  constexpr double planarity = 1e-5;
  ConsistencyReport report;
  double sum = 0.0;
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = 0; b < frames.size(); ++b) {
      if (a == b || frames[a].sensor == frames[b].sensor) continue;
      const Pointmap& pa = *frames[a].points;
      const Pointmap& pb = *frames[b].points;
      const SE3Pose to_b = frames[b].pose.inverse();
      for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!pa.valid[i]) continue;
        const Eigen::Vector3d x = to_b.apply(pa.points[i]);
        Eigen::Vector2d px;
        if (!project_point(x, frames[b].intrinsics, &px)) continue;
        const int u = static_cast<int>(std::lround(px.x()));
        const int v = static_cast<int>(std::lround(px.y()));
        if (!pb.valid.contains(u, v) || !pb.valid(u, v)) continue;
        const Eigen::Vector3d q = pb.points(u, v);
        const double zq = (to_b.apply(q)).z();
        if (std::abs(x.z() - zq) > depth_tolerance * zq) continue;  // occluded or off-surface
        Eigen::Vector3d n;
        if (!local_plane(pb, u, v, planarity * zq, &n)) continue;
        // Same surface seen from both sides: orientations must agree.
        Eigen::Vector3d na;
        const int ua = static_cast<int>(i % pa.width());
        const int va = static_cast<int>(i / pa.width());
        if (!local_plane(pa, ua, va, planarity * x.z(), &na)) continue;
        if (std::abs(na.dot(n)) < normal_agreement) continue;
        const double d = std::abs(n.dot(pa.points[i] - q));
        report.max = std::max(report.max, d);
        sum += d;
        ++report.samples;
      }
    }
  }
  if (report.samples > 0) report.mean = sum / static_cast<double>(report.samples);
  return report;
}

}  // namespace stream4d::align
