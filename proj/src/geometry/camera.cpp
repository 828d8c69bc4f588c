#include "stream4d/geometry/camera.hpp"

#include "stream4d/errors.hpp"

#include <cmath>

namespace stream4d {

bool project_point(const Eigen::Vector3d& p, const Intrinsics& k, Eigen::Vector2d* uv) {
  if (!(p.z() > kMinProjectionDepth) || !p.allFinite()) return false;
  (*uv) << k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy;
  return true;
}

Projection project(const Pointmap& points, const Intrinsics& k) {
  const int w = points.width();
  const int h = points.height();
  Projection out{FlowField(w, h), DepthMap(w, h)};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid[i]) continue;
    const Eigen::Vector3d& p = points.points[i];
    Eigen::Vector2d uv;
    if (!project_point(p, k, &uv)) continue;
    out.pixels.flow[i] = uv;
    out.pixels.valid[i] = 1;
    out.depth.depth[i] = p.z();
    out.depth.valid[i] = 1;
  }
  return out;
}

Pointmap unproject(const DepthMap& depth, const Intrinsics& k, const SE3Pose& pose,
                   FrameTag target) {
  const int w = depth.width();
  const int h = depth.height();
  Pointmap out(w, h, target);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = depth.depth.index(u, v);
      if (!depth.valid[i]) continue;
      const double z = depth.depth[i];
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      const Eigen::Vector3d cam((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
      out.points[i] = pose.apply(cam);
      out.valid[i] = 1;
    }
  }
  return out;
}

Pointmap transform(const Pointmap& points, const SE3Pose& pose, FrameTag target) {
  Pointmap out = points;
  out.frame = target;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.valid[i]) out.points[i] = pose.apply(points.points[i]);
  }
  return out;
}

}  // namespace stream4d
