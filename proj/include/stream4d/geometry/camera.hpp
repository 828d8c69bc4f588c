#pragma once

#include "stream4d/geometry/types.hpp"

namespace stream4d {

// Points closer than this to the image plane (or behind it) do not project.
inline constexpr double kMinProjectionDepth = 1e-6;

struct Projection {
  FlowField pixels;  // projected (u, v) per source pixel
  DepthMap depth;
};

// Pinhole projection of a camera-frame pointmap. Points with z <= 1e-6 are
// marked invalid in both outputs.
Projection project(const Pointmap& points, const Intrinsics& k);

// Single-point variant; returns false when the point is not in front.
bool project_point(const Eigen::Vector3d& p, const Intrinsics& k, Eigen::Vector2d* uv);

// Back-projects every valid pixel with its depth, then maps it through `pose`.
Pointmap unproject(const DepthMap& depth, const Intrinsics& k, const SE3Pose& pose,
                   FrameTag target = FrameTag::kWorld);

Pointmap transform(const Pointmap& points, const SE3Pose& pose, FrameTag target);

}  // namespace stream4d
