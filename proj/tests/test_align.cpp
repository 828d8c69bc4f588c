#include "stream4d/align/aligner.hpp"
#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"
#include "stream4d/synth/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stream4d;
using namespace stream4d::align;

namespace {

double max_diff(const Pointmap& a, const Pointmap& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    worst = std::max(worst, (a.points[i] - b.points[i]).norm());
  }
  return worst;
}

Pointmap camera_frame(const synth::FrameBundle& f) {
  return transform(f.world_points, f.pose.inverse(), FrameTag::kCamera);
}

}  // namespace

TEST(Align, CameraFrameOracleReproducesWorld) {
  const synth::SceneSpec scene = synth::default_scene();
  for (int c : {0, 3}) {
    const synth::FrameBundle f = synth::render_frame(scene, 2, c);
    const Pointmap w = align_to_world(camera_frame(f), f.intrinsics, f.pose);
    EXPECT_EQ(w.frame, FrameTag::kWorld);
    EXPECT_EQ(w.valid.data, f.world_points.valid.data);
    EXPECT_LE(max_diff(w, f.world_points), 1e-6);
  }
}

TEST(Align, SequenceFrameOracleReproducesWorld) {
  const synth::SceneSpec scene = synth::default_scene();
  const SE3Pose to_first = scene.camera_to_world(0, 1).inverse();
  for (int t = 1; t < scene.num_timestamps(); t += 2) {
    const synth::FrameBundle f = synth::render_frame(scene, t, 1);
    const Pointmap seq = transform(f.world_points, to_first, FrameTag::kSequence);
    EXPECT_LE(max_diff(align_to_world(seq, f.intrinsics, f.pose), f.world_points), 1e-6);
  }
}

TEST(Align, IdentityCameraCollapses) {
  const synth::FrameBundle f = synth::render_frame(synth::default_scene(), 0, 2);
  const Pointmap p = camera_frame(f);
  const CameraEstimate est = pose_estimate(p);
  const Pointmap out = align_to_world(p, est.intrinsics, SE3Pose::identity());
  EXPECT_LE(max_diff(out, p), 1e-6);
}

TEST(Align, ScalingInputScalesDepths) {
  const synth::SceneSpec scene = synth::default_scene();
  const synth::FrameBundle f = synth::render_frame(scene, 3, 4);
  const Pointmap seq = transform(f.world_points, scene.camera_to_world(0, 4).inverse(),
                                 FrameTag::kSequence);
  const double s = 2.5;
  Pointmap scaled = seq;
  for (auto& x : scaled.points.data) x *= s;
  const Pointmap a = align_to_world(seq, f.intrinsics, f.pose);
  const Pointmap b = align_to_world(scaled, f.intrinsics, f.pose);
  const SE3Pose to_cam = f.pose.inverse();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.valid[i]) continue;
    ASSERT_TRUE(b.valid[i]);
    const double za = to_cam.apply(a.points[i]).z();
    const double zb = to_cam.apply(b.points[i]).z();
    ASSERT_NEAR(zb, s * za, 1e-6 * s * za);
  }
}

TEST(Align, RigidEquivariance) {
  const synth::FrameBundle f = synth::render_frame(synth::default_scene(), 1, 5);
  const Pointmap p = camera_frame(f);
  const CameraEstimate est = pose_estimate(p);
  const SE3Pose extra = SE3Pose::from_axis_angle(Eigen::Vector3d(0.1, 0.3, -0.2),
                                                 Eigen::Vector3d(1.0, -2.0, 0.5));
  const Pointmap a = align_to_world(p, est, f.intrinsics, f.pose);
  const Pointmap b = align_to_world(p, est, f.intrinsics, extra * f.pose);
  const Pointmap ta = transform(a, extra, FrameTag::kWorld);
  EXPECT_LE(max_diff(b, ta), 1e-12);
}

TEST(Align, TooFewPointsIsDegenerate) {
  const synth::FrameBundle f = synth::render_frame(synth::default_scene(), 0, 0);
  Pointmap p = camera_frame(f);
  for (std::size_t i = 10; i < p.size(); ++i) p.valid[i] = 0;
  EXPECT_THROW(align_to_world(p, f.intrinsics, f.pose), DegenerateGeometry);
}

TEST(Assemble, ConfidenceFilter) {
  const synth::FrameBundle f = synth::render_frame(synth::default_scene(), 0, 0);
  ConfidenceMap conf(f.depth.width(), f.depth.height(), 0.0);
  for (std::size_t i = 0; i < conf.raw.size(); ++i) {
    conf.raw[i] = ConfidenceMap::raw_for(1.0 + (i % 97) / 20.0);
  }
  const std::vector<FrameCloud> frames{{&f.world_points, &conf, 0, 0}};
  EXPECT_EQ(assemble_scene(frames, 1.0).size(), f.world_points.valid_count());
  EXPECT_TRUE(assemble_scene(frames, 10.0).empty());
  const auto all = assemble_scene(frames, 1.0);
  std::size_t prev = all.size();
  for (double g = 1.25; g < 6.0; g += 0.5) {
    const auto some = assemble_scene(frames, g);
    EXPECT_LE(some.size(), prev);
    prev = some.size();
    // Same points, same coordinates: a filtered subsequence of the full set.
    std::size_t j = 0;
    for (const auto& p : some) {
      while (j < all.size() && all[j].position != p.position) ++j;
      ASSERT_LT(j, all.size());
      ASSERT_GE(p.confidence, g);
    }
  }
}

TEST(Assemble, CrossSensorConsistencyOnOracleRig) {
  const synth::SceneSpec scene = synth::default_scene();
  std::vector<synth::FrameBundle> frames;
  std::vector<Pointmap> aligned;
  for (int c = 0; c < scene.num_sensors(); ++c) {
    frames.push_back(synth::render_frame(scene, 2, c));
    const SE3Pose to_first = scene.camera_to_world(0, 0).inverse();
    aligned.push_back(align_to_world(
        transform(frames.back().world_points, to_first, FrameTag::kSequence),
        frames.back().intrinsics, frames.back().pose));
  }
  std::vector<AlignedFrame> view;
  for (int c = 0; c < scene.num_sensors(); ++c) {
    view.push_back({&aligned[c], frames[c].intrinsics, frames[c].pose, c});
  }
  const ConsistencyReport r = cross_sensor_consistency(view);
  EXPECT_GT(r.samples, 1000u);
  EXPECT_LE(r.max, 1e-3);
}
