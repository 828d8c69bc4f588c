#include <gtest/gtest.h>

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"
#include "stream4d/geometry/pose_estimation.hpp"
#include "stream4d/synth/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace stream4d;

namespace {

DepthMap random_depth(int w, int h, std::uint64_t seed, double lo = 2.0, double hi = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  DepthMap depth(w, h);
  for (std::size_t i = 0; i < depth.depth.size(); ++i) {
    depth.depth[i] = d(rng);
    depth.valid[i] = 1;
  }
  return depth;
}

SE3Pose random_pose(std::mt19937_64& rng, double angle = 1.0, double trans = 3.0) {
  std::uniform_real_distribution<double> a(-angle, angle);
  std::uniform_real_distribution<double> t(-trans, trans);
  return SE3Pose::from_axis_angle({a(rng), a(rng), a(rng)}, {t(rng), t(rng), t(rng)});
}

Pointmap with_noise(Pointmap p, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.valid[i]) p.points[i] += Eigen::Vector3d(n(rng), n(rng), n(rng));
  }
  return p;
}

// Sum of per-pixel 2D residual norms, written independently of the library.
double oracle_focal_cost(const Pointmap& p, double f) {
  const double cx = 0.5 * p.width();
  const double cy = 0.5 * p.height();
  double c = 0.0;
  for (int v = 0; v < p.height(); ++v) {
    for (int u = 0; u < p.width(); ++u) {
      const auto& x = p.points(u, v);
      if (!p.valid(u, v) || x.z() <= 0) continue;
      const double du = (u - cx) - f * x.x() / x.z();
      const double dv = (v - cy) - f * x.y() / x.z();
      c += std::sqrt(du * du + dv * dv);
    }
  }
  return c;
}

double grid_search_focal(const Pointmap& p) {
  double best_f = 50.0;
  double best_c = oracle_focal_cost(p, best_f);
  for (double f = 50.0; f <= 500.0; f += 0.25) {
    const double c = oracle_focal_cost(p, f);
    if (c < best_c) {
      best_c = c;
      best_f = f;
    }
  }
  const double lo = best_f - 0.25;
  for (double f = lo; f <= best_f + 0.25; f += 0.001) {
    const double c = oracle_focal_cost(p, f);
    if (c < best_c) {
      best_c = c;
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace

TEST(Projection, OnAxisPoint) {
  Pointmap p(1, 1, FrameTag::kCamera);
  p.points[0] = {0.0, 0.0, 1.0};
  p.valid[0] = 1;
  const Intrinsics k{100.0, 100.0, 112.0, 112.0, 224, 224};
  const auto proj = project(p, k);
  ASSERT_TRUE(proj.pixels.valid[0]);
  EXPECT_DOUBLE_EQ(proj.pixels.flow[0].x(), 112.0);
  EXPECT_DOUBLE_EQ(proj.pixels.flow[0].y(), 112.0);
  EXPECT_DOUBLE_EQ(proj.depth.depth[0], 1.0);
}

TEST(Projection, BehindCameraIsInvalid) {
  Pointmap p(2, 1, FrameTag::kCamera);
  p.points[0] = {0.0, 0.0, -1.0};
  p.points[1] = {0.0, 0.0, 1e-7};
  p.valid[0] = p.valid[1] = 1;
  const auto proj = project(p, Intrinsics::centered(100.0, 2, 1));
  EXPECT_FALSE(proj.pixels.valid[0]);
  EXPECT_FALSE(proj.depth.valid[0]);
  EXPECT_FALSE(proj.pixels.valid[1]);
}

TEST(Projection, RoundTripRestoresPoints) {
  const Intrinsics k = Intrinsics::centered(100.0, 32, 24);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Pointmap cam = unproject(random_depth(32, 24, seed), k, SE3Pose::identity(),
                                   FrameTag::kCamera);
    const auto proj = project(cam, k);
    const Pointmap back = unproject(proj.depth, k, SE3Pose::identity(), FrameTag::kCamera);
    for (std::size_t i = 0; i < cam.size(); ++i) {
      ASSERT_TRUE(back.valid[i]);
      EXPECT_LE((back.points[i] - cam.points[i]).norm(), 1e-9);
      // Projected coordinates land on the source pixel.
      EXPECT_NEAR(proj.pixels.flow[i].x(), static_cast<double>(i % 32), 1e-9);
    }
  }
}

TEST(Unproject, CenteredPixelUnitDepth) {
  DepthMap d(3, 3);
  for (std::size_t i = 0; i < 9; ++i) {
    d.depth[i] = 1.0;
    d.valid[i] = 1;
  }
  const Intrinsics k{50.0, 50.0, 1.0, 1.0, 3, 3};
  const Pointmap p = unproject(d, k, SE3Pose::identity());
  EXPECT_EQ(p.frame, FrameTag::kWorld);
  EXPECT_LE((p.points(1, 1) - Eigen::Vector3d(0, 0, 1)).norm(), 1e-15);
}

TEST(Unproject, TranslationEquivariance) {
  const Intrinsics k = Intrinsics::centered(80.0, 16, 16);
  const DepthMap d = random_depth(16, 16, 3);
  const Eigen::Vector3d t(1.5, -2.0, 0.25);
  const Pointmap a = unproject(d, k, SE3Pose::identity());
  const Pointmap b = unproject(d, k, SE3Pose::from_translation(t));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE((b.points[i] - (a.points[i] + t)).norm(), 1e-12);
  }
}

TEST(Unproject, InvalidDepthStaysInvalid) {
  DepthMap d(2, 1);
  d.depth[0] = 2.0;
  d.valid[0] = 1;
  d.depth[1] = 3.0;
  const Pointmap p = unproject(d, Intrinsics::centered(10, 2, 1), SE3Pose::identity());
  EXPECT_TRUE(p.valid[0]);
  EXPECT_FALSE(p.valid[1]);
}

TEST(Transform, IdentityInverseAndComposition) {
  std::mt19937_64 rng(11);
  const Intrinsics k = Intrinsics::centered(60.0, 12, 10);
  const Pointmap p = unproject(random_depth(12, 10, 5), k, SE3Pose::identity(), FrameTag::kCamera);
  const Pointmap same = transform(p, SE3Pose::identity(), FrameTag::kCamera);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(same.points[i], p.points[i]);

  for (int trial = 0; trial < 20; ++trial) {
    const SE3Pose a = random_pose(rng);
    const SE3Pose b = random_pose(rng);
    const Pointmap round = transform(transform(p, a, FrameTag::kWorld), a.inverse(),
                                     FrameTag::kCamera);
    const Pointmap chained = transform(transform(p, b, FrameTag::kWorld), a, FrameTag::kWorld);
    const Eigen::Matrix4d ab = a.matrix() * b.matrix();
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_LE((round.points[i] - p.points[i]).norm(), 1e-12);
      const Eigen::Vector3d expected = (ab * p.points[i].homogeneous()).head<3>();
      EXPECT_LE((chained.points[i] - expected).norm(), 1e-12);
      EXPECT_LE(((a * b).apply(p.points[i]) - expected).norm(), 1e-12);
    }
  }
}

TEST(EstimateFocal, ExactOnSelfConsistentPointmap) {
  for (double f : {50.0, 120.0, 275.5, 500.0}) {
    const Intrinsics k = Intrinsics::centered(f, 64, 48);
    const Pointmap p = unproject(random_depth(64, 48, 7), k, SE3Pose::identity(),
                                 FrameTag::kCamera);
    EXPECT_NEAR(estimate_focal(p) / f, 1.0, 1e-6) << "f=" << f;
  }
}

TEST(EstimateFocal, NoisyWithinOnePercentOfGridSearch) {
  const Intrinsics k = Intrinsics::centered(120.0, 48, 48);
  const Pointmap clean = unproject(random_depth(48, 48, 9), k, SE3Pose::identity(),
                                   FrameTag::kCamera);
  const Pointmap noisy = with_noise(clean, 0.01, 21);
  const double oracle = grid_search_focal(noisy);
  EXPECT_NEAR(estimate_focal(noisy) / oracle, 1.0, 0.01);
  // The library cost agrees with the independent one.
  EXPECT_NEAR(focal_cost(noisy, 130.0), oracle_focal_cost(noisy, 130.0), 1e-9);
}

TEST(EstimateFocal, AllPointsOnAxisIsDegenerate) {
  Pointmap p(8, 8, FrameTag::kCamera);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.points[i] = {0.0, 0.0, 1.0 + static_cast<double>(i)};
    p.valid[i] = 1;
  }
  EXPECT_THROW(estimate_focal(p), DegenerateGeometry);
}

TEST(EstimateFocal, TooFewPointsIsDegenerate) {
  const Pointmap p = unproject(random_depth(5, 5, 1), Intrinsics::centered(100, 5, 5),
                               SE3Pose::identity(), FrameTag::kCamera);
  EXPECT_THROW(estimate_focal(p), DegenerateGeometry);
}

TEST(EstimatePose, RecoversRandomPosesNoiseless) {
  std::mt19937_64 rng(1);
  const Intrinsics k = Intrinsics::centered(90.0, 40, 30);
  for (int trial = 0; trial < 10; ++trial) {
    const Pointmap cam = unproject(random_depth(40, 30, 100 + trial), k, SE3Pose::identity(),
                                   FrameTag::kCamera);
    const SE3Pose truth = random_pose(rng);
    const SE3Pose est = estimate_pose(transform(cam, truth, FrameTag::kSequence), k);
    EXPECT_LT(rotation_angle_between(est.rotation, truth.rotation), 1e-4);
    EXPECT_LT((est.translation - truth.translation).norm(), 1e-4);
    EXPECT_TRUE(est.is_valid(1e-9));
  }
}

TEST(EstimatePose, NoisySyntheticRig) {
  const auto scene = synth::default_scene();
  for (int sensor = 0; sensor < scene.num_sensors(); ++sensor) {
    const auto bundle = synth::render_frame(scene, 2, sensor);
    const Pointmap noisy = with_noise(bundle.world_points, 0.01, 40 + sensor);
    const SE3Pose est = estimate_pose(noisy, bundle.intrinsics);
    EXPECT_LT(rotation_angle_between(est.rotation, bundle.pose.rotation),
              0.5 * std::numbers::pi / 180.0);
    EXPECT_LT((est.translation - bundle.pose.translation).norm(), 0.05);
  }
}

TEST(EstimatePose, RansacRejectsOutliers) {
  std::mt19937_64 rng(77);
  const Intrinsics k = Intrinsics::centered(90.0, 40, 30);
  const SE3Pose truth = random_pose(rng, 0.5, 2.0);
  Pointmap p = transform(unproject(random_depth(40, 30, 8), k, SE3Pose::identity(),
                                   FrameTag::kCamera),
                         truth, FrameTag::kSequence);
  std::uniform_real_distribution<double> junk(-20.0, 20.0);
  for (std::size_t i = 0; i < p.size(); i += 4) {
    p.points[i] += Eigen::Vector3d(junk(rng), junk(rng), junk(rng));
  }
  PoseOptions opt;
  opt.ransac = true;
  opt.seed = 5;
  const SE3Pose est = estimate_pose(p, k, opt);
  EXPECT_LT(rotation_angle_between(est.rotation, truth.rotation), 1e-4);
  EXPECT_LT((est.translation - truth.translation).norm(), 1e-4);
}

TEST(EstimatePose, DegenerateInputs) {
  const Intrinsics k = Intrinsics::centered(90.0, 40, 30);
  Pointmap few = unproject(random_depth(40, 30, 2), k, SE3Pose::identity(), FrameTag::kCamera);
  std::fill(few.valid.data.begin() + 5, few.valid.data.end(), 0);
  EXPECT_THROW(estimate_pose(few, k), DegenerateGeometry);

  DepthMap flat(40, 30);
  for (std::size_t i = 0; i < flat.depth.size(); ++i) {
    flat.depth[i] = 4.0;
    flat.valid[i] = 1;
  }
  const Pointmap plane = unproject(flat, k, SE3Pose::identity(), FrameTag::kCamera);
  EXPECT_THROW(estimate_pose(plane, k), DegenerateGeometry);
}

TEST(PoseEstimate, OracleFrameRecoversCamera) {
  const auto scene = synth::default_scene();
  const auto bundle = synth::render_frame(scene, 1, 3);
  const CameraEstimate est = pose_estimate(bundle.world_points);
  EXPECT_NEAR(est.intrinsics.fx / bundle.intrinsics.fx, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(est.intrinsics.cx, bundle.intrinsics.cx);
  EXPECT_LT(rotation_angle_between(est.pose.rotation, bundle.pose.rotation), 1e-4);
  EXPECT_LT((est.pose.translation - bundle.pose.translation).norm(), 1e-4);
  EXPECT_TRUE(est.pose.is_valid(1e-9));
}

TEST(PoseEstimate, CameraFrameInputGivesIdentity) {
  const Intrinsics k = Intrinsics::centered(150.0, 48, 40);
  const Pointmap cam = unproject(random_depth(48, 40, 31), k, SE3Pose::identity(),
                                 FrameTag::kCamera);
  const CameraEstimate est = pose_estimate(cam);
  EXPECT_NEAR(est.intrinsics.fx, 150.0, 150.0 * 1e-6);
  EXPECT_LT(rotation_angle_between(est.pose.rotation, Eigen::Matrix3d::Identity()), 1e-6);
  EXPECT_LT(est.pose.translation.norm(), 1e-6);
}

TEST(SE3Pose, NearestRotationSatisfiesInvariants) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 9; ++r) m(r / 3, r % 3) = n(rng);
    SE3Pose p;
    p.rotation = nearest_rotation(m);
    EXPECT_TRUE(p.is_valid(1e-9));
  }
}
