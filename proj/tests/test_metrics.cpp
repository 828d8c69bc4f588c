#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"
#include "stream4d/metrics/kdtree.hpp"
#include "stream4d/metrics/metrics.hpp"
#include "stream4d/synth/scene.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace stream4d;
using namespace stream4d::metrics;

namespace {

std::vector<Eigen::Vector3d> random_cloud(std::mt19937_64& rng, std::size_t n, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Eigen::Vector3d> out(n);
  for (auto& p : out) p = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return out;
}

std::vector<double> brute_nearest(const std::vector<Eigen::Vector3d>& from,
                                  const std::vector<Eigen::Vector3d>& to) {
  std::vector<double> d;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).norm());
    d.push_back(best);
  }
  return d;
}

Summary brute_summary(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {sum / n, median};
}

// Pointmap of the plane z = 5 rotated by `angle` about the x axis through
// (0, 0, 5), sampled on a regular grid.
Pointmap plane_grid(double angle, int size = 40) {
  Pointmap p(size, size, FrameTag::kWorld);
  const Eigen::Matrix3d r = exp_so3(Eigen::Vector3d(angle, 0.0, 0.0));
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      p.points(u, v) = r * Eigen::Vector3d(0.1 * (u - size / 2), 0.1 * (v - size / 2), 0.0) +
                       Eigen::Vector3d(0, 0, 5);
      p.valid(u, v) = 1;
    }
  }
  return p;
}

DepthMap depth_of(const std::vector<double>& d) {
  DepthMap m(static_cast<int>(d.size()), 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    m.depth[i] = d[i];
    m.valid[i] = 1;
  }
  return m;
}

}  // namespace

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  const auto cloud = random_cloud(rng, 1500, 3.0);
  const KdTree tree(cloud);
  const auto queries = random_cloud(rng, 300, 4.0);
  for (const auto& q : queries) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < cloud.size(); ++i) all.emplace_back((cloud[i] - q).norm(), i);
    std::sort(all.begin(), all.end());
    const auto hit = tree.nearest(q);
    ASSERT_EQ(hit.distance, all[0].first);
    const auto k = tree.k_nearest(q, 16);
    ASSERT_EQ(k.size(), 16u);
    for (std::size_t j = 0; j < 16; ++j) ASSERT_EQ(k[j].distance, all[j].first);
  }
}

TEST(Accuracy, IdenticalCloudsAreZero) {
  std::mt19937_64 rng(2);
  const auto c = random_cloud(rng, 500, 1.0);
  const Summary a = accuracy(c, c);
  EXPECT_EQ(a.mean, 0.0);
  EXPECT_EQ(a.median, 0.0);
}

TEST(Accuracy, ShiftOfIsolatedPoints) {
  std::vector<Eigen::Vector3d> gt;
  for (int i = 0; i < 50; ++i) gt.emplace_back(10.0 * i, 3.0 * (i % 7), 0.0);
  std::vector<Eigen::Vector3d> pred = gt;
  for (auto& p : pred) p.x() += 0.01;
  EXPECT_NEAR(accuracy(pred, gt).mean, 0.01, 1e-12);
  EXPECT_NEAR(completion(pred, gt).median, 0.01, 1e-12);
}

TEST(Accuracy, MatchesBruteForceOnRandomClouds) {
  for (int seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 10);
    const auto pred = random_cloud(rng, 2000, 2.0);
    const auto gt = random_cloud(rng, 1800, 2.0);
    const Summary a = accuracy(pred, gt);
    const Summary ba = brute_summary(brute_nearest(pred, gt));
    EXPECT_NEAR(a.mean, ba.mean, 1e-12);
    EXPECT_NEAR(a.median, ba.median, 1e-12);
    const Summary c = completion(pred, gt);
    const Summary bc = brute_summary(brute_nearest(gt, pred));
    EXPECT_NEAR(c.mean, bc.mean, 1e-12);
    EXPECT_NEAR(c.median, bc.median, 1e-12);
    // Symmetry of the definitions.
    EXPECT_EQ(accuracy(pred, gt).mean, completion(gt, pred).mean);
    EXPECT_EQ(accuracy(pred, gt).median, completion(gt, pred).median);
  }
}

TEST(Completion, SupersetIsZero) {
  std::mt19937_64 rng(3);
  const auto gt = random_cloud(rng, 300, 1.0);
  auto pred = gt;
  const auto extra = random_cloud(rng, 200, 5.0);
  pred.insert(pred.end(), extra.begin(), extra.end());
  EXPECT_EQ(completion(pred, gt).mean, 0.0);
  EXPECT_THROW(accuracy({}, gt), EmptyCloud);
}

TEST(Accuracy, PermutationInvariant) {
  std::mt19937_64 rng(4);
  auto pred = random_cloud(rng, 400, 1.0);
  auto gt = random_cloud(rng, 400, 1.0);
  const Summary a = accuracy(pred, gt);
  std::shuffle(gt.begin(), gt.end(), rng);
  std::reverse(pred.begin(), pred.end());
  EXPECT_NEAR(accuracy(pred, gt).mean, a.mean, 1e-12);
  EXPECT_EQ(accuracy(pred, gt).median, a.median);
}

TEST(NormalConsistency, IdenticalPlanesAreOne) {
  const Pointmap p = plane_grid(0.0);
  const Summary s = normal_consistency(p, p);
  EXPECT_NEAR(s.mean, 1.0, 1e-12);
  EXPECT_NEAR(s.median, 1.0, 1e-12);
}

TEST(NormalConsistency, TiltedPlaneGivesCosine) {
  for (double theta : {0.1, 0.35, 0.8}) {
    const Summary s = normal_consistency(plane_grid(theta), plane_grid(0.0));
    EXPECT_NEAR(s.mean, std::cos(theta), 1e-6);
    EXPECT_NEAR(s.median, std::cos(theta), 1e-6);
  }
}

TEST(NormalConsistency, PcaFallbackOnPlane) {
  const Pointmap p = plane_grid(0.35);
  const NormalCloud pca = pca_normals(p.valid_points(), 16);
  const Eigen::Vector3d n = exp_so3(Eigen::Vector3d(0.35, 0, 0)) * Eigen::Vector3d::UnitZ();
  for (const auto& m : pca.normals) ASSERT_NEAR(std::abs(m.dot(n)), 1.0, 1e-9);
}

TEST(NormalConsistency, GridNormalsMatchAnalyticFaces) {
  const synth::SceneSpec scene = synth::default_scene();
  double sum = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < scene.num_sensors(); ++c) {
    const synth::FrameBundle f = synth::render_frame(scene, 1, c);
    const SE3Pose cam = f.pose;
    const int w = f.depth.width();
    const int h = f.depth.height();
    Grid<Eigen::Vector3d> analytic(w, h, Eigen::Vector3d::Zero());
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const Eigen::Vector3d d = cam.rotation * Eigen::Vector3d((u - f.intrinsics.cx) / f.intrinsics.fx,
                                                                 (v - f.intrinsics.cy) / f.intrinsics.fy, 1.0);
        const auto hit = synth::cast_ray(scene, f.timestamp, cam.translation, d);
        if (hit) analytic(u, v) = hit->normal;
      }
    }
    for (int v = 1; v + 1 < h; ++v) {
      for (int u = 1; u + 1 < w; ++u) {
        // Away from edges: the 3x3 neighbourhood lies on one face.
        bool interior = f.depth.valid(u, v);
        for (int dv = -1; dv <= 1 && interior; ++dv) {
          for (int du = -1; du <= 1 && interior; ++du) {
            interior = f.depth.valid(u + du, v + dv) &&
                       f.hit_primitive(u + du, v + dv) == f.hit_primitive(u, v) &&
                       analytic(u + du, v + dv) == analytic(u, v);
          }
        }
        if (!interior) continue;
        const auto& p = f.world_points.points;
        const Eigen::Vector3d g =
            (p(u + 1, v) - p(u - 1, v)).cross(p(u, v + 1) - p(u, v - 1)).normalized();
        sum += std::abs(g.dot(analytic(u, v)));
        ++n;
      }
    }
  }
  ASSERT_GT(n, 10000u);
  EXPECT_GE(sum / n, 0.999);
}

TEST(DepthMetrics, PerfectPrediction) {
  const DepthMap gt = depth_of({1.0, 2.0, 5.0, 10.0});
  const DepthReport r = depth_metrics(gt, gt);
  EXPECT_EQ(r.abs_rel, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.delta1, 1.0);
  EXPECT_EQ(r.delta3, 1.0);
}

TEST(DepthMetrics, DoubledPredictionClosedForm) {
  const std::vector<double> d{1.0, 2.0, 5.0, 10.0};
  std::vector<double> p;
  for (double x : d) p.push_back(2.0 * x);
  const DepthReport r = depth_metrics(depth_of(p), depth_of(d));
  EXPECT_NEAR(r.abs_rel, 1.0, 1e-15);
  EXPECT_NEAR(r.rmse_log, std::log(2.0), 1e-15);
  EXPECT_EQ(r.delta1, 0.0);
  EXPECT_EQ(r.delta2, 0.0);
  EXPECT_EQ(r.delta3, 0.0);
  EXPECT_NEAR(r.sq_rel, (1.0 + 2.0 + 5.0 + 10.0) / 4.0, 1e-12);
}

TEST(DepthMetrics, RandomMatchesScalar) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 40.0);
  std::vector<double> p(500);
  std::vector<double> g(500);
  for (std::size_t i = 0; i < p.size(); ++i) {
    g[i] = u(rng);
    p[i] = g[i] * std::exp(0.3 * (u(rng) / 40.0 - 0.5) * 4.0);
  }
  double ar = 0, sr = 0, se = 0, sl = 0, a1 = 0, a2 = 0, a3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ar += std::abs(p[i] - g[i]) / g[i];
    sr += (p[i] - g[i]) * (p[i] - g[i]) / g[i];
    se += (p[i] - g[i]) * (p[i] - g[i]);
    sl += std::pow(std::log(p[i]) - std::log(g[i]), 2);
    const double t = std::max(p[i] / g[i], g[i] / p[i]);
    a1 += t < 1.25;
    a2 += t < 1.5625;
    a3 += t < 1.953125;
  }
  const double n = static_cast<double>(p.size());
  const DepthReport r = depth_metrics(depth_of(p), depth_of(g));
  EXPECT_NEAR(r.abs_rel, ar / n, 1e-12);
  EXPECT_NEAR(r.sq_rel, sr / n, 1e-12);
  EXPECT_NEAR(r.rmse, std::sqrt(se / n), 1e-12);
  EXPECT_NEAR(r.rmse_log, std::sqrt(sl / n), 1e-12);
  EXPECT_NEAR(r.delta1, a1 / n, 1e-12);
  EXPECT_NEAR(r.delta2, a2 / n, 1e-12);
  EXPECT_NEAR(r.delta3, a3 / n, 1e-12);
  EXPECT_LE(r.delta1, r.delta2);
  EXPECT_LE(r.delta2, r.delta3);
}

TEST(DepthMetrics, Errors) {
  DepthMap a = depth_of({1.0, 2.0});
  DepthMap b = depth_of({1.0, 2.0});
  b.valid[0] = 0;
  b.valid[1] = 0;
  EXPECT_THROW(depth_metrics(a, b), EmptyMask);
  DepthMap c = depth_of({1.0, -2.0});
  EXPECT_THROW(depth_metrics(c, a), NonPositiveDepth);
}
