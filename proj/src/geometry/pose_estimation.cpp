#include "stream4d/geometry/pose_estimation.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

namespace stream4d {
namespace {

using Matrix34d = Eigen::Matrix<double, 3, 4>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

constexpr std::size_t kMinPosePoints = 6;

struct Similarity2 {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double scale = 1.0;
};
struct Similarity3 {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  double scale = 1.0;
};

template <typename Vec, typename Sim>
Sim isotropic_normalization(const std::vector<Vec>& xs, const std::vector<std::size_t>& idx,
                            double target) {
  Sim sim;
  Vec mean = Vec::Zero();
  for (auto i : idx) mean += xs[i];
  mean /= static_cast<double>(idx.size());
  double dist = 0.0;
  for (auto i : idx) dist += (xs[i] - mean).norm();
  dist /= static_cast<double>(idx.size());
  sim.mean = mean;
  sim.scale = dist > 0.0 ? target / dist : 1.0;
  return sim;
}

// Algebraic DLT for x ~ P X. Coordinates are Hartley-normalized internally.
Matrix34d dlt(const std::vector<Eigen::Vector2d>& xs, const std::vector<Eigen::Vector3d>& Xs,
              const std::vector<std::size_t>& idx) {
  if (idx.size() < kMinPosePoints) {
    throw DegenerateGeometry("DLT needs at least 6 correspondences, got " +
                             std::to_string(idx.size()));
  }
  const auto n2 = isotropic_normalization<Eigen::Vector2d, Similarity2>(xs, idx, std::sqrt(2.0));
  const auto n3 = isotropic_normalization<Eigen::Vector3d, Similarity3>(Xs, idx, std::sqrt(3.0));

  Matrix12d ata = Matrix12d::Zero();
  Vector12d r1;
  Vector12d r2;
  for (auto i : idx) {
    const Eigen::Vector2d x = (xs[i] - n2.mean) * n2.scale;
    Eigen::Vector4d X;
    X << (Xs[i] - n3.mean) * n3.scale, 1.0;
    r1 << X, Eigen::Vector4d::Zero(), -x.x() * X;
    r2 << Eigen::Vector4d::Zero(), X, -x.y() * X;
    ata.selfadjointView<Eigen::Lower>().rankUpdate(r1);
    ata.selfadjointView<Eigen::Lower>().rankUpdate(r2);
  }
  Eigen::SelfAdjointEigenSolver<Matrix12d> eig(ata.selfadjointView<Eigen::Lower>());
  const auto& evals = eig.eigenvalues();
  if (!(evals(1) > 1e-10 * evals(11))) {
    throw DegenerateGeometry("DLT system is rank deficient (coplanar or collinear points)");
  }
  const Vector12d v = eig.eigenvectors().col(0);
  Matrix34d pn;
  pn.row(0) = v.segment<4>(0).transpose();
  pn.row(1) = v.segment<4>(4).transpose();
  pn.row(2) = v.segment<4>(8).transpose();

  Eigen::Matrix3d t2_inv = Eigen::Matrix3d::Identity();
  t2_inv(0, 0) = t2_inv(1, 1) = 1.0 / n2.scale;
  t2_inv(0, 2) = n2.mean.x();
  t2_inv(1, 2) = n2.mean.y();
  Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
  t3.topLeftCorner<3, 3>() *= n3.scale;
  t3.topRightCorner<3, 1>() = -n3.scale * n3.mean;
  Matrix34d p = t2_inv * pn * t3;
  if (p.leftCols<3>().determinant() < 0.0) p = -p;
  return p;
}

void check_not_coplanar(const std::vector<Eigen::Vector3d>& Xs,
                        const std::vector<std::size_t>& idx) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : idx) mean += Xs[i];
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : idx) {
    const Eigen::Vector3d d = Xs[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (!(eig.eigenvalues()(0) > 1e-10 * eig.eigenvalues()(2))) {
    throw DegenerateGeometry("support points are coplanar or collinear");
  }
}

// World-to-camera (R, t) from a DLT in normalized image coordinates.
SE3Pose calibrated_dlt(const Correspondences& corr, const Intrinsics& k,
                       const std::vector<std::size_t>& idx) {
  std::vector<Eigen::Vector2d> normalized(corr.pixels.size());
  for (auto i : idx) {
    normalized[i] << (corr.pixels[i].x() - k.cx) / k.fx, (corr.pixels[i].y() - k.cy) / k.fy;
  }
  const Matrix34d p = dlt(normalized, corr.points, idx);
  const Eigen::Matrix3d m = p.leftCols<3>();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0)) throw DegenerateGeometry("DLT produced a zero camera matrix");
  SE3Pose world_to_cam;
  world_to_cam.rotation = nearest_rotation(m);
  world_to_cam.translation = p.col(3) / scale;
  return world_to_cam;
}

double squared_reprojection(const Eigen::Vector2d& pixel, const Eigen::Vector3d& X,
                            const Intrinsics& k, const SE3Pose& world_to_cam) {
  const Eigen::Vector3d y = world_to_cam.apply(X);
  if (!(y.z() > 1e-9)) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d r(k.fx * y.x() / y.z() + k.cx - pixel.x(),
                          k.fy * y.y() / y.z() + k.cy - pixel.y());
  return r.squaredNorm();
}

double total_cost(const Correspondences& corr, const Intrinsics& k, const SE3Pose& pose,
                  const std::vector<std::size_t>& idx) {
  double c = 0.0;
  for (auto i : idx) c += squared_reprojection(corr.pixels[i], corr.points[i], k, pose);
  return c;
}

SE3Pose gauss_newton(const Correspondences& corr, const Intrinsics& k, SE3Pose pose,
                     const std::vector<std::size_t>& idx, int max_iterations) {
  double cost = total_cost(corr, k, pose, idx);
  if (!std::isfinite(cost)) {
    throw DegenerateGeometry("initial pose places support points behind the camera");
  }
  for (int iter = 0; iter < max_iterations; ++iter) {
    Matrix6d jtj = Matrix6d::Zero();
    Vector6d jtr = Vector6d::Zero();
    for (auto i : idx) {
      const Eigen::Vector3d rx = pose.rotation * corr.points[i];
      const Eigen::Vector3d y = rx + pose.translation;
      const double iz = 1.0 / y.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * y.x() * iz * iz, 0.0, k.fy * iz, -k.fy * y.y() * iz * iz;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dproj * skew(rx);
      j.rightCols<3>() = dproj;
      const Eigen::Vector2d r(k.fx * y.x() * iz + k.cx - corr.pixels[i].x(),
                              k.fy * y.y() * iz + k.cy - corr.pixels[i].y());
      jtj.noalias() += j.transpose() * j;
      jtr.noalias() += j.transpose() * r;
    }
    const Vector6d delta = -jtj.ldlt().solve(jtr);
    if (!delta.allFinite()) throw DegenerateGeometry("singular Gauss-Newton system");

    // Step halving keeps every accepted iterate cost-reducing.
    double step = 1.0;
    bool accepted = false;
    SE3Pose candidate;
    double candidate_cost = cost;
    for (int halving = 0; halving < 8; ++halving, step *= 0.5) {
      candidate.rotation = exp_so3(step * delta.head<3>()) * pose.rotation;
      candidate.translation = pose.translation + step * delta.tail<3>();
      candidate_cost = total_cost(corr, k, candidate, idx);
      if (candidate_cost < cost) {
        accepted = true;
        break;
      }
    }
    const double rel_step =
        delta.tail<3>().norm() / std::max(1.0, pose.translation.norm()) + delta.head<3>().norm();
    if (!accepted) return pose;  // at a minimum to machine precision
    const double decrease = cost - candidate_cost;
    pose = candidate;
    cost = candidate_cost;
    if (rel_step < 1e-12 || decrease <= 1e-14 * std::max(cost, 1e-300)) return pose;
  }
  throw NonConvergence("Gauss-Newton did not converge within " +
                       std::to_string(max_iterations) + " iterations");
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// RQ decomposition m = K R, K upper triangular with positive diagonal.
void rq3(const Eigen::Matrix3d& m, Eigen::Matrix3d* k, Eigen::Matrix3d* r) {
  Eigen::Matrix3d flip;
  flip << 0, 0, 1, 0, 1, 0, 1, 0, 0;
  Eigen::HouseholderQR<Eigen::Matrix3d> qr((flip * m).transpose());
  const Eigen::Matrix3d q = qr.householderQ();
  const Eigen::Matrix3d upper = qr.matrixQR().triangularView<Eigen::Upper>();
  *k = flip * upper.transpose() * flip;
  *r = flip * q.transpose();
  for (int i = 0; i < 3; ++i) {
    if ((*k)(i, i) < 0.0) {
      k->col(i) *= -1.0;
      r->row(i) *= -1.0;
    }
  }
}

}  // namespace

double focal_cost(const Pointmap& camera_points, double focal) {
  const double cx = 0.5 * camera_points.width();
  const double cy = 0.5 * camera_points.height();
  double cost = 0.0;
  for (int v = 0; v < camera_points.height(); ++v) {
    for (int u = 0; u < camera_points.width(); ++u) {
      const std::size_t i = camera_points.points.index(u, v);
      const Eigen::Vector3d& p = camera_points.points[i];
      if (!camera_points.valid[i] || !(p.z() > 0.0)) continue;
      cost += Eigen::Vector2d(u - cx - focal * p.x() / p.z(), v - cy - focal * p.y() / p.z())
                  .norm();
    }
  }
  return cost;
}

double estimate_focal(const Pointmap& camera_points, const FocalOptions& options) {
  const double cx = 0.5 * camera_points.width();
  const double cy = 0.5 * camera_points.height();
  std::vector<Eigen::Vector2d> offsets;
  std::vector<Eigen::Vector2d> rays;
  for (int v = 0; v < camera_points.height(); ++v) {
    for (int u = 0; u < camera_points.width(); ++u) {
      const std::size_t i = camera_points.points.index(u, v);
      const Eigen::Vector3d& p = camera_points.points[i];
      if (!camera_points.valid[i] || !(p.z() > 0.0)) continue;
      offsets.emplace_back(u - cx, v - cy);
      rays.emplace_back(p.x() / p.z(), p.y() / p.z());
    }
  }
  if (offsets.size() < options.min_points) {
    throw DegenerateGeometry("focal estimation needs " + std::to_string(options.min_points) +
                             " points in front of the camera, got " +
                             std::to_string(offsets.size()));
  }

  std::vector<double> weights(offsets.size(), 1.0);
  auto solve = [&]() {
    double num = 0.0;
    double den = 0.0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      num += weights[i] * offsets[i].dot(rays[i]);
      den += weights[i] * rays[i].squaredNorm();
      wsum += weights[i];
    }
    if (!(den / wsum >= 1e-12)) {
      throw DegenerateGeometry("all rays lie on the optical axis");
    }
    return num / den;
  };

  double focal = solve();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      weights[i] = 1.0 / std::max((offsets[i] - focal * rays[i]).norm(), 1e-8);
    }
    const double next = solve();
    const double change = std::abs(next - focal) / std::abs(next);
    focal = next;
    if (change < options.relative_tolerance) break;
  }
  if (!(focal > 0.0) || !std::isfinite(focal)) {
    throw DegenerateGeometry("focal estimate is not positive");
  }
  return focal;
}

Correspondences grid_correspondences(const Pointmap& points) {
  Correspondences corr;
  corr.pixels.reserve(points.valid_count());
  corr.points.reserve(points.valid_count());
  for (int v = 0; v < points.height(); ++v) {
    for (int u = 0; u < points.width(); ++u) {
      const std::size_t i = points.points.index(u, v);
      if (!points.valid[i]) continue;
      corr.pixels.emplace_back(u, v);
      corr.points.push_back(points.points[i]);
    }
  }
  return corr;
}

SE3Pose estimate_pose(const Pointmap& points, const Intrinsics& k, const PoseOptions& options) {
  return estimate_pose(grid_correspondences(points), k, options);
}

SE3Pose estimate_pose(const Correspondences& corr, const Intrinsics& k,
                      const PoseOptions& options) {
  const std::size_t n = corr.points.size();
  if (n < kMinPosePoints) {
    throw DegenerateGeometry("pose estimation needs at least 6 valid points, got " +
                             std::to_string(n));
  }
  std::vector<std::size_t> support = iota_indices(n);
  check_not_coplanar(corr.points, support);

  SE3Pose world_to_cam;
  if (options.ransac) {
    std::mt19937_64 rng(options.seed);
    const double thresh2 = options.ransac_threshold_px * options.ransac_threshold_px;
    std::vector<std::size_t> best_inliers;
    std::vector<std::size_t> sample(kMinPosePoints);
    std::vector<std::size_t> inliers;
    for (int it = 0; it < options.ransac_iterations; ++it) {
      for (std::size_t s = 0; s < kMinPosePoints; ++s) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t c;
        do {
          c = pick(rng);
        } while (std::find(sample.begin(), sample.begin() + s, c) != sample.begin() + s);
        sample[s] = c;
      }
      SE3Pose hypothesis;
      try {
        hypothesis = calibrated_dlt(corr, k, sample);
      } catch (const DegenerateGeometry&) {
        continue;
      }
      inliers.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (squared_reprojection(corr.pixels[i], corr.points[i], k, hypothesis) < thresh2) {
          inliers.push_back(i);
        }
      }
      if (inliers.size() > best_inliers.size()) best_inliers = inliers;
    }
    if (best_inliers.size() < kMinPosePoints) {
      throw DegenerateGeometry("RANSAC found fewer than 6 inliers");
    }
    support = std::move(best_inliers);
  }
  world_to_cam = calibrated_dlt(corr, k, support);
  world_to_cam = gauss_newton(corr, k, world_to_cam, support, options.max_gauss_newton_iterations);
  world_to_cam.rotation = nearest_rotation(world_to_cam.rotation);
  return world_to_cam.inverse();
}

CameraEstimate pose_estimate(const Pointmap& points, const PoseOptions& options) {
  Pointmap camera_frame;
  if (points.frame == FrameTag::kCamera) {
    camera_frame = points;
  } else {
    const Correspondences corr = grid_correspondences(points);
    if (corr.points.size() < kMinPosePoints) {
      throw DegenerateGeometry("pose estimation needs at least 6 valid points, got " +
                               std::to_string(corr.points.size()));
    }
    const auto idx = iota_indices(corr.points.size());
    check_not_coplanar(corr.points, idx);
    const Matrix34d p = dlt(corr.pixels, corr.points, idx);
    Eigen::Matrix3d kk;
    Eigen::Matrix3d r;
    rq3(p.leftCols<3>(), &kk, &r);
    const Eigen::Vector3d center = -p.leftCols<3>().inverse() * p.col(3);
    SE3Pose to_camera;
    to_camera.rotation = r;
    to_camera.translation = -(r * center);
    camera_frame = transform(points, to_camera, FrameTag::kCamera);
  }
  CameraEstimate out;
  out.intrinsics = Intrinsics::centered(estimate_focal(camera_frame), points.width(),
                                        points.height());
  out.pose = estimate_pose(points, out.intrinsics, options);
  return out;
}

double reprojection_error(const Correspondences& corr, const Intrinsics& k,
                          const SE3Pose& camera_to_external) {
  const SE3Pose world_to_cam = camera_to_external.inverse();
  double sum = 0.0;
  for (std::size_t i = 0; i < corr.points.size(); ++i) {
    sum += std::sqrt(squared_reprojection(corr.pixels[i], corr.points[i], k, world_to_cam));
  }
  return corr.points.empty() ? 0.0 : sum / static_cast<double>(corr.points.size());
}

}  // namespace stream4d
