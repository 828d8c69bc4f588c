#include "stream4d/geometry/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace stream4d {

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Intrinsics Intrinsics::centered(double focal, int width, int height) {
  return {focal, focal, 0.5 * width, 0.5 * height, width, height};
}

bool Intrinsics::is_valid() const {
  return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
         std::isfinite(cy) && fx > 0.0 && fy > 0.0 && width > 0 && height > 0;
}

SE3Pose SE3Pose::from_translation(const Eigen::Vector3d& t) {
  SE3Pose p;
  p.translation = t;
  return p;
}

SE3Pose SE3Pose::from_axis_angle(const Eigen::Vector3d& axis_angle,
                                 const Eigen::Vector3d& t) {
  SE3Pose p;
  p.rotation = exp_so3(axis_angle);
  p.translation = t;
  return p;
}

SE3Pose SE3Pose::inverse() const {
  SE3Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

SE3Pose SE3Pose::operator*(const SE3Pose& other) const {
  SE3Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Eigen::Matrix4d SE3Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool SE3Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double orth =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return orth <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::AngleAxisd rel(nearest_rotation(a.transpose() * b));
  return std::abs(rel.angle());
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

const char* to_string(FrameTag tag) {
  switch (tag) {
    case FrameTag::kSequence:
      return "sequence";
    case FrameTag::kCamera:
      return "camera";
    case FrameTag::kWorld:
      return "world";
  }
  return "unknown";
}

std::size_t Pointmap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.data) n += v ? 1 : 0;
  return n;
}

std::vector<Eigen::Vector3d> Pointmap::valid_points() const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(valid_count());
  for (std::size_t i = 0; i < size(); ++i) {
    if (valid[i]) out.push_back(points[i]);
  }
  return out;
}

double ConfidenceMap::value(std::size_t i) const { return 1.0 + std::exp(raw[i]); }

double ConfidenceMap::raw_for(double confidence) {
  if (confidence <= 1.0) return -std::numeric_limits<double>::infinity();
  return std::log(confidence - 1.0);
}

}  // namespace stream4d
