#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace stream4d {

// Row-major H x W grid. Pixel (u, v) is column u, row v; pixel centers sit at
// integer coordinates.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, const T& init = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, init) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height;
  }
  T& operator()(int u, int v) { return data[index(u, v)]; }
  const T& operator()(int u, int v) const { return data[index(u, v)]; }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width == other.width && height == other.height;
  }
};

// Byte mask; std::vector<bool> is avoided so masks can be span-viewed.
using Mask = Grid<std::uint8_t>;
using DynamicMask = Mask;
// Grayscale intensities in [0, 1].
using Image = Grid<double>;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d matrix() const;
  // Shared focal, principal point at the image center.
  static Intrinsics centered(double focal, int width, int height);
  bool is_valid() const;
};

// Rigid transform x -> R x + t. Stored poses are camera-to-world (or
// camera-to-<external frame>); inverses are applied explicitly.
struct SE3Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static SE3Pose identity() { return {}; }
  static SE3Pose from_translation(const Eigen::Vector3d& t);
  static SE3Pose from_axis_angle(const Eigen::Vector3d& axis_angle,
                                 const Eigen::Vector3d& t);

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return rotation * x + translation;
  }
  SE3Pose inverse() const;
  // (a * b).apply(x) == a.apply(b.apply(x))
  SE3Pose operator*(const SE3Pose& other) const;
  Eigen::Matrix4d matrix() const;

  // True when R^T R = I and det R = 1 within tol.
  bool is_valid(double tol = 1e-9) const;
};

// Nearest rotation in Frobenius norm (SVD projection with det fix).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);
// Angle of the relative rotation a^T b, radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
Eigen::Matrix3d skew(const Eigen::Vector3d& w);
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);

enum class FrameTag { kSequence, kCamera, kWorld };
const char* to_string(FrameTag tag);

struct Pointmap {
  Grid<Eigen::Vector3d> points;
  Mask valid;
  FrameTag frame = FrameTag::kCamera;

  Pointmap() = default;
  Pointmap(int w, int h, FrameTag tag)
      : points(w, h, Eigen::Vector3d::Zero()), valid(w, h, 0), frame(tag) {}

  int width() const { return points.width; }
  int height() const { return points.height; }
  std::size_t size() const { return points.size(); }
  std::size_t valid_count() const;
  // Valid points, row-major order.
  std::vector<Eigen::Vector3d> valid_points() const;
};

struct DepthMap {
  Grid<double> depth;
  Mask valid;

  DepthMap() = default;
  DepthMap(int w, int h) : depth(w, h, 0.0), valid(w, h, 0) {}
  int width() const { return depth.width; }
  int height() const { return depth.height; }
};

// Per-pixel 2D vectors (pixels): projected coordinates or flow.
struct FlowField {
  Grid<Eigen::Vector2d> flow;
  Mask valid;

  FlowField() = default;
  FlowField(int w, int h) : flow(w, h, Eigen::Vector2d::Zero()), valid(w, h, 0) {}
  int width() const { return flow.width; }
  int height() const { return flow.height; }
};

// Confidence parameterized as 1 + exp(raw) so every value is >= 1.
struct ConfidenceMap {
  Grid<double> raw;

  ConfidenceMap() = default;
  ConfidenceMap(int w, int h, double raw_init) : raw(w, h, raw_init) {}
  double value(std::size_t i) const;
  int width() const { return raw.width; }
  int height() const { return raw.height; }
  static double raw_for(double confidence);
};

}  // namespace stream4d
