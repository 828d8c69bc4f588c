#pragma once

#include "stream4d/geometry/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace stream4d::loss {

struct Normalized {
  Pointmap points;
  double scale = 1.0;  // mean norm of the masked valid points
};

// Divides every point by the mean Euclidean norm of the masked valid points.
// Throws EmptyMask when no pixel is both masked and valid.
Normalized normalize(const Pointmap& points, const Mask& mask);

struct SupervisionFrame {
  const Pointmap* prediction = nullptr;
  const ConfidenceMap* confidence = nullptr;
  const Pointmap* supervision = nullptr;
  const DynamicMask* mask = nullptr;
  int sensor = 0;
  int t_index = 0;
};

using SupervisionBundle = std::vector<SupervisionFrame>;

enum class MaskMode {
  kDynamicOnly,  // supervise masked pixels only
  kFullFrame,    // warm-up: every pixel valid on both sides
};

// Full-frame during the first `warmup_steps` steps, dynamic-only afterwards.
MaskMode mask_mode_for_step(int step, int warmup_steps);

struct LossOptions {
  double alpha = 0.5;
  bool mean_reduction = false;  // average the confidence term per frame
  MaskMode mode = MaskMode::kDynamicOnly;
};

struct FrameGradient {
  Grid<Eigen::Vector3d> d_points;
  Grid<double> d_raw;
};

struct LossValue {
  double total = 0.0;
  double confidence = 0.0;
  double scale = 0.0;
  std::vector<FrameGradient> gradients;  // one per bundle frame
};

// Sum over frames and supervised pixels of C * |p_hat - s_hat| - alpha log C,
// with both pointmaps normalized independently.
LossValue conf_loss(const SupervisionBundle& bundle, const LossOptions& options = {});

// Sum over frames of max(0, X - X_sup), X the mean norm of the supervised
// predicted points. Zero subgradient at the kink.
LossValue scale_loss(const SupervisionBundle& bundle, const LossOptions& options = {});

LossValue total_loss(const SupervisionBundle& bundle, const LossOptions& options = {});

// Worst relative deviation between central differences of `f` (step h) and
// the analytic gradient along `directions` random unit directions.
double grad_check(const std::function<double(const Eigen::VectorXd&)>& f,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                  const Eigen::VectorXd& x, double h = 1e-5, int directions = 8,
                  std::uint64_t seed = 0);

}  // namespace stream4d::loss
