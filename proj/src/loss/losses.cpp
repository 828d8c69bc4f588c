#include "stream4d/loss/losses.hpp"

#include "stream4d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stream4d::loss {
namespace {

void check_frame(const SupervisionFrame& f) {
  if (!f.prediction || !f.confidence || !f.supervision || !f.mask) {
    throw DimensionMismatch("supervision frame is missing an input");
  }
  const int w = f.prediction->width();
  const int h = f.prediction->height();
  if (f.supervision->width() != w || f.supervision->height() != h || f.mask->width != w ||
      f.mask->height != h || f.confidence->width() != w || f.confidence->height() != h) {
    throw DimensionMismatch("supervision frame shapes differ");
  }
}

Mask supervised_pixels(const SupervisionFrame& f, MaskMode mode) {
  Mask m(f.prediction->width(), f.prediction->height(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool both = f.prediction->valid[i] && f.supervision->valid[i];
    m[i] = (both && (mode == MaskMode::kFullFrame || (*f.mask)[i])) ? 1 : 0;
  }
  return m;
}

FrameGradient zero_gradient(const SupervisionFrame& f) {
  return {Grid<Eigen::Vector3d>(f.prediction->width(), f.prediction->height(),
                                Eigen::Vector3d::Zero()),
          Grid<double>(f.prediction->width(), f.prediction->height(), 0.0)};
}

void empty_mask(const SupervisionFrame& f) {
  throw EmptyMask("no supervised pixels at t=" + std::to_string(f.t_index) +
                  " sensor=" + std::to_string(f.sensor));
}

}  // namespace

Normalized normalize(const Pointmap& points, const Mask& mask) {
  if (!mask.same_shape(points.valid)) throw DimensionMismatch("mask shape differs");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid[i] || !mask[i]) continue;
    sum += points.points[i].norm();
    ++n;
  }
  if (n == 0) throw EmptyMask("normalization needs at least one masked valid point");
  Normalized out{points, sum / static_cast<double>(n)};
  if (!(out.scale > 0.0)) throw EmptyMask("masked points all sit at the origin");
  for (auto& p : out.points.points.data) p /= out.scale;
  return out;
}

MaskMode mask_mode_for_step(int step, int warmup_steps) {
  return step < warmup_steps ? MaskMode::kFullFrame : MaskMode::kDynamicOnly;
}

LossValue conf_loss(const SupervisionBundle& bundle, const LossOptions& options) {
  if (!(options.alpha > 0.0)) throw ConfigError("alpha must be positive");
  LossValue out;
  for (const auto& f : bundle) {
    check_frame(f);
    const Mask m = supervised_pixels(f, options.mode);
    std::size_t n = 0;
    for (auto v : m.data) n += v;
    if (n == 0) empty_mask(f);
    const Normalized pred = normalize(*f.prediction, m);
    const Normalized sup = normalize(*f.supervision, m);
    const double s = pred.scale;
    const double weight = options.mean_reduction ? 1.0 / static_cast<double>(n) : 1.0;

    FrameGradient g = zero_gradient(f);
    double frame_loss = 0.0;
    // sum_i C_i u_i . p_i, the coupling through the shared scale.
    double coupling = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      const double c = f.confidence->value(i);
      const Eigen::Vector3d diff = pred.points.points[i] - sup.points.points[i];
      const double r = diff.norm();
      frame_loss += c * r - options.alpha * std::log(c);
      const Eigen::Vector3d u = r > 0.0 ? Eigen::Vector3d(diff / r) : Eigen::Vector3d::Zero();
      g.d_points[i] = weight * c * u / s;
      coupling += c * u.dot(f.prediction->points[i]);
      g.d_raw[i] = weight * (r - options.alpha / c) * (c - 1.0);
    }
    const double k = weight * coupling / (s * s * static_cast<double>(n));
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      const Eigen::Vector3d& p = f.prediction->points[i];
      const double norm = p.norm();
      if (norm > 0.0) g.d_points[i] -= k * p / norm;
    }
    out.confidence += weight * frame_loss;
    out.gradients.push_back(std::move(g));
  }
  out.total = out.confidence;
  return out;
}

LossValue scale_loss(const SupervisionBundle& bundle, const LossOptions& options) {
  LossValue out;
  for (const auto& f : bundle) {
    check_frame(f);
    const Mask m = supervised_pixels(f, options.mode);
    double x = 0.0;
    double x_sup = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      x += f.prediction->points[i].norm();
      x_sup += f.supervision->points[i].norm();
      ++n;
    }
    if (n == 0) empty_mask(f);
    x /= static_cast<double>(n);
    x_sup /= static_cast<double>(n);
    FrameGradient g = zero_gradient(f);
    if (x > x_sup) {
      out.scale += x - x_sup;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        const Eigen::Vector3d& p = f.prediction->points[i];
        const double norm = p.norm();
        if (norm > 0.0) g.d_points[i] = p / (norm * static_cast<double>(n));
      }
    }
    out.gradients.push_back(std::move(g));
  }
  out.total = out.scale;
  return out;
}

LossValue total_loss(const SupervisionBundle& bundle, const LossOptions& options) {
  LossValue conf = conf_loss(bundle, options);
  const LossValue scale = scale_loss(bundle, options);
  conf.scale = scale.scale;
  conf.total = conf.confidence + conf.scale;
  for (std::size_t f = 0; f < conf.gradients.size(); ++f) {
    auto& g = conf.gradients[f].d_points.data;
    const auto& h = scale.gradients[f].d_points.data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += h[i];
  }
  return conf;
}

double grad_check(const std::function<double(const Eigen::VectorXd&)>& f,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                  const Eigen::VectorXd& x, double h, int directions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd g = gradient(x);
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = normal(rng);
    d.normalize();
    const double numeric = (f(x + h * d) - f(x - h * d)) / (2.0 * h);
    const double analytic = g.dot(d);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

}  // namespace stream4d::loss
