#include "stream4d/metrics/metrics.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/metrics/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace stream4d::metrics {

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw EmptyCloud("no values to summarize");
  double sum = 0.0;
  for (double v : values) sum += v;
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double median = values[mid];
  if (n % 2 == 0) {
    const double below = *std::max_element(values.begin(), values.begin() + mid);
    median = 0.5 * (median + below);
  }
  return {sum / static_cast<double>(n), median};
}

namespace {

std::vector<double> nearest_distances(const std::vector<Eigen::Vector3d>& from,
                                      const std::vector<Eigen::Vector3d>& to) {
  if (from.empty() || to.empty()) throw EmptyCloud("nearest-neighbour metric on an empty cloud");
  const KdTree tree(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = tree.nearest(from[i]).distance;
  return d;
}

}  // namespace

Summary accuracy(const std::vector<Eigen::Vector3d>& pred,
                 const std::vector<Eigen::Vector3d>& gt) {
  return summarize(nearest_distances(pred, gt));
}

Summary completion(const std::vector<Eigen::Vector3d>& pred,
                   const std::vector<Eigen::Vector3d>& gt) {
  return summarize(nearest_distances(gt, pred));
}

NormalCloud grid_normals(const Pointmap& p) {
  NormalCloud out;
  for (int v = 1; v + 1 < p.height(); ++v) {
    for (int u = 1; u + 1 < p.width(); ++u) {
      if (!p.valid(u, v) || !p.valid(u - 1, v) || !p.valid(u + 1, v) || !p.valid(u, v - 1) ||
          !p.valid(u, v + 1)) {
        continue;
      }
      const Eigen::Vector3d n = (p.points(u + 1, v) - p.points(u - 1, v))
                                    .cross(p.points(u, v + 1) - p.points(u, v - 1));
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      out.points.push_back(p.points(u, v));
      out.normals.push_back(n / len);
    }
  }
  return out;
}

NormalCloud pca_normals(const std::vector<Eigen::Vector3d>& points, std::size_t k) {
  NormalCloud out;
  if (points.size() < 3) return out;
  const KdTree tree(points);
  for (const auto& p : points) {
    const auto hits = tree.k_nearest(p, k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& h : hits) mean += tree.point(h.index);
    mean /= static_cast<double>(hits.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& h : hits) {
      const Eigen::Vector3d d = tree.point(h.index) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    out.points.push_back(p);
    out.normals.push_back(es.eigenvectors().col(0).normalized());
  }
  return out;
}

Summary normal_consistency(const NormalCloud& pred, const NormalCloud& gt) {
  if (pred.points.empty() || gt.points.empty()) {
    throw EmptyCloud("normal consistency needs points with normals on both sides");
  }
  const KdTree tree(gt.points);
  std::vector<double> dots(pred.points.size());
  for (std::size_t i = 0; i < pred.points.size(); ++i) {
    const std::size_t j = tree.nearest(pred.points[i]).index;
    dots[i] = std::min(1.0, std::abs(pred.normals[i].dot(gt.normals[j])));
  }
  return summarize(std::move(dots));
}

Summary normal_consistency(const Pointmap& pred, const Pointmap& gt) {
  return normal_consistency(grid_normals(pred), grid_normals(gt));
}

DepthReport depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.depth.same_shape(gt.depth)) throw DimensionMismatch("depth map shapes differ");
  DepthReport r;
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    if (!pred.valid[i] || !gt.valid[i]) continue;
    const double p = pred.depth[i];
    const double g = gt.depth[i];
    if (!(p > 0.0) || !(g > 0.0)) {
      throw NonPositiveDepth("depth <= 0 at pixel " + std::to_string(i));
    }
    const double e = p - g;
    abs_rel += std::abs(e) / g;
    sq_rel += e * e / g;
    sq += e * e;
    const double el = std::log(p) - std::log(g);
    sq_log += el * el;
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < 1.25 ? 1 : 0;
    d2 += ratio < 1.25 * 1.25 ? 1 : 0;
    d3 += ratio < 1.25 * 1.25 * 1.25 ? 1 : 0;
    ++n;
  }
  if (n == 0) throw EmptyMask("depth maps share no valid pixel");
  const double inv = 1.0 / static_cast<double>(n);
  r.abs_rel = abs_rel * inv;
  r.sq_rel = sq_rel * inv;
  r.rmse = std::sqrt(sq * inv);
  r.rmse_log = std::sqrt(sq_log * inv);
  r.delta1 = d1 * inv;
  r.delta2 = d2 * inv;
  r.delta3 = d3 * inv;
  r.pixels = n;
  return r;
}

}  // namespace stream4d::metrics
