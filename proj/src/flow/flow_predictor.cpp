#include "stream4d/flow/flow_predictor.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/geometry/camera.hpp"

#include <algorithm>
#include <cmath>

namespace stream4d::flow {

std::vector<FramePair> make_pairs(int sequence_length) {
  if (sequence_length < 2) {
    throw SequenceTooShort("flow pairs need at least 2 frames, got " +
                           std::to_string(sequence_length));
  }
  std::vector<FramePair> pairs;
  for (int t = 0; t + 1 < sequence_length; ++t) pairs.push_back({t, t + 1});
  return pairs;
}

FlowField cross_projection_flow(const Pointmap& points, const CameraEstimate& source,
                                const CameraEstimate& target) {
  const SE3Pose to_source = source.pose.inverse();
  const SE3Pose to_target = target.pose.inverse();
  FlowField out(points.width(), points.height());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid[i]) continue;
    Eigen::Vector2d a;
    Eigen::Vector2d b;
    if (!project_point(to_source.apply(points.points[i]), source.intrinsics, &a)) continue;
    if (!project_point(to_target.apply(points.points[i]), target.intrinsics, &b)) continue;
    out.flow[i] = b - a;
    out.valid[i] = 1;
  }
  return out;
}

EgoFlow ego_flow(const Pointmap& p1, const CameraEstimate& c1, const Pointmap& p2,
                 const CameraEstimate& c2) {
  if (p1.frame != p2.frame) {
    throw DimensionMismatch("ego flow needs pointmaps in one coordinate frame");
  }
  return {cross_projection_flow(p1, c1, c2), cross_projection_flow(p2, c2, c1)};
}

EgoFlow ego_flow(const Pointmap& p1, const Pointmap& p2, const PoseOptions& options) {
  return ego_flow(p1, pose_estimate(p1, options), p2, pose_estimate(p2, options));
}

std::vector<CoarseMask> residual_mask(int sequence_length, const std::vector<FramePair>& pairs,
                                      const std::vector<FlowPair>& observed,
                                      const std::vector<EgoFlow>& ego) {
  if (observed.size() != pairs.size() || ego.size() != pairs.size()) {
    throw DimensionMismatch("pairs, observed flows and ego flows differ in count");
  }
  std::vector<CoarseMask> out(sequence_length);
  std::vector<Grid<double>> sums(sequence_length);
  auto accumulate = [&](int frame, const FlowField& f, const FlowField& e) {
    if (!f.flow.same_shape(e.flow)) throw DimensionMismatch("flow shapes differ");
    CoarseMask& m = out.at(frame);
    if (m.residual.size() == 0) {
      m.residual = Grid<double>(f.width(), f.height(), 0.0);
      m.valid = Mask(f.width(), f.height(), 0);
      m.contributions = Grid<std::uint8_t>(f.width(), f.height(), 0);
      sums[frame] = Grid<double>(f.width(), f.height(), 0.0);
    } else if (!m.residual.same_shape(f.flow)) {
      throw DimensionMismatch("flow shape differs across pairs");
    }
    for (std::size_t i = 0; i < f.flow.size(); ++i) {
      if (!f.valid[i] || !e.valid[i]) continue;
      sums[frame][i] += (f.flow[i] - e.flow[i]).norm();
      ++m.contributions[i];
    }
  };
  // Fixed pair order keeps the reduction deterministic.
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    accumulate(pairs[p].first, observed[p].forward, ego[p].forward);
    accumulate(pairs[p].second, observed[p].backward, ego[p].backward);
  }
  for (int t = 0; t < sequence_length; ++t) {
    CoarseMask& m = out[t];
    for (std::size_t i = 0; i < m.residual.size(); ++i) {
      if (m.contributions[i] == 0) continue;
      m.residual[i] = sums[t][i] / m.contributions[i];
      m.valid[i] = 1;
    }
  }
  return out;
}

DynamicMask binarize(const CoarseMask& mask, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("mask threshold must be positive");
  DynamicMask out(mask.residual.width, mask.residual.height, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (mask.valid[i] && mask.residual[i] > threshold) ? 1 : 0;
  }
  return out;
}

DynamicMask binarize_percentile(const CoarseMask& mask, double percentile, double floor) {
  std::vector<double> values;
  for (std::size_t i = 0; i < mask.residual.size(); ++i) {
    if (mask.valid[i]) values.push_back(mask.residual[i]);
  }
  double threshold = floor;
  if (!values.empty()) {
    const double q = std::clamp(percentile, 0.0, 100.0) / 100.0;
    const std::size_t k = static_cast<std::size_t>(q * (values.size() - 1));
    std::nth_element(values.begin(), values.begin() + k, values.end());
    threshold = std::max(floor, values[k]);
  }
  return binarize(mask, threshold);
}

DynamicMask refine(const DynamicMask& mask, const Image& image, const MaskRefiner& refiner) {
  if (!mask.same_shape(image)) throw DimensionMismatch("mask and image shapes differ");
  DynamicMask refined = refiner.refine(mask, image);
  if (!refined.same_shape(mask)) throw DimensionMismatch("refiner changed the mask shape");
  for (std::size_t i = 0; i < refined.size(); ++i) refined[i] = (refined[i] || mask[i]) ? 1 : 0;
  return refined;
}

PredictResult predict(const std::vector<Pointmap>& pointmaps, const std::vector<Image>& images,
                      FlowProvider& provider, const MaskRefiner& refiner,
                      const PredictOptions& options, const std::vector<CameraEstimate>* cameras) {
  const int length = static_cast<int>(pointmaps.size());
  if (images.size() != pointmaps.size()) {
    throw DimensionMismatch("pointmap and image sequences differ in length");
  }
  const std::vector<FramePair> pairs = make_pairs(length);

  PredictResult result;
  if (cameras) {
    if (cameras->size() != pointmaps.size()) throw DimensionMismatch("camera count mismatch");
    result.cameras = *cameras;
  } else {
    for (const auto& p : pointmaps) result.cameras.push_back(pose_estimate(p, options.pose));
  }

  std::vector<FlowPair> observed;
  std::vector<EgoFlow> ego;
  for (const auto& pair : pairs) {
    observed.push_back(provider.flow(pair));
    ego.push_back(ego_flow(pointmaps[pair.first], result.cameras[pair.first],
                           pointmaps[pair.second], result.cameras[pair.second]));
  }
  result.coarse = residual_mask(length, pairs, observed, ego);
  for (int t = 0; t < length; ++t) {
    DynamicMask b = options.percentile
                        ? binarize_percentile(result.coarse[t], *options.percentile,
                                              options.threshold)
                        : binarize(result.coarse[t], options.threshold);
    result.masks.push_back(refine(b, images[t], refiner));
    result.binarized.push_back(std::move(b));
  }
  return result;
}

double iou(const DynamicMask& a, const DynamicMask& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("mask shapes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t count_set(const DynamicMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data) n += v ? 1 : 0;
  return n;
}

}  // namespace stream4d::flow
