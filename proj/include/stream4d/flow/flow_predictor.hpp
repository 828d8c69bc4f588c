#pragma once

#include "stream4d/geometry/pose_estimation.hpp"
#include "stream4d/geometry/types.hpp"

#include <optional>
#include <vector>

namespace stream4d::flow {

// Temporally adjacent frames (0-based indices, second == first + 1).
struct FramePair {
  int first = 0;
  int second = 1;
};

std::vector<FramePair> make_pairs(int sequence_length);

// Observed flow in both directions of a pair.
struct FlowPair {
  FlowField forward;   // first -> second
  FlowField backward;  // second -> first
};

class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual FlowPair flow(const FramePair& pair) = 0;
};

class MaskRefiner {
 public:
  virtual ~MaskRefiner() = default;
  virtual DynamicMask refine(const DynamicMask& mask, const Image& image) const = 0;
};

class IdentityRefiner : public MaskRefiner {
 public:
  DynamicMask refine(const DynamicMask& mask, const Image&) const override { return mask; }
};

// Grows every connected component of the mask over 4-neighbours whose
// intensity differs by at most `tolerance`, then applies a 3x3 closing.
class RegionGrowingRefiner : public MaskRefiner {
 public:
  explicit RegionGrowingRefiner(double tolerance = 0.05) : tolerance_(tolerance) {}
  DynamicMask refine(const DynamicMask& mask, const Image& image) const override;

 private:
  double tolerance_;
};

// 3x3 morphological closing; pixels outside the image count as set during
// erosion so borders are not eaten away.
DynamicMask close3x3(const DynamicMask& mask);

// Pixel displacement a static point of `points` undergoes when seen from
// `source` and then from `target` (both camera-to-external estimates).
FlowField cross_projection_flow(const Pointmap& points, const CameraEstimate& source,
                                const CameraEstimate& target);

struct EgoFlow {
  FlowField forward;   // E12
  FlowField backward;  // E21
};

// Ego-motion flow of a pair of pointmaps sharing one coordinate frame.
// Cameras are recovered with pose_estimate unless supplied.
EgoFlow ego_flow(const Pointmap& p1, const Pointmap& p2, const PoseOptions& options = {});
EgoFlow ego_flow(const Pointmap& p1, const CameraEstimate& c1, const Pointmap& p2,
                 const CameraEstimate& c2);

struct CoarseMask {
  Grid<double> residual;  // mean |F - E| in pixels
  Mask valid;
  Grid<std::uint8_t> contributions;  // pairs that contributed per pixel
};

// Per frame, the mean over every pair containing it of |F - E| in the
// matching direction. Invalid pixels of either field do not contribute.
std::vector<CoarseMask> residual_mask(int sequence_length, const std::vector<FramePair>& pairs,
                                      const std::vector<FlowPair>& observed,
                                      const std::vector<EgoFlow>& ego);

DynamicMask binarize(const CoarseMask& mask, double threshold);
// Threshold at the given percentile (0-100) of valid residuals, never below
// `floor` pixels.
DynamicMask binarize_percentile(const CoarseMask& mask, double percentile, double floor);

// refiner(mask, image) OR mask.
DynamicMask refine(const DynamicMask& mask, const Image& image, const MaskRefiner& refiner);

struct PredictOptions {
  double threshold = 1.5;  // pixels
  std::optional<double> percentile;  // adaptive threshold when set
  PoseOptions pose;
};

struct PredictResult {
  std::vector<DynamicMask> masks;
  std::vector<DynamicMask> binarized;
  std::vector<CoarseMask> coarse;
  std::vector<CameraEstimate> cameras;
};

// Full flow-predictor chain on one sensor's sequence. `cameras`, when
// given, replaces pose estimation (ground-truth camera mode or a cache).
PredictResult predict(const std::vector<Pointmap>& pointmaps, const std::vector<Image>& images,
                      FlowProvider& provider, const MaskRefiner& refiner,
                      const PredictOptions& options = {},
                      const std::vector<CameraEstimate>* cameras = nullptr);

double iou(const DynamicMask& a, const DynamicMask& b);
std::size_t count_set(const DynamicMask& mask);

}  // namespace stream4d::flow
