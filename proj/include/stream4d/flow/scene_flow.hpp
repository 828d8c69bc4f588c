#pragma once

#include "stream4d/flow/flow_predictor.hpp"
#include "stream4d/synth/scene.hpp"

namespace stream4d::flow {

// Exact flow from the synthetic scene for one sensor; pair indices are
// timestamp indices offset by `first_index`.
class SceneFlowProvider : public FlowProvider {
 public:
  SceneFlowProvider(const synth::SceneSpec& scene, int sensor, int first_index = 0)
      : scene_(scene), sensor_(sensor), first_index_(first_index) {}

  FlowPair flow(const FramePair& pair) override;

 private:
  const synth::SceneSpec& scene_;
  int sensor_;
  int first_index_;
};

}  // namespace stream4d::flow
