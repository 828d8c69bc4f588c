#include "stream4d/flow/scene_flow.hpp"

namespace stream4d::flow {

FlowPair SceneFlowProvider::flow(const FramePair& pair) {
  const int a = first_index_ + pair.first;
  const int b = first_index_ + pair.second;
  return {synth::gt_flow(scene_, a, b, sensor_), synth::gt_flow(scene_, b, a, sensor_)};
}

}  // namespace stream4d::flow
