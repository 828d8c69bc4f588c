#include "stream4d/memory/streaming.hpp"

#include "stream4d/errors.hpp"

namespace stream4d::memory {

StepResult step_read(const FrameInput& frame, StreamState& state, std::vector<SensorPool>& pools,
                     const Backbone& backbone, const StreamContext& context) {
  if (context.stage == Stage::kSpatial && !context.adjacency) {
    throw ConfigError("spatial stage needs a sensor adjacency");
  }
  static const Adjacency kNoAdjacency;
  const Adjacency& adjacency = context.adjacency ? *context.adjacency : kNoAdjacency;

  StepResult result;
  result.timestamp = frame.timestamp;
  result.sensor = frame.sensor;

  const TokenGrid encoded = backbone.encode(frame);
  const TokenGrid& query = state.query ? *state.query : encoded;
  if (query.rows() != encoded.rows() || query.cols() != encoded.cols()) {
    throw DimensionMismatch("query shape differs from encoded feature shape");
  }
  Selection selection = select_related(pools, frame.timestamp, frame.sensor, context.stage,
                                       adjacency, &query, context.select);
  result.attended_entries = selection.entries.size();
  result.attended_sensors = selection.sensors;
  const TokenGrid updated = attend(query, selection.entries, &result.attention_ops);

  const DecodedPair decoded =
      backbone.decode(updated, state.reference ? *state.reference : encoded);
  HeadOutput head = backbone.point_head(decoded.reference, frame);
  const MemoryKV kv = backbone.memory_encode(decoded.reference, encoded, head.points);
  if (kv.keys.rows() != kv.values.rows()) throw DimensionMismatch("key/value count mismatch");

  result.entries.reserve(kv.keys.rows());
  for (Eigen::Index r = 0; r < kv.keys.rows(); ++r) {
    MemoryEntry e;
    e.key = kv.keys.row(r).transpose();
    e.value = kv.values.row(r).transpose();
    e.timestamp = frame.timestamp;
    e.sensor = frame.sensor;
    result.entries.push_back(std::move(e));
  }
  result.points = std::move(head.points);
  result.confidence = std::move(head.confidence);

  state.query = backbone.query_head(decoded.target);
  state.reference = encoded;
  return result;
}

void commit(std::vector<SensorPool>& pools, StepResult& result) {
  result.insert_stats = pools.at(result.sensor).insert(result.entries, result.timestamp);
}

StepResult step(const FrameInput& frame, StreamState& state, std::vector<SensorPool>& pools,
                const Backbone& backbone, const StreamContext& context) {
  StepResult result = step_read(frame, state, pools, backbone, context);
  commit(pools, result);
  return result;
}

}  // namespace stream4d::memory
