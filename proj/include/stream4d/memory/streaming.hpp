#pragma once

#include "stream4d/memory/backbone.hpp"
#include "stream4d/memory/memory_pool.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace stream4d::memory {

// Per-sensor recurrent state carried between frames.
struct StreamState {
  std::optional<TokenGrid> query;      // from the previous target-decoded feature
  std::optional<TokenGrid> reference;  // previous encoded feature
};

struct StreamContext {
  Stage stage = Stage::kTemporal;
  const Adjacency* adjacency = nullptr;  // required for the spatial stage
  SelectOptions select;
};

struct StepResult {
  double timestamp = 0.0;
  int sensor = 0;
  Pointmap points;
  ConfidenceMap confidence;
  std::vector<MemoryEntry> entries;  // emitted; commit() inserts a copy
  std::uint64_t attention_ops = 0;   // query-key products of this frame
  std::size_t attended_entries = 0;
  std::vector<int> attended_sensors;
  InsertStats insert_stats;
};

// Read phase: encode, memory read, decode, heads, memory encode. Only the
// accumulated attention of read entries is modified in the pools.
StepResult step_read(const FrameInput& frame, StreamState& state, std::vector<SensorPool>& pools,
                     const Backbone& backbone, const StreamContext& context);

// Write phase: inserts the emitted entries into the frame's own pool.
void commit(std::vector<SensorPool>& pools, StepResult& result);

// step_read followed by commit.
StepResult step(const FrameInput& frame, StreamState& state, std::vector<SensorPool>& pools,
                const Backbone& backbone, const StreamContext& context);

// Binary pool snapshot, little-endian:
//   "D4RP" u32 version=1 i32 sensor u32 dim u32 working_frames
//   u64 capacity f64 similarity_threshold u32 gate_scope
//   u64 n_working u64 n_long_term
//   then per entry (working first, then long-term):
//   f64 timestamp i32 sensor f64 accumulated_attention f64[dim] key f64[dim] value
void save_snapshot(std::ostream& out, const SensorPool& pool);
SensorPool load_snapshot(std::istream& in, const std::string& name = "<stream>");

}  // namespace stream4d::memory
