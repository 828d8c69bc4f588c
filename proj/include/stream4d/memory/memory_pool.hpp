#pragma once

#include "stream4d/geometry/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace stream4d::memory {

// One token per row; columns span the feature dimension s.
using TokenGrid = Eigen::MatrixXd;

struct MemoryEntry {
  Eigen::VectorXd key;
  Eigen::VectorXd value;
  double timestamp = 0.0;
  int sensor = 0;
  double accumulated_attention = 0.0;
};

enum class GateScope {
  kAllKeys,       // compare new keys against working and long-term keys
  kLongTermOnly,  // compare against long-term keys only
};

struct PoolConfig {
  int working_frames = 5;              // W
  std::size_t long_term_capacity = 4096;  // N_max
  double similarity_threshold = 0.95;  // tau_sim
  GateScope gate_scope = GateScope::kAllKeys;
};

struct InsertStats {
  std::size_t kept = 0;
  std::size_t discarded = 0;
  std::size_t migrated = 0;
  std::size_t pruned = 0;
};

// Per-sensor store. Working memory holds the entries of the W most recent
// frames; older frames migrate to the bounded long-term store, which is pruned
// by accumulated attention. Both stores are kept in chronological order.
class SensorPool {
 public:
  SensorPool(int sensor, int dim, PoolConfig config = {});

  int sensor() const { return sensor_; }
  int dim() const { return dim_; }
  const PoolConfig& config() const { return config_; }

  // Entries must all carry timestamp `t`, and `t` must not precede anything
  // already stored (OutOfOrderTimestamp). Entries whose key has cosine
  // similarity >= tau_sim with a stored key are discarded.
  InsertStats insert(std::vector<MemoryEntry> entries, double t);

  // Drops the lowest-attention long-term entries (older first on ties) until
  // the store fits its capacity. Returns the number removed.
  std::size_t prune();

  const std::deque<MemoryEntry>& working() const { return working_; }
  const std::vector<MemoryEntry>& long_term() const { return long_term_; }
  std::size_t size() const { return working_.size() + long_term_.size(); }
  int working_frame_count() const;
  std::optional<double> latest_timestamp() const;

  // Chronological (long-term first, then working) mutable views.
  std::vector<MemoryEntry*> entries_before(double t);
  std::vector<MemoryEntry*> entries_at(const std::vector<double>& timestamps);
  std::vector<double> stored_timestamps() const;

  std::size_t total_pruned() const { return total_pruned_; }
  std::size_t total_discarded() const { return total_discarded_; }

  // Throws std::logic_error if a capacity or ordering invariant is broken.
  void check_invariants() const;

  // Used by snapshot loading. A long-term store above capacity is pruned.
  static SensorPool restore(int sensor, int dim, PoolConfig config,
                            std::vector<MemoryEntry> working, std::vector<MemoryEntry> long_term);

 private:
  int sensor_;
  int dim_;
  PoolConfig config_;
  std::deque<MemoryEntry> working_;
  std::vector<MemoryEntry> long_term_;
  std::size_t total_pruned_ = 0;
  std::size_t total_discarded_ = 0;
};

struct AttentionResult {
  TokenGrid output;            // softmax(q K^T / sqrt(s)) V + q
  Eigen::VectorXd mass;        // per-entry attention averaged over queries
};

// Pure memory read over stacked keys/values (one entry per row).
AttentionResult dense_attention(const TokenGrid& queries, const TokenGrid& keys,
                                const TokenGrid& values);

// Memory read over pool entries. Each entry's accumulated attention grows by
// its mean attention over the query tokens. Empty `entries` returns queries.
// `ops`, when given, is incremented by the number of query-key products.
TokenGrid attend(const TokenGrid& queries, std::span<MemoryEntry* const> entries,
                 std::uint64_t* ops = nullptr);

enum class Stage { kTemporal, kSpatial };
const char* to_string(Stage stage);

// adjacency[c] lists the sensors whose frusta overlap sensor c's (excluding c).
using Adjacency = std::vector<std::vector<int>>;

struct CameraFrustum {
  Intrinsics intrinsics;
  SE3Pose rig;  // camera-to-ego
};

// Static field-of-view overlap from rig geometry: frusta are truncated at
// `range` meters and tested by sampling.
Adjacency fov_adjacency(const std::vector<CameraFrustum>& cameras, double range = 20.0);

struct SelectOptions {
  int related_timestamps = 4;  // k
  int similar_frames = 5;      // spatial-stage working set size
};

struct Selection {
  std::vector<MemoryEntry*> entries;
  std::vector<int> sensors;  // sensors that contributed at least one entry
};

// Entries a frame at time t of `sensor` may read. Only entries strictly older
// than t are eligible. Temporal: the sensor's own pool. Spatial: entries of
// adjacent sensors from the k most recent earlier timestamps, plus the
// sensor's own frames most similar to `queries` (mean key cosine similarity).
Selection select_related(std::vector<SensorPool>& pools, double t, int sensor, Stage stage,
                         const Adjacency& adjacency, const TokenGrid* queries = nullptr,
                         const SelectOptions& options = {});

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace stream4d::memory
