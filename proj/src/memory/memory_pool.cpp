#include "stream4d/memory/memory_pool.hpp"

#include "stream4d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace stream4d::memory {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

SensorPool::SensorPool(int sensor, int dim, PoolConfig config)
    : sensor_(sensor), dim_(dim), config_(config) {
  if (dim <= 0) throw ConfigError("feature dimension must be positive");
  if (config.working_frames < 1) throw ConfigError("working memory needs at least one frame");
  if (config.long_term_capacity < 1) throw ConfigError("long-term capacity must be positive");
  if (!(config.similarity_threshold > 0.0)) {
    throw ConfigError("similarity threshold must be positive");
  }
}

int SensorPool::working_frame_count() const {
  int frames = 0;
  for (std::size_t i = 0; i < working_.size(); ++i) {
    if (i == 0 || working_[i].timestamp != working_[i - 1].timestamp) ++frames;
  }
  return frames;
}

std::optional<double> SensorPool::latest_timestamp() const {
  if (!working_.empty()) return working_.back().timestamp;
  if (!long_term_.empty()) return long_term_.back().timestamp;
  return std::nullopt;
}

InsertStats SensorPool::insert(std::vector<MemoryEntry> entries, double t) {
  InsertStats stats;
  if (const auto latest = latest_timestamp(); latest && t < *latest) {
    throw OutOfOrderTimestamp("insert at t=" + std::to_string(t) + " precedes stored t=" +
                              std::to_string(*latest));
  }
  for (const auto& e : entries) {
    if (e.key.size() != dim_ || e.value.size() != dim_) {
      throw DimensionMismatch("entry dimension does not match pool dimension " +
                              std::to_string(dim_));
    }
    if (e.timestamp != t) {
      throw OutOfOrderTimestamp("entry timestamp differs from insert timestamp");
    }
  }

  // Unit-normalized stored keys, one per row.
  std::vector<const MemoryEntry*> gate;
  if (config_.gate_scope == GateScope::kAllKeys) {
    for (const auto& e : working_) gate.push_back(&e);
  }
  for (const auto& e : long_term_) gate.push_back(&e);
  Eigen::MatrixXd stored(gate.size(), dim_);
  for (std::size_t i = 0; i < gate.size(); ++i) {
    const double n = gate[i]->key.norm();
    stored.row(i) = n > 0.0 ? Eigen::RowVectorXd(gate[i]->key.transpose() / n)
                            : Eigen::RowVectorXd::Zero(dim_);
  }

  for (auto& e : entries) {
    bool duplicate = false;
    if (!gate.empty()) {
      const double n = e.key.norm();
      if (n > 0.0) {
        const double best = (stored * (e.key / n)).maxCoeff();
        duplicate = best >= config_.similarity_threshold;
      }
    }
    if (duplicate) {
      ++stats.discarded;
      continue;
    }
    e.sensor = sensor_;
    e.accumulated_attention = 0.0;
    working_.push_back(std::move(e));
    ++stats.kept;
  }
  total_discarded_ += stats.discarded;

  while (working_frame_count() > config_.working_frames) {
    const double oldest = working_.front().timestamp;
    while (!working_.empty() && working_.front().timestamp == oldest) {
      long_term_.push_back(std::move(working_.front()));
      working_.pop_front();
      ++stats.migrated;
    }
  }
  stats.pruned = prune();
  return stats;
}

std::size_t SensorPool::prune() {
  const std::size_t cap = config_.long_term_capacity;
  if (long_term_.size() <= cap) return 0;
  const std::size_t excess = long_term_.size() - cap;
  std::vector<std::size_t> order(long_term_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = long_term_[a];
    const auto& eb = long_term_[b];
    if (ea.accumulated_attention != eb.accumulated_attention) {
      return ea.accumulated_attention < eb.accumulated_attention;
    }
    return ea.timestamp < eb.timestamp;
  });
  std::vector<char> drop(long_term_.size(), 0);
  for (std::size_t i = 0; i < excess; ++i) drop[order[i]] = 1;
  std::vector<MemoryEntry> kept;
  kept.reserve(cap);
  for (std::size_t i = 0; i < long_term_.size(); ++i) {
    if (!drop[i]) kept.push_back(std::move(long_term_[i]));
  }
  long_term_ = std::move(kept);
  total_pruned_ += excess;
  return excess;
}

std::vector<MemoryEntry*> SensorPool::entries_before(double t) {
  std::vector<MemoryEntry*> out;
  for (auto& e : long_term_) {
    if (e.timestamp < t) out.push_back(&e);
  }
  for (auto& e : working_) {
    if (e.timestamp < t) out.push_back(&e);
  }
  return out;
}

std::vector<MemoryEntry*> SensorPool::entries_at(const std::vector<double>& timestamps) {
  std::vector<MemoryEntry*> out;
  auto wanted = [&](double ts) {
    return std::find(timestamps.begin(), timestamps.end(), ts) != timestamps.end();
  };
  for (auto& e : long_term_) {
    if (wanted(e.timestamp)) out.push_back(&e);
  }
  for (auto& e : working_) {
    if (wanted(e.timestamp)) out.push_back(&e);
  }
  return out;
}

std::vector<double> SensorPool::stored_timestamps() const {
  std::vector<double> ts;
  for (const auto& e : long_term_) {
    if (ts.empty() || ts.back() != e.timestamp) ts.push_back(e.timestamp);
  }
  for (const auto& e : working_) {
    if (ts.empty() || ts.back() != e.timestamp) ts.push_back(e.timestamp);
  }
  return ts;
}

void SensorPool::check_invariants() const {
  if (long_term_.size() > config_.long_term_capacity) {
    throw std::logic_error("long-term memory exceeds capacity");
  }
  if (working_frame_count() > config_.working_frames) {
    throw std::logic_error("working memory spans too many frames");
  }
  for (std::size_t i = 1; i < long_term_.size(); ++i) {
    if (long_term_[i].timestamp < long_term_[i - 1].timestamp) {
      throw std::logic_error("long-term memory out of chronological order");
    }
  }
  for (std::size_t i = 1; i < working_.size(); ++i) {
    if (working_[i].timestamp < working_[i - 1].timestamp) {
      throw std::logic_error("working memory out of chronological order");
    }
  }
  if (!long_term_.empty() && !working_.empty() &&
      long_term_.back().timestamp > working_.front().timestamp) {
    throw std::logic_error("long-term memory holds entries newer than working memory");
  }
  auto check_attention = [](const MemoryEntry& e) {
    if (!(e.accumulated_attention >= 0.0)) {
      throw std::logic_error("negative accumulated attention");
    }
  };
  for (const auto& e : long_term_) check_attention(e);
  for (const auto& e : working_) check_attention(e);
}

SensorPool SensorPool::restore(int sensor, int dim, PoolConfig config,
                               std::vector<MemoryEntry> working,
                               std::vector<MemoryEntry> long_term) {
  SensorPool pool(sensor, dim, config);
  pool.working_.assign(std::make_move_iterator(working.begin()),
                       std::make_move_iterator(working.end()));
  pool.long_term_ = std::move(long_term);
  pool.prune();
  pool.check_invariants();
  return pool;
}

AttentionResult dense_attention(const TokenGrid& queries, const TokenGrid& keys,
                                const TokenGrid& values) {
  if (keys.rows() != values.rows()) throw DimensionMismatch("keys and values differ in count");
  if (keys.rows() > 0 && (keys.cols() != queries.cols() || values.cols() != queries.cols())) {
    throw DimensionMismatch("query, key and value dimensions differ");
  }
  AttentionResult out;
  if (keys.rows() == 0) {
    out.output = queries;
    out.mass = Eigen::VectorXd::Zero(0);
    return out;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  Eigen::MatrixXd weights = (queries * keys.transpose()) * scale;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    const double m = weights.row(r).maxCoeff();
    weights.row(r) = (weights.row(r).array() - m).exp();
    weights.row(r) /= weights.row(r).sum();
  }
  out.output = weights * values + queries;
  out.mass = weights.colwise().mean().transpose();
  return out;
}

TokenGrid attend(const TokenGrid& queries, std::span<MemoryEntry* const> entries,
                 std::uint64_t* ops) {
  if (entries.empty()) return queries;
  const Eigen::Index s = queries.cols();
  TokenGrid keys(entries.size(), s);
  TokenGrid values(entries.size(), s);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i]->key.size() != s || entries[i]->value.size() != s) {
      throw DimensionMismatch("memory entry dimension " + std::to_string(entries[i]->key.size()) +
                              " does not match query dimension " + std::to_string(s));
    }
    keys.row(i) = entries[i]->key.transpose();
    values.row(i) = entries[i]->value.transpose();
  }
  AttentionResult result = dense_attention(queries, keys, values);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i]->accumulated_attention += result.mass(i);
  }
  if (ops) *ops += static_cast<std::uint64_t>(queries.rows()) * entries.size();
  return std::move(result.output);
}

const char* to_string(Stage stage) {
  return stage == Stage::kTemporal ? "temporal" : "spatial";
}

Adjacency fov_adjacency(const std::vector<CameraFrustum>& cameras, double range) {
  const std::size_t n = cameras.size();
  std::vector<std::vector<char>> overlap(n, std::vector<char>(n, 0));
  constexpr int kSamples = 9;
  const double depths[] = {0.25, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.5, 15.0, 17.5, 20.0};
  for (std::size_t a = 0; a < n; ++a) {
    const Intrinsics& ka = cameras[a].intrinsics;
    for (int iu = 0; iu < kSamples; ++iu) {
      for (int iv = 0; iv < kSamples; ++iv) {
        const double u = ka.width * (iu + 0.5) / kSamples;
        const double v = ka.height * (iv + 0.5) / kSamples;
        for (double depth : depths) {
          if (depth > range) continue;
          const Eigen::Vector3d cam((u - ka.cx) * depth / ka.fx, (v - ka.cy) * depth / ka.fy,
                                    depth);
          const Eigen::Vector3d ego = cameras[a].rig.apply(cam);
          for (std::size_t b = 0; b < n; ++b) {
            if (b == a || overlap[a][b]) continue;
            const Intrinsics& kb = cameras[b].intrinsics;
            const Eigen::Vector3d y = cameras[b].rig.inverse().apply(ego);
            if (!(y.z() > 0.0) || y.norm() > range) continue;
            const double ub = kb.fx * y.x() / y.z() + kb.cx;
            const double vb = kb.fy * y.y() / y.z() + kb.cy;
            if (ub >= 0.0 && ub < kb.width && vb >= 0.0 && vb < kb.height) overlap[a][b] = 1;
          }
        }
      }
    }
  }
  Adjacency adj(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && (overlap[a][b] || overlap[b][a])) adj[a].push_back(static_cast<int>(b));
    }
  }
  return adj;
}

Selection select_related(std::vector<SensorPool>& pools, double t, int sensor, Stage stage,
                         const Adjacency& adjacency, const TokenGrid* queries,
                         const SelectOptions& options) {
  Selection sel;
  SensorPool& own = pools.at(sensor);
  auto note_sensor = [&](int s, std::size_t before) {
    if (sel.entries.size() > before) sel.sensors.push_back(s);
  };

  if (stage == Stage::kTemporal) {
    sel.entries = own.entries_before(t);
    note_sensor(sensor, 0);
    return sel;
  }

  // k most recent distinct timestamps before t among adjacent pools.
  const std::vector<int>& neighbors = adjacency.at(sensor);
  std::set<double> timeline;
  for (int nb : neighbors) {
    for (double ts : pools.at(nb).stored_timestamps()) {
      if (ts < t) timeline.insert(ts);
    }
  }
  std::vector<double> recent(timeline.rbegin(), timeline.rend());
  if (recent.size() > static_cast<std::size_t>(options.related_timestamps)) {
    recent.resize(options.related_timestamps);
  }
  std::vector<int> ordered = neighbors;
  std::sort(ordered.begin(), ordered.end());
  for (int nb : ordered) {
    const std::size_t before = sel.entries.size();
    for (MemoryEntry* e : pools.at(nb).entries_at(recent)) sel.entries.push_back(e);
    note_sensor(nb, before);
  }

  // Own frames ranked by mean cosine similarity between queries and keys.
  std::vector<double> own_frames;
  for (double ts : own.stored_timestamps()) {
    if (ts < t) own_frames.push_back(ts);
  }
  if (own_frames.size() > static_cast<std::size_t>(options.similar_frames)) {
    std::vector<std::pair<double, double>> scored;  // (score, timestamp)
    Eigen::VectorXd mean_query;
    if (queries && queries->rows() > 0) {
      mean_query = Eigen::VectorXd::Zero(queries->cols());
      for (Eigen::Index r = 0; r < queries->rows(); ++r) {
        const double n = queries->row(r).norm();
        if (n > 0.0) mean_query += queries->row(r).transpose() / n;
      }
      mean_query /= static_cast<double>(queries->rows());
    }
    std::map<double, Eigen::VectorXd> key_sums;
    std::map<double, int> key_counts;
    for (MemoryEntry* e : own.entries_before(t)) {
      auto [it, inserted] = key_sums.try_emplace(e->timestamp, Eigen::VectorXd::Zero(own.dim()));
      const double n = e->key.norm();
      if (n > 0.0) it->second += e->key / n;
      ++key_counts[e->timestamp];
    }
    for (double ts : own_frames) {
      double score = ts;  // without queries, prefer recency
      if (mean_query.size() > 0) {
        score = mean_query.dot(key_sums[ts] / key_counts[ts]);
      }
      scored.emplace_back(score, ts);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second > b.second;
    });
    own_frames.clear();
    for (int i = 0; i < options.similar_frames; ++i) own_frames.push_back(scored[i].second);
  }
  const std::size_t before = sel.entries.size();
  for (MemoryEntry* e : own.entries_at(own_frames)) sel.entries.push_back(e);
  note_sensor(sensor, before);
  return sel;
}

}  // namespace stream4d::memory
