#pragma once

#include "stream4d/align/aligner.hpp"
#include "stream4d/flow/flow_predictor.hpp"
#include "stream4d/memory/memory_pool.hpp"
#include "stream4d/pipeline/config.hpp"
#include "stream4d/pipeline/manifest.hpp"
#include "stream4d/synth/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stream4d::pipeline {

// Frame inputs loaded from a manifest, timestamp-major.
struct Dataset {
  io::Manifest manifest;
  std::vector<Image> images;
  std::vector<std::optional<Pointmap>> gt_world;  // from GT depth when listed
  std::vector<std::optional<DynamicMask>> gt_masks;

  std::size_t index(int t_index, int sensor_index) const {
    return static_cast<std::size_t>(t_index) * manifest.sensors.size() + sensor_index;
  }
};

Dataset load_dataset(const io::Manifest& manifest);

struct FrameOutput {
  int t_index = 0;
  int sensor_index = 0;
  Pointmap sequence_points;
  ConfidenceMap confidence;
  Pointmap world_points;
  DynamicMask mask;
  flow::CoarseMask coarse;
  std::uint64_t attention_ops = 0;
  std::uint64_t op_bound = 0;  // capacity bound on attention_ops
  std::size_t attended_entries = 0;
  std::vector<int> attended_sensors;  // sensor ids
  memory::InsertStats insert_stats;
  std::size_t points_kept = 0;
  double seconds = 0.0;
};

struct Reconstruction {
  memory::Stage stage = memory::Stage::kTemporal;
  memory::Adjacency adjacency;      // sensor indices
  std::vector<FrameOutput> frames;  // timestamp-major
  std::vector<std::vector<align::ScenePoint>> clouds;  // per timestamp, gamma-filtered
  std::vector<memory::SensorPool> pools;
  std::size_t peak_pool_entries = 0;
  std::vector<double> cumulative_seconds;  // wall clock at the end of each timestamp
  double total_seconds = 0.0;
};

// Streams every frame through the memory pool, then per sensor runs the flow
// predictor, aligns to world and assembles gamma-filtered clouds. Failures
// are rethrown as FrameError carrying (timestamp index, sensor id).
Reconstruction reconstruct(const Dataset& data, const io::RunConfig& config);

// Deterministic description of a reconstruction (no timing fields).
nlohmann::json reconstruction_summary(const Dataset& data, const io::RunConfig& config,
                                      const Reconstruction& rec);
// FNV-1a over clouds and masks.
std::string output_checksum(const Reconstruction& rec);

std::string frame_stem(int t_index, int sensor_id);

// Every command returns a JSON report; wall-clock values live under "timing".
nlohmann::json cmd_synth(const synth::SceneSpec& scene, const std::filesystem::path& out);
nlohmann::json cmd_reconstruct(const std::filesystem::path& manifest, const io::RunConfig& config,
                               const std::filesystem::path& out);
nlohmann::json cmd_masks(const std::filesystem::path& manifest, const io::RunConfig& config,
                         const std::filesystem::path& out);
// Reads pointmaps/ and confidence/ written by cmd_reconstruct.
nlohmann::json cmd_eval(const std::filesystem::path& pred_dir,
                        const std::filesystem::path& manifest, double gamma);
nlohmann::json cmd_bench(const std::filesystem::path& manifest, const io::RunConfig& config,
                         int repeats);

// Drops the "timing" object.
nlohmann::json without_timing(nlohmann::json report);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace stream4d::pipeline
