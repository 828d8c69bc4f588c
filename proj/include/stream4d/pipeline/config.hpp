#pragma once

#include "stream4d/memory/memory_pool.hpp"
#include "stream4d/pipeline/ply.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace stream4d::io {

enum class BackboneKind { kOracle, kToy };
// kFiles reads the flow listed in the manifest; kEgo uses the estimated ego
// flow itself as observation, which yields empty masks (a static baseline).
enum class FlowSource { kFiles, kEgo };
enum class RefinerKind { kRegionGrowing, kNone };
// kEstimated recovers cameras from the predicted pointmaps; kGroundTruth
// uses the manifest poses relative to the sequence frame.
enum class CameraMode { kEstimated, kGroundTruth };

struct RunConfig {
  memory::PoolConfig pool;
  memory::SelectOptions select;
  double flow_threshold = 1.5;           // tau, pixels
  std::optional<double> flow_percentile;  // adaptive threshold
  double confidence_threshold = 1.5;     // gamma
  double alpha = 0.5;
  BackboneKind backbone = BackboneKind::kOracle;
  int feature_dim = 64;
  int patch = 16;
  double oracle_confidence = 2.0;
  FlowSource flow_source = FlowSource::kFiles;
  RefinerKind refiner = RefinerKind::kRegionGrowing;
  double refiner_tolerance = 0.05;
  CameraMode camera_mode = CameraMode::kEstimated;
  bool ransac = false;
  std::optional<memory::Stage> stage;  // overrides the manifest
  PlyFormat ply_format = PlyFormat::kBinaryLittleEndian;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Unknown keys are rejected; absent keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace stream4d::io
