#pragma once

#include "stream4d/geometry/types.hpp"
#include "stream4d/memory/memory_pool.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace stream4d::io {

struct SensorInfo {
  int id = 0;
  Intrinsics intrinsics;
  SE3Pose rig;  // camera-to-ego
};

// Paths are absolute once loaded.
struct FrameRecord {
  int t_index = 0;
  int sensor = 0;  // sensor id
  std::filesystem::path image;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> dynamic_mask;
  SE3Pose pose;  // camera-to-world
};

// Observed flow between timestamps t and t + 1 of one sensor.
struct FlowRecord {
  int sensor = 0;
  int t_index = 0;
  std::filesystem::path forward;
  std::filesystem::path backward;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<SensorInfo> sensors;
  std::vector<double> timestamps;
  std::vector<FrameRecord> frames;  // timestamp-major, sensors in list order
  std::vector<FlowRecord> flows;
  memory::Stage stage = memory::Stage::kTemporal;

  int num_sensors() const { return static_cast<int>(sensors.size()); }
  int num_timestamps() const { return static_cast<int>(timestamps.size()); }
  // Position of a sensor id in `sensors`; MalformedManifest if unknown.
  int sensor_index(int id) const;
  const FrameRecord& frame(int t_index, int sensor_index) const;
  // Null when the manifest lists no flow for the pair.
  const FlowRecord* flow(int sensor_index, int t_index) const;
};

// Relative paths resolve against "root", which itself resolves against the
// manifest's directory. Throws MalformedManifest naming the manifest or the
// missing path.
Manifest load_manifest(const std::filesystem::path& path);
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base,
                            const std::string& name);
// Paths are written relative to `root`.
nlohmann::json manifest_to_json(const Manifest& manifest);

memory::Stage parse_stage(const std::string& text);

}  // namespace stream4d::io
