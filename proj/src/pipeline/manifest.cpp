#include "stream4d/pipeline/manifest.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/synth/scene_json.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace stream4d::io {
namespace fs = std::filesystem;
using nlohmann::json;

memory::Stage parse_stage(const std::string& text) {
  if (text == "temporal") return memory::Stage::kTemporal;
  if (text == "spatial") return memory::Stage::kSpatial;
  throw ConfigError("stage must be 'temporal' or 'spatial', got '" + text + "'");
}

int Manifest::sensor_index(int id) const {
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (sensors[i].id == id) return static_cast<int>(i);
  }
  throw MalformedManifest("unknown sensor id " + std::to_string(id));
}

const FrameRecord& Manifest::frame(int t_index, int sensor_index) const {
  const std::size_t i = static_cast<std::size_t>(t_index) * sensors.size() + sensor_index;
  if (t_index < 0 || sensor_index < 0 || sensor_index >= num_sensors() || i >= frames.size()) {
    throw MalformedManifest("no frame for t=" + std::to_string(t_index) +
                            " sensor index " + std::to_string(sensor_index));
  }
  return frames[i];
}

const FlowRecord* Manifest::flow(int sensor_index, int t_index) const {
  const int id = sensors.at(sensor_index).id;
  for (const auto& f : flows) {
    if (f.sensor == id && f.t_index == t_index) return &f;
  }
  return nullptr;
}

namespace {

fs::path existing(const fs::path& root, const json& value, const std::string& name) {
  if (!value.is_string()) throw MalformedManifest(name + ": path entries must be strings");
  const fs::path p = root / value.get<std::string>();
  if (!fs::exists(p)) throw MalformedManifest(name + ": missing file " + p.string());
  return p;
}

std::string path_in_root(const fs::path& p, const fs::path& root) {
  return p.lexically_relative(root).generic_string();
}

}  // namespace

Manifest manifest_from_json(const json& j, const fs::path& base, const std::string& name) {
  Manifest m;
  try {
    m.root = (base / j.value("root", std::string("."))).lexically_normal();
    m.stage = parse_stage(j.value("stage", std::string("temporal")));
    m.timestamps = j.at("timestamps").get<std::vector<double>>();
    for (const auto& s : j.at("sensors")) {
      SensorInfo info;
      info.id = s.at("id").get<int>();
      info.intrinsics = s.at("intrinsics").get<Intrinsics>();
      info.rig = s.contains("rig") ? s.at("rig").get<SE3Pose>() : SE3Pose::identity();
      m.sensors.push_back(info);
    }
  } catch (const MalformedManifest&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedManifest(name + ": " + e.what());
  }
  if (m.timestamps.empty()) throw MalformedManifest(name + ": no timestamps");
  for (std::size_t i = 1; i < m.timestamps.size(); ++i) {
    if (!(m.timestamps[i] > m.timestamps[i - 1])) {
      throw MalformedManifest(name + ": timestamps are not strictly increasing at index " +
                              std::to_string(i));
    }
  }
  if (m.sensors.empty()) throw MalformedManifest(name + ": no sensors");
  std::set<int> ids;
  for (const auto& s : m.sensors) {
    if (!ids.insert(s.id).second) {
      throw MalformedManifest(name + ": duplicate sensor id " + std::to_string(s.id));
    }
  }

  const std::size_t expected = m.timestamps.size() * m.sensors.size();
  std::vector<std::optional<FrameRecord>> slots(expected);
  try {
    for (const auto& f : j.at("frames")) {
      FrameRecord r;
      r.t_index = f.at("t").get<int>();
      r.sensor = f.at("sensor").get<int>();
      if (r.t_index < 0 || r.t_index >= m.num_timestamps()) {
        throw MalformedManifest(name + ": frame timestamp index " + std::to_string(r.t_index) +
                                " out of range");
      }
      const int c = m.sensor_index(r.sensor);
      r.image = existing(m.root, f.at("image"), name);
      if (f.contains("depth")) r.depth = existing(m.root, f.at("depth"), name);
      if (f.contains("dynamic_mask")) r.dynamic_mask = existing(m.root, f.at("dynamic_mask"), name);
      r.pose = f.at("pose").get<SE3Pose>();
      auto& slot = slots[static_cast<std::size_t>(r.t_index) * m.sensors.size() + c];
      if (slot) {
        throw MalformedManifest(name + ": duplicate frame t=" + std::to_string(r.t_index) +
                                " sensor=" + std::to_string(r.sensor));
      }
      slot = r;
    }
    if (j.contains("flows")) {
      for (const auto& f : j.at("flows")) {
        FlowRecord r;
        r.sensor = f.at("sensor").get<int>();
        r.t_index = f.at("t").get<int>();
        m.sensor_index(r.sensor);
        if (r.t_index < 0 || r.t_index + 1 >= m.num_timestamps()) {
          throw MalformedManifest(name + ": flow timestamp index out of range");
        }
        r.forward = existing(m.root, f.at("forward"), name);
        r.backward = existing(m.root, f.at("backward"), name);
        m.flows.push_back(r);
      }
    }
  } catch (const MalformedManifest&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedManifest(name + ": " + e.what());
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      throw MalformedManifest(name + ": no frame for t=" + std::to_string(i / m.sensors.size()) +
                              " sensor=" + std::to_string(m.sensors[i % m.sensors.size()].id));
    }
    m.frames.push_back(std::move(*slots[i]));
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  const std::string name = path.string();
  std::ifstream in(path);
  if (!in) throw MalformedManifest("cannot open manifest " + name);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MalformedManifest(name + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path(), name);
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["format"] = "stream4d-manifest";
  j["version"] = 1;
  j["root"] = ".";
  j["stage"] = memory::to_string(m.stage);
  j["timestamps"] = m.timestamps;
  j["sensors"] = json::array();
  for (const auto& s : m.sensors) {
    j["sensors"].push_back({{"id", s.id}, {"intrinsics", s.intrinsics}, {"rig", s.rig}});
  }
  j["frames"] = json::array();
  for (const auto& f : m.frames) {
    json r = {{"t", f.t_index},
              {"sensor", f.sensor},
              {"image", path_in_root(f.image, m.root)},
              {"pose", f.pose}};
    if (f.depth) r["depth"] = path_in_root(*f.depth, m.root);
    if (f.dynamic_mask) r["dynamic_mask"] = path_in_root(*f.dynamic_mask, m.root);
    j["frames"].push_back(r);
  }
  j["flows"] = json::array();
  for (const auto& f : m.flows) {
    j["flows"].push_back({{"sensor", f.sensor},
                          {"t", f.t_index},
                          {"forward", path_in_root(f.forward, m.root)},
                          {"backward", path_in_root(f.backward, m.root)}});
  }
  return j;
}

}  // namespace stream4d::io
