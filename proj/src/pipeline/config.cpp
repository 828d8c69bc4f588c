#include "stream4d/pipeline/config.hpp"

#include "stream4d/errors.hpp"
#include "stream4d/pipeline/manifest.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace stream4d::io {
using nlohmann::json;

namespace {

template <typename E>
E parse_enum(const json& j, const char* key, const std::map<std::string, E>& names) {
  const std::string s = j.get<std::string>();
  const auto it = names.find(s);
  if (it == names.end()) throw ConfigError(std::string("unknown value '") + s + "' for " + key);
  return it->second;
}

template <typename E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return "?";
}

const std::map<std::string, BackboneKind> kBackbones = {{"oracle", BackboneKind::kOracle},
                                                        {"toy", BackboneKind::kToy}};
const std::map<std::string, FlowSource> kFlows = {{"files", FlowSource::kFiles},
                                                  {"ego", FlowSource::kEgo}};
const std::map<std::string, RefinerKind> kRefiners = {
    {"region_growing", RefinerKind::kRegionGrowing}, {"none", RefinerKind::kNone}};
const std::map<std::string, CameraMode> kCameras = {{"estimated", CameraMode::kEstimated},
                                                    {"ground_truth", CameraMode::kGroundTruth}};
const std::map<std::string, memory::GateScope> kGates = {
    {"all", memory::GateScope::kAllKeys}, {"long_term", memory::GateScope::kLongTermOnly}};
const std::map<std::string, PlyFormat> kPly = {{"ascii", PlyFormat::kAscii},
                                               {"binary", PlyFormat::kBinaryLittleEndian}};

void positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be positive");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (pool.working_frames < 1) throw ConfigError("working_frames must be >= 1");
  if (pool.long_term_capacity < 1) throw ConfigError("long_term_capacity must be >= 1");
  if (select.related_timestamps < 1) throw ConfigError("related_timestamps must be >= 1");
  if (select.similar_frames < 1) throw ConfigError("similar_frames must be >= 1");
  positive(pool.similarity_threshold, "similarity_threshold");
  positive(flow_threshold, "flow_threshold");
  positive(confidence_threshold, "confidence_threshold");
  positive(alpha, "alpha");
  positive(refiner_tolerance, "refiner_tolerance");
  if (oracle_confidence < 1.0) throw ConfigError("oracle_confidence must be >= 1");
  if (flow_percentile && !(*flow_percentile > 0.0 && *flow_percentile <= 100.0)) {
    throw ConfigError("flow_percentile must lie in (0, 100]");
  }
  if (feature_dim < 4) throw ConfigError("feature_dim must be >= 4");
  if (patch < 1) throw ConfigError("patch must be >= 1");
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "working_frames", "long_term_capacity", "similarity_threshold", "gate_scope",
      "related_timestamps", "similar_frames", "flow_threshold", "flow_percentile",
      "confidence_threshold", "alpha", "backbone", "feature_dim", "patch",
      "oracle_confidence", "flow_provider", "refiner", "refiner_tolerance", "camera_mode",
      "ransac", "stage", "ply_format", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    if (j.contains("working_frames")) c.pool.working_frames = j["working_frames"].get<int>();
    if (j.contains("long_term_capacity")) {
      const auto n = j["long_term_capacity"].get<long long>();
      if (n < 1) throw ConfigError("long_term_capacity must be >= 1");
      c.pool.long_term_capacity = static_cast<std::size_t>(n);
    }
    if (j.contains("similarity_threshold")) {
      c.pool.similarity_threshold = j["similarity_threshold"].get<double>();
    }
    if (j.contains("gate_scope")) c.pool.gate_scope = parse_enum(j["gate_scope"], "gate_scope", kGates);
    if (j.contains("related_timestamps")) {
      c.select.related_timestamps = j["related_timestamps"].get<int>();
    }
    if (j.contains("similar_frames")) c.select.similar_frames = j["similar_frames"].get<int>();
    if (j.contains("flow_threshold")) c.flow_threshold = j["flow_threshold"].get<double>();
    if (j.contains("flow_percentile") && !j["flow_percentile"].is_null()) {
      c.flow_percentile = j["flow_percentile"].get<double>();
    }
    if (j.contains("confidence_threshold")) {
      c.confidence_threshold = j["confidence_threshold"].get<double>();
    }
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("backbone")) c.backbone = parse_enum(j["backbone"], "backbone", kBackbones);
    if (j.contains("feature_dim")) c.feature_dim = j["feature_dim"].get<int>();
    if (j.contains("patch")) c.patch = j["patch"].get<int>();
    if (j.contains("oracle_confidence")) c.oracle_confidence = j["oracle_confidence"].get<double>();
    if (j.contains("flow_provider")) {
      c.flow_source = parse_enum(j["flow_provider"], "flow_provider", kFlows);
    }
    if (j.contains("refiner")) c.refiner = parse_enum(j["refiner"], "refiner", kRefiners);
    if (j.contains("refiner_tolerance")) c.refiner_tolerance = j["refiner_tolerance"].get<double>();
    if (j.contains("camera_mode")) {
      c.camera_mode = parse_enum(j["camera_mode"], "camera_mode", kCameras);
    }
    if (j.contains("ransac")) c.ransac = j["ransac"].get<bool>();
    if (j.contains("stage") && !j["stage"].is_null()) {
      c.stage = parse_stage(j["stage"].get<std::string>());
    }
    if (j.contains("ply_format")) c.ply_format = parse_enum(j["ply_format"], "ply_format", kPly);
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j = {{"working_frames", c.pool.working_frames},
            {"long_term_capacity", c.pool.long_term_capacity},
            {"similarity_threshold", c.pool.similarity_threshold},
            {"gate_scope", enum_name(c.pool.gate_scope, kGates)},
            {"related_timestamps", c.select.related_timestamps},
            {"similar_frames", c.select.similar_frames},
            {"flow_threshold", c.flow_threshold},
            {"flow_percentile", nullptr},
            {"confidence_threshold", c.confidence_threshold},
            {"alpha", c.alpha},
            {"backbone", enum_name(c.backbone, kBackbones)},
            {"feature_dim", c.feature_dim},
            {"patch", c.patch},
            {"oracle_confidence", c.oracle_confidence},
            {"flow_provider", enum_name(c.flow_source, kFlows)},
            {"refiner", enum_name(c.refiner, kRefiners)},
            {"refiner_tolerance", c.refiner_tolerance},
            {"camera_mode", enum_name(c.camera_mode, kCameras)},
            {"ransac", c.ransac},
            {"stage", nullptr},
            {"ply_format", enum_name(c.ply_format, kPly)},
            {"seed", c.seed}};
  if (c.flow_percentile) j["flow_percentile"] = *c.flow_percentile;
  if (c.stage) j["stage"] = memory::to_string(*c.stage);
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace stream4d::io
