#include "stream4d/synth/scene_json.hpp"

#include "stream4d/errors.hpp"

#include <fstream>

namespace stream4d {
namespace {

using nlohmann::json;

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d read_vec3(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ConfigError(std::string("field '") + key + "' must be a 3-vector");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json box_json(const synth::Box& b) {
  return {{"center", vec3(b.center)},
          {"half_extents", vec3(b.half_extents)},
          {"rotation", vec3(b.rotation)},
          {"albedo", b.albedo}};
}

synth::Box read_box(const json& j) {
  synth::Box b;
  b.center = read_vec3(j, "center");
  b.half_extents = read_vec3(j, "half_extents");
  if (j.contains("rotation")) b.rotation = read_vec3(j, "rotation");
  b.albedo = j.value("albedo", 0.5);
  return b;
}

}  // namespace

void to_json(nlohmann::json& j, const SE3Pose& pose) {
  json r = json::array();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r.push_back(pose.rotation(row, col));
  }
  j = {{"rotation", r}, {"translation", vec3(pose.translation)}};
}

void from_json(const nlohmann::json& j, SE3Pose& pose) {
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw ConfigError("pose rotation must have 9 entries");
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) pose.rotation(row, col) = r[row * 3 + col].get<double>();
  }
  pose.translation = read_vec3(j, "translation");
  if (!pose.is_valid(1e-6)) throw ConfigError("pose rotation is not a rotation matrix");
}

void to_json(nlohmann::json& j, const Intrinsics& k) {
  j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
       {"width", k.width}, {"height", k.height}};
}

void from_json(const nlohmann::json& j, Intrinsics& k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  if (!k.is_valid()) throw ConfigError("intrinsics are invalid");
}

namespace synth {

nlohmann::json scene_to_json(const SceneSpec& scene) {
  json j;
  j["planes"] = json::array();
  for (const auto& p : scene.planes) {
    j["planes"].push_back({{"normal", vec3(p.normal)}, {"offset", p.offset}, {"albedo", p.albedo}});
  }
  j["static_boxes"] = json::array();
  for (const auto& b : scene.static_boxes) j["static_boxes"].push_back(box_json(b));
  j["dynamic_bodies"] = json::array();
  for (const auto& d : scene.dynamic_bodies) {
    json b = box_json(d.box);
    b["linear_velocity"] = vec3(d.linear_velocity);
    b["angular_velocity"] = vec3(d.angular_velocity);
    j["dynamic_bodies"].push_back(b);
  }
  j["sensors"] = json::array();
  for (const auto& s : scene.sensors) {
    j["sensors"].push_back({{"intrinsics", s.intrinsics}, {"rig", s.rig}});
  }
  j["timestamps"] = scene.timestamps;
  j["ego_poses"] = scene.ego_poses;
  j["light_direction"] = vec3(scene.light_direction);
  j["ambient"] = scene.ambient;
  j["seed"] = scene.seed;
  j["depth_noise_sigma"] = scene.depth_noise_sigma;
  return j;
}

SceneSpec scene_from_json(const nlohmann::json& j) {
  try {
    SceneSpec scene;
    for (const auto& p : j.value("planes", json::array())) {
      scene.planes.push_back({read_vec3(p, "normal"), p.at("offset").get<double>(),
                              p.value("albedo", 0.5)});
    }
    for (const auto& b : j.value("static_boxes", json::array())) {
      scene.static_boxes.push_back(read_box(b));
    }
    for (const auto& b : j.value("dynamic_bodies", json::array())) {
      DynamicBody d;
      d.box = read_box(b);
      if (b.contains("linear_velocity")) d.linear_velocity = read_vec3(b, "linear_velocity");
      if (b.contains("angular_velocity")) d.angular_velocity = read_vec3(b, "angular_velocity");
      scene.dynamic_bodies.push_back(d);
    }
    if (j.contains("sensors")) {
      for (const auto& s : j.at("sensors")) {
        scene.sensors.push_back({s.at("intrinsics").get<Intrinsics>(), s.at("rig").get<SE3Pose>()});
      }
    } else if (j.contains("ring_rig")) {
      const json& r = j.at("ring_rig");
      RigOptions opt;
      opt.num_cameras = r.value("num_cameras", opt.num_cameras);
      opt.image_size = r.value("image_size", opt.image_size);
      opt.focal = r.value("focal", opt.focal);
      opt.radius = r.value("radius", opt.radius);
      opt.height = r.value("height", opt.height);
      scene.sensors = ring_rig(opt);
    }
    scene.timestamps = j.at("timestamps").get<std::vector<double>>();
    if (j.contains("ego_poses")) {
      scene.ego_poses = j.at("ego_poses").get<std::vector<SE3Pose>>();
    } else {
      const json tr = j.value("trajectory", json::object());
      scene.ego_poses = straight_trajectory(scene.timestamps, tr.value("speed", 0.0),
                                            tr.value("yaw_rate", 0.0));
    }
    if (j.contains("light_direction")) scene.light_direction = read_vec3(j, "light_direction");
    scene.ambient = j.value("ambient", scene.ambient);
    scene.seed = j.value("seed", scene.seed);
    scene.depth_noise_sigma = j.value("depth_noise_sigma", scene.depth_noise_sigma);
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene JSON: ") + e.what());
  }
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scene file " + path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace synth
}  // namespace stream4d
