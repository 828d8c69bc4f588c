#pragma once

#include "stream4d/synth/scene.hpp"

#include <json.hpp>

#include <filesystem>

namespace stream4d {

// Rotation is stored row-major as 9 numbers.
void to_json(nlohmann::json& j, const SE3Pose& pose);
void from_json(const nlohmann::json& j, SE3Pose& pose);
void to_json(nlohmann::json& j, const Intrinsics& k);
void from_json(const nlohmann::json& j, Intrinsics& k);

namespace synth {

nlohmann::json scene_to_json(const SceneSpec& scene);
// Accepts explicit "sensors"/"ego_poses" or the "ring_rig"/"trajectory"
// shorthands. Throws ConfigError on schema violations.
SceneSpec scene_from_json(const nlohmann::json& j);
SceneSpec load_scene(const std::filesystem::path& path);

}  // namespace synth
}  // namespace stream4d
