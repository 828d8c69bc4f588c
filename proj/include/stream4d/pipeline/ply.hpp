#pragma once

#include "stream4d/align/aligner.hpp"

#include <filesystem>
#include <vector>

namespace stream4d::io {

enum class PlyFormat { kAscii, kBinaryLittleEndian };

// Vertex properties: double x y z, float confidence, int sensor_id,
// int timestamp_index.
void write_ply(const std::filesystem::path& path, const std::vector<align::ScenePoint>& points,
               PlyFormat format);
std::vector<align::ScenePoint> read_ply(const std::filesystem::path& path);

}  // namespace stream4d::io
