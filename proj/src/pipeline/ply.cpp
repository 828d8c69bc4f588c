#include "stream4d/pipeline/ply.hpp"

#include "stream4d/binary_io.hpp"
#include "stream4d/errors.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace stream4d::io {
namespace {

constexpr const char* kProperties =
    "property double x\n"
    "property double y\n"
    "property double z\n"
    "property float confidence\n"
    "property int sensor_id\n"
    "property int timestamp_index\n";

}  // namespace

void write_ply(const std::filesystem::path& path, const std::vector<align::ScenePoint>& points,
               PlyFormat format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  const bool ascii = format == PlyFormat::kAscii;
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << points.size() << "\n"
      << kProperties << "end_header\n";
  if (ascii) {
    out << std::setprecision(17);
    for (const auto& p : points) {
      out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' '
          << std::setprecision(9) << static_cast<float>(p.confidence) << std::setprecision(17)
          << ' ' << p.sensor << ' ' << p.t_index << '\n';
    }
    return;
  }
  for (const auto& p : points) {
    for (int c = 0; c < 3; ++c) binary::write_le<double>(out, p.position[c]);
    binary::write_le<float>(out, static_cast<float>(p.confidence));
    binary::write_le<std::int32_t>(out, p.sensor);
    binary::write_le<std::int32_t>(out, p.t_index);
  }
}

std::vector<align::ScenePoint> read_ply(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TruncatedFile("cannot open " + name);
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw BadMagic(name + " is not a PLY file");
  bool ascii = false;
  std::size_t count = 0;
  std::string properties;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") {
        ascii = true;
      } else if (f != "binary_little_endian") {
        throw BadMagic(name + " uses unsupported PLY format " + f);
      }
    } else if (key == "element") {
      std::string what;
      ls >> what >> count;
    } else if (key == "property") {
      properties += line + "\n";
    }
  }
  if (!in) throw TruncatedFile(name + " ended inside the PLY header");
  if (properties != kProperties) throw BadMagic(name + " has an unexpected vertex layout");
  std::vector<align::ScenePoint> points(count);
  for (auto& p : points) {
    if (ascii) {
      float conf;
      if (!(in >> p.position.x() >> p.position.y() >> p.position.z() >> conf >> p.sensor >>
            p.t_index)) {
        throw TruncatedFile(name + " ended before all vertices were read");
      }
      p.confidence = conf;
    } else {
      for (int c = 0; c < 3; ++c) p.position[c] = binary::read_le<double>(in, name);
      p.confidence = binary::read_le<float>(in, name);
      p.sensor = binary::read_le<std::int32_t>(in, name);
      p.t_index = binary::read_le<std::int32_t>(in, name);
    }
  }
  return points;
}

}  // namespace stream4d::io
