#include "stream4d/pipeline/grid_io.hpp"

#include "stream4d/binary_io.hpp"
#include "stream4d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <cctype>

namespace stream4d::io {
namespace {

constexpr char kMagic[4] = {'D', '4', 'R', 'G'};
constexpr std::uint32_t kVersion = 1;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TruncatedFile("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

RawGrid blank(int w, int h, std::uint32_t channels) {
  RawGrid g;
  g.width = static_cast<std::uint32_t>(w);
  g.height = static_cast<std::uint32_t>(h);
  g.channels = channels;
  g.data.assign(static_cast<std::size_t>(w) * h * channels, 0.0f);
  g.valid.assign(static_cast<std::size_t>(w) * h, 0);
  return g;
}

void expect_channels(const RawGrid& g, std::uint32_t channels, const std::string& name) {
  if (g.channels != channels) {
    throw BadDimensions(name + " has " + std::to_string(g.channels) + " channels, expected " +
                        std::to_string(channels));
  }
}

}  // namespace

void write_grid(std::ostream& out, const RawGrid& g) {
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::uint32_t>(out, g.height);
  binary::write_le<std::uint32_t>(out, g.width);
  binary::write_le<std::uint32_t>(out, g.channels);
  for (float v : g.data) binary::write_le<float>(out, v);
  out.write(reinterpret_cast<const char*>(g.valid.data()),
            static_cast<std::streamsize>(g.valid.size()));
}

RawGrid read_grid(std::istream& in, const std::string& name) {
  char magic[4];
  binary::read_exact(in, magic, 4, name);
  if (!std::equal(magic, magic + 4, kMagic)) throw BadMagic(name + " is not a D4RG grid");
  const auto version = binary::read_le<std::uint32_t>(in, name);
  if (version != kVersion) {
    throw BadMagic(name + " has unsupported grid version " + std::to_string(version));
  }
  RawGrid g;
  g.height = binary::read_le<std::uint32_t>(in, name);
  g.width = binary::read_le<std::uint32_t>(in, name);
  g.channels = binary::read_le<std::uint32_t>(in, name);
  const std::uint64_t pixels = static_cast<std::uint64_t>(g.width) * g.height;
  if (g.channels == 0 || pixels == 0 || pixels * g.channels > (1ull << 32)) {
    throw BadDimensions(name + " declares an unusable grid shape");
  }
  g.data.resize(pixels * g.channels);
  for (auto& v : g.data) v = binary::read_le<float>(in, name);
  g.valid.resize(pixels);
  binary::read_exact(in, reinterpret_cast<char*>(g.valid.data()), g.valid.size(), name);
  return g;
}

void write_grid(const std::filesystem::path& path, const RawGrid& grid) {
  std::ofstream out = open_out(path);
  write_grid(out, grid);
}

RawGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return read_grid(in, path.string());
}

RawGrid to_raw(const DepthMap& depth) {
  RawGrid g = blank(depth.width(), depth.height(), 1);
  for (std::size_t i = 0; i < depth.depth.size(); ++i) {
    if (!depth.valid[i]) continue;
    g.data[i] = static_cast<float>(depth.depth[i]);
    g.valid[i] = 1;
  }
  return g;
}

RawGrid to_raw(const Pointmap& points) {
  RawGrid g = blank(points.width(), points.height(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid[i]) continue;
    for (int c = 0; c < 3; ++c) g.data[3 * i + c] = static_cast<float>(points.points[i][c]);
    g.valid[i] = 1;
  }
  return g;
}

RawGrid to_raw(const FlowField& flow) {
  RawGrid g = blank(flow.width(), flow.height(), 2);
  for (std::size_t i = 0; i < flow.flow.size(); ++i) {
    if (!flow.valid[i]) continue;
    g.data[2 * i] = static_cast<float>(flow.flow[i].x());
    g.data[2 * i + 1] = static_cast<float>(flow.flow[i].y());
    g.valid[i] = 1;
  }
  return g;
}

RawGrid to_raw(const Grid<double>& values, const Mask& valid) {
  if (!values.same_shape(valid)) throw DimensionMismatch("grid and mask shapes differ");
  RawGrid g = blank(values.width, values.height, 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid[i]) continue;
    g.data[i] = static_cast<float>(values[i]);
    g.valid[i] = 1;
  }
  return g;
}

DepthMap depth_from_raw(const RawGrid& g, const std::string& name) {
  expect_channels(g, 1, name);
  DepthMap d(static_cast<int>(g.width), static_cast<int>(g.height));
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (!g.valid[i]) continue;
    d.depth[i] = g.data[i];
    if (!(d.depth[i] > 0.0) || !std::isfinite(d.depth[i])) {
      throw NonPositiveDepth(name + " holds a non-positive depth at pixel " + std::to_string(i));
    }
    d.valid[i] = 1;
  }
  return d;
}

Pointmap pointmap_from_raw(const RawGrid& g, FrameTag frame, const std::string& name) {
  expect_channels(g, 3, name);
  Pointmap p(static_cast<int>(g.width), static_cast<int>(g.height), frame);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!g.valid[i]) continue;
    p.points[i] = Eigen::Vector3d(g.data[3 * i], g.data[3 * i + 1], g.data[3 * i + 2]);
    p.valid[i] = 1;
  }
  return p;
}

FlowField flow_from_raw(const RawGrid& g, const std::string& name) {
  expect_channels(g, 2, name);
  FlowField f(static_cast<int>(g.width), static_cast<int>(g.height));
  for (std::size_t i = 0; i < f.flow.size(); ++i) {
    if (!g.valid[i]) continue;
    f.flow[i] = Eigen::Vector2d(g.data[2 * i], g.data[2 * i + 1]);
    f.valid[i] = 1;
  }
  return f;
}

Grid<double> scalar_from_raw(const RawGrid& g, const std::string& name, Mask* valid) {
  expect_channels(g, 1, name);
  Grid<double> out(static_cast<int>(g.width), static_cast<int>(g.height), 0.0);
  if (valid) *valid = Mask(out.width, out.height, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = g.data[i];
    if (valid) (*valid)[i] = g.valid[i] ? 1 : 0;
  }
  return out;
}

namespace {

void write_pgm_bytes(const std::filesystem::path& path, int w, int h,
                     const std::vector<std::uint8_t>& bytes) {
  std::ofstream out = open_out(path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Next header token, skipping whitespace and comments.
std::string pgm_token(std::istream& in, const std::string& name) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw TruncatedFile(name + " ended inside the PGM header");
  return tok;
}

int pgm_int(std::istream& in, const std::string& name) {
  const std::string tok = pgm_token(in, name);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw BadDimensions(name + " has a bad PGM header field '" + tok + "'");
  }
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  }
  write_pgm_bytes(path, image.width, image.height, bytes);
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  write_pgm_bytes(path, mask.width, mask.height, bytes);
}

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string name = path.string();
  char magic[2];
  binary::read_exact(in, magic, 2, name);
  if (magic[0] != 'P' || magic[1] != '5') throw BadMagic(name + " is not a binary PGM");
  const int w = pgm_int(in, name);
  const int h = pgm_int(in, name);
  const int maxval = pgm_int(in, name);
  if (maxval > 255) throw BadDimensions(name + " is not an 8-bit PGM");
  Grid<std::uint8_t> g(w, h, 0);
  binary::read_exact(in, reinterpret_cast<char*>(g.data.data()), g.size(), name);
  if (maxval != 255) {
    for (auto& v : g.data) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  }
  return g;
}

Image image_from_pgm(const std::filesystem::path& path) {
  const Grid<std::uint8_t> g = read_pgm(path);
  Image img(g.width, g.height, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) img[i] = g[i] / 255.0;
  return img;
}

Mask mask_from_pgm(const std::filesystem::path& path) {
  const Grid<std::uint8_t> g = read_pgm(path);
  Mask m(g.width, g.height, 0);
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace stream4d::io
