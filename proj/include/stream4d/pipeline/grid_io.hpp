#pragma once

#include "stream4d/geometry/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stream4d::io {

// Dense grid file, little-endian:
//   "D4RG" u32 version=1 u32 height u32 width u32 channels
//   f32[height * width * channels] row-major, channels interleaved
//   u8[height * width] validity
struct RawGrid {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;
  std::vector<std::uint8_t> valid;
};

void write_grid(std::ostream& out, const RawGrid& grid);
RawGrid read_grid(std::istream& in, const std::string& name);
void write_grid(const std::filesystem::path& path, const RawGrid& grid);
RawGrid read_grid(const std::filesystem::path& path);

// Invalid pixels are stored as zeros.
RawGrid to_raw(const DepthMap& depth);
RawGrid to_raw(const Pointmap& points);
RawGrid to_raw(const FlowField& flow);
RawGrid to_raw(const Grid<double>& values, const Mask& valid);

DepthMap depth_from_raw(const RawGrid& grid, const std::string& name);
Pointmap pointmap_from_raw(const RawGrid& grid, FrameTag frame, const std::string& name);
FlowField flow_from_raw(const RawGrid& grid, const std::string& name);
Grid<double> scalar_from_raw(const RawGrid& grid, const std::string& name, Mask* valid = nullptr);

// Binary PGM (P5), 8 bit. Images are clamped to [0, 1]; masks map to 0/255.
void write_pgm(const std::filesystem::path& path, const Image& image);
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);
Image image_from_pgm(const std::filesystem::path& path);
Mask mask_from_pgm(const std::filesystem::path& path);

}  // namespace stream4d::io
