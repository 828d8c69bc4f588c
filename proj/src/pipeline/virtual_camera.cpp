#include "stream4d/pipeline/virtual_camera.hpp"

#include "stream4d/errors.hpp"

#include <algorithm>
#include <cmath>

namespace stream4d::io {
namespace {

double sample_bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 2 < 0 ? 0 : img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2 < 0 ? 0 : img.height - 2);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bottom = (1 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1 - ay) * top + ay * bottom;
}

}  // namespace

std::array<VirtualView, 2> split_virtual_cameras(const Image& image, const Intrinsics& k,
                                                 int size) {
  if (image.width <= image.height) {
    throw BadDimensions("virtual split needs a wide image, got " + std::to_string(image.width) +
                        "x" + std::to_string(image.height));
  }
  if (k.width != image.width || k.height != image.height) {
    throw BadDimensions("intrinsics do not match the image size");
  }
  if (size < 1) throw BadDimensions("virtual camera size must be positive");
  const int half = image.width / 2;
  std::array<VirtualView, 2> views;
  for (int side = 0; side < 2; ++side) {
    VirtualView& view = views[side];
    view.crop_offset = side * half;
    view.scale_x = static_cast<double>(size) / half;
    view.scale_y = static_cast<double>(size) / image.height;
    view.intrinsics.fx = k.fx * view.scale_x;
    view.intrinsics.fy = k.fy * view.scale_y;
    view.intrinsics.cx = (k.cx - view.crop_offset) * view.scale_x;
    view.intrinsics.cy = k.cy * view.scale_y;
    view.intrinsics.width = size;
    view.intrinsics.height = size;
    view.image = Image(size, size, 0.0);
    for (int v = 0; v < size; ++v) {
      for (int u = 0; u < size; ++u) {
        view.image(u, v) = sample_bilinear(image, u / view.scale_x + view.crop_offset,
                                           v / view.scale_y);
      }
    }
  }
  return views;
}

}  // namespace stream4d::io
