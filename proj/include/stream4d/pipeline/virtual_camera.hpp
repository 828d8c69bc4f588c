#pragma once

#include "stream4d/geometry/types.hpp"

#include <array>

namespace stream4d::io {

struct VirtualView {
  Image image;
  Intrinsics intrinsics;
  int crop_offset = 0;  // first input column of the crop
  double scale_x = 1.0;
  double scale_y = 1.0;
};

// Left and right half crops of a wide image, each resampled to size x size.
// Output pixel (u', v') samples input (u' / sx + offset, v' / sy) bilinearly,
// matching the intrinsics fx' = fx sx, cx' = (cx - offset) sx, fy' = fy sy,
// cy' = cy sy. Throws BadDimensions unless the image is wider than tall.
std::array<VirtualView, 2> split_virtual_cameras(const Image& image, const Intrinsics& k,
                                                 int size = 224);

}  // namespace stream4d::io
