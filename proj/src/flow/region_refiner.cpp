#include "stream4d/errors.hpp"
#include "stream4d/flow/flow_predictor.hpp"

#include <cmath>
#include <vector>

namespace stream4d::flow {

DynamicMask RegionGrowingRefiner::refine(const DynamicMask& mask, const Image& image) const {
  if (!mask.same_shape(image)) throw DimensionMismatch("mask and image shapes differ");
  const int w = mask.width;
  const int h = mask.height;
  DynamicMask grown = mask;
  // Seeding from every component at once gives the same union as growing
  // each component separately: membership only depends on neighbour pairs.
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) frontier.push_back(i);
  }
  constexpr int kDu[4] = {1, -1, 0, 0};
  constexpr int kDv[4] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    const std::size_t i = frontier.back();
    frontier.pop_back();
    const int u = static_cast<int>(i % w);
    const int v = static_cast<int>(i / w);
    for (int n = 0; n < 4; ++n) {
      const int nu = u + kDu[n];
      const int nv = v + kDv[n];
      if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
      const std::size_t j = grown.index(nu, nv);
      if (grown[j]) continue;
      if (std::abs(image[j] - image[i]) <= tolerance_) {
        grown[j] = 1;
        frontier.push_back(j);
      }
    }
  }
  return close3x3(grown);
}

DynamicMask close3x3(const DynamicMask& mask) {
  const int w = mask.width;
  const int h = mask.height;
  DynamicMask dilated(w, h, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      bool any = false;
      for (int dv = -1; dv <= 1 && !any; ++dv) {
        for (int du = -1; du <= 1 && !any; ++du) {
          const int nu = u + du;
          const int nv = v + dv;
          any = mask.contains(nu, nv) && mask(nu, nv);
        }
      }
      dilated(u, v) = any ? 1 : 0;
    }
  }
  DynamicMask closed(w, h, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      bool all = true;
      for (int dv = -1; dv <= 1 && all; ++dv) {
        for (int du = -1; du <= 1 && all; ++du) {
          const int nu = u + du;
          const int nv = v + dv;
          all = !dilated.contains(nu, nv) || dilated(nu, nv);
        }
      }
      closed(u, v) = all ? 1 : 0;
    }
  }
  return closed;
}

}  // namespace stream4d::flow
