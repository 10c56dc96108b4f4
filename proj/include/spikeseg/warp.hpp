#pragma once

// Optical-flow label propagation: backward bilinear warping of one-hot
// class planes followed by argmax.

#include <cmath>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/flow.hpp"
#include "spikeseg/image.hpp"

namespace spikeseg {

// Output pixel q samples the key labels at q - flow(q). Samples falling
// outside the frame carry zero weight, so fully out-of-frame pixels end up
// as class 0. Ties go to the lower class id.
inline LabelMap warp_labels(const LabelMap& key, const FlowField& flow) {
  if (key.geometry != flow.geometry) {
    throw Error(Errc::ShapeMismatch, "labels " + to_string(key.geometry) + " vs flow " + to_string(flow.geometry));
  }
  if (!flow.all_finite()) throw Error(Errc::NonFiniteFlow, "flow field contains NaN or Inf");
  const int w = key.geometry.width;
  const int h = key.geometry.height;
  LabelMap out(key.geometry, key.num_classes);
  std::vector<double> weight(static_cast<std::size_t>(key.num_classes));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& f = flow.at(x, y);
      const double sx = x - static_cast<double>(f.dx);
      const double sy = y - static_cast<double>(f.dy);
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const double ax = sx - fx0;
      const double ay = sy - fy0;
      std::fill(weight.begin(), weight.end(), 0.0);
      const double taps[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int k = 0; k < 4; ++k) {
        if (taps[k] == 0.0) continue;
        const double px = fx0 + (k & 1);
        const double py = fy0 + (k >> 1);
        if (px < 0 || py < 0 || px >= w || py >= h) continue;
        weight[key.at(static_cast<int>(px), static_cast<int>(py))] += taps[k];
      }
      int best = 0;
      for (int c = 1; c < key.num_classes; ++c) {
        if (weight[static_cast<std::size_t>(c)] > weight[static_cast<std::size_t>(best)]) best = c;
      }
      out.at(x, y) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace spikeseg
