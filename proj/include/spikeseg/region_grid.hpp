#pragma once

// Overlapping rectangular decomposition of the frame plane, per-region
// cropping, and priority-based merging of per-region label maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/image.hpp"

namespace spikeseg {

struct RegionGrid {
  int rows = 1;
  int cols = 1;
  int overlap = 0;
  Geometry geometry;
  std::vector<Region> regions;  // row-major

  std::size_t size() const { return regions.size(); }
  const Region& operator[](std::size_t i) const { return regions[i]; }
  std::string shape() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

namespace detail {

// Splits extent into count parts differing by at most one pixel. Remainder
// pixels go to the parts closest to the center, lower index first on ties.
inline std::vector<int> partition_axis(int extent, int count) {
  std::vector<int> sizes(static_cast<std::size_t>(count), extent / count);
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [count](int a, int b) {
    return std::abs(2 * a - (count - 1)) < std::abs(2 * b - (count - 1));
  });
  for (int k = 0; k < extent % count; ++k) ++sizes[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
  return sizes;
}

struct Span1D {
  int start;
  int length;
};

// Interior boundaries are widened by ceil(overlap/2) into the right/lower
// neighbor and floor(overlap/2) into the left/upper one, so adjacent spans
// share exactly `overlap` pixels. Frame borders are never extended.
inline std::vector<Span1D> axis_spans(int extent, int count, int overlap, const char* axis) {
  if (count < 1 || extent < count) {
    throw Error(Errc::GeometryTooSmall, std::string(axis) + " extent " + std::to_string(extent) + " for " +
                                            std::to_string(count) + " regions");
  }
  const auto sizes = partition_axis(extent, count);
  if (count > 1) {
    const int min_part = *std::min_element(sizes.begin(), sizes.end());
    if (static_cast<double>(overlap) >= static_cast<double>(extent) / (count - 1) || overlap > min_part) {
      throw Error(Errc::OverlapTooLarge, std::string(axis) + " overlap " + std::to_string(overlap) +
                                             " with parts of " + std::to_string(min_part) + " pixels");
    }
  }
  std::vector<Span1D> spans;
  int cut = 0;
  for (int i = 0; i < count; ++i) {
    const int lo = cut - (i > 0 ? overlap / 2 : 0);
    const int hi = cut + sizes[static_cast<std::size_t>(i)] + (i + 1 < count ? overlap - overlap / 2 : 0);
    spans.push_back({lo, hi - lo});
    cut += sizes[static_cast<std::size_t>(i)];
  }
  return spans;
}

}  // namespace detail

inline RegionGrid build_grid(Geometry geometry, int rows, int cols, int overlap) {
  if (rows < 1 || cols < 1) throw Error(Errc::GeometryTooSmall, "grid shape must be at least 1x1");
  if (overlap < 0) throw Error(Errc::OverlapTooLarge, "negative overlap");
  const auto ys = detail::axis_spans(geometry.height, rows, overlap, "vertical");
  const auto xs = detail::axis_spans(geometry.width, cols, overlap, "horizontal");
  RegionGrid g{rows, cols, overlap, geometry, {}};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto& sy = ys[static_cast<std::size_t>(r)];
      const auto& sx = xs[static_cast<std::size_t>(c)];
      g.regions.push_back({sx.start, sy.start, sx.length, sy.length, r * cols + c});
    }
  }
  return g;
}

// Works for any raster exposing geometry, at(x, y) and a row-major buffer().
template <class Raster>
Raster crop(const Raster& src, const Region& r) {
  if (!r.inside(src.geometry)) {
    throw Error(Errc::RegionOutOfBounds, to_string(r) + " outside " + to_string(src.geometry));
  }
  Raster out = src;
  out.geometry = r.size();
  auto& buf = out.buffer();
  const auto& sbuf = src.buffer();
  buf.resize(r.area());
  for (int y = 0; y < r.height; ++y) {
    std::copy_n(sbuf.begin() + static_cast<std::ptrdiff_t>((r.y0 + y) * src.geometry.width + r.x0), r.width,
                buf.begin() + static_cast<std::ptrdiff_t>(y * r.width));
  }
  return out;
}

template <class Raster>
void paste(Raster& dst, const Raster& patch, const Region& r) {
  if (!r.inside(dst.geometry)) {
    throw Error(Errc::RegionOutOfBounds, to_string(r) + " outside " + to_string(dst.geometry));
  }
  if (patch.geometry != r.size()) {
    throw Error(Errc::ShapeMismatch, "patch " + to_string(patch.geometry) + " for " + to_string(r));
  }
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) dst.at(r.x0 + x, r.y0 + y) = patch.at(x, y);
  }
}

struct RegionLabels {
  int region_index = 0;
  LabelMap labels;
  double priority = 0.0;
};

// Overlapped pixels take the label of the covering region with the highest
// priority; equal priorities resolve to the lowest region index. The result
// does not depend on the order of `parts`.
inline LabelMap merge_labels(const RegionGrid& grid, const std::vector<RegionLabels>& parts) {
  std::vector<const RegionLabels*> by_region(grid.size(), nullptr);
  int num_classes = 0;
  for (const auto& p : parts) {
    if (p.region_index < 0 || static_cast<std::size_t>(p.region_index) >= grid.size()) {
      throw Error(Errc::MissingRegion, "unknown region index " + std::to_string(p.region_index));
    }
    if (by_region[static_cast<std::size_t>(p.region_index)] != nullptr) {
      throw Error(Errc::MissingRegion, "duplicate result for region " + std::to_string(p.region_index));
    }
    const auto& reg = grid[static_cast<std::size_t>(p.region_index)];
    if (p.labels.geometry != reg.size()) {
      throw Error(Errc::ShapeMismatch, "labels " + to_string(p.labels.geometry) + " for " + to_string(reg));
    }
    if (!std::isfinite(p.priority)) throw Error(Errc::NonFiniteValue, "priority of region " + std::to_string(p.region_index));
    if (num_classes != 0 && p.labels.num_classes != num_classes) {
      throw Error(Errc::ShapeMismatch, "class count differs between regions");
    }
    num_classes = p.labels.num_classes;
    by_region[static_cast<std::size_t>(p.region_index)] = &p;
  }
  for (std::size_t i = 0; i < by_region.size(); ++i) {
    if (by_region[i] == nullptr) throw Error(Errc::MissingRegion, "no labels for region " + std::to_string(i));
  }

  // Paint in increasing precedence so the winner is written last.
  std::vector<const RegionLabels*> order = by_region;
  std::sort(order.begin(), order.end(), [](const RegionLabels* a, const RegionLabels* b) {
    if (a->priority != b->priority) return a->priority < b->priority;
    return a->region_index > b->region_index;
  });
  LabelMap out(grid.geometry, num_classes);
  for (const auto* p : order) paste(out, p->labels, grid[static_cast<std::size_t>(p->region_index)]);
  return out;
}

}  // namespace spikeseg
