#pragma once

#include <compare>
#include <cstddef>
#include <string>

namespace spikeseg {

struct Geometry {
  int width = 0;
  int height = 0;

  std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  auto operator<=>(const Geometry&) const = default;
};

inline std::string to_string(Geometry g) {
  return std::to_string(g.width) + "x" + std::to_string(g.height);
}

// Axis-aligned rectangle of pixels; index is the row-major position in its grid.
struct Region {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  int index = 0;

  std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  int x1() const { return x0 + width; }
  int y1() const { return y0 + height; }
  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x1() && y < y1(); }
  bool inside(Geometry g) const {
    return width >= 1 && height >= 1 && x0 >= 0 && y0 >= 0 && x1() <= g.width && y1() <= g.height;
  }
  Geometry size() const { return {width, height}; }
  auto operator<=>(const Region&) const = default;
};

inline std::string to_string(const Region& r) {
  return "region#" + std::to_string(r.index) + "(" + std::to_string(r.x0) + "," +
         std::to_string(r.y0) + "," + std::to_string(r.width) + "x" + std::to_string(r.height) + ")";
}

}  // namespace spikeseg
