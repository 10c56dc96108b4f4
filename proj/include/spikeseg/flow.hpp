#pragma once

// Dense per-pixel displacement fields and the FLW1 file format.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/io.hpp"

namespace spikeseg {

struct FlowVector {
  float dx = 0.0f;
  float dy = 0.0f;
  bool operator==(const FlowVector&) const = default;
};

struct FlowField {
  Geometry geometry;
  std::vector<FlowVector> flow;  // row-major

  FlowField() = default;
  explicit FlowField(Geometry g, FlowVector fill = {}) : geometry(g), flow(g.area(), fill) {}

  FlowVector& at(int x, int y) { return flow[static_cast<std::size_t>(y) * geometry.width + x]; }
  const FlowVector& at(int x, int y) const { return flow[static_cast<std::size_t>(y) * geometry.width + x]; }
  std::vector<FlowVector>& buffer() { return flow; }
  const std::vector<FlowVector>& buffer() const { return flow; }
  bool operator==(const FlowField&) const = default;

  bool all_finite() const {
    for (const auto& f : flow) {
      if (!std::isfinite(f.dx) || !std::isfinite(f.dy)) return false;
    }
    return true;
  }
};

inline constexpr std::string_view kFlowMagic = "FLW1";

// FLW1: magic, u16 width, u16 height, then row-major little-endian f32 (dx, dy).
inline std::vector<std::uint8_t> write_flow(const FlowField& f) {
  if (f.geometry.width > 0xFFFF || f.geometry.height > 0xFFFF) {
    throw Error(Errc::CoordinateOutOfRange, "flow geometry " + to_string(f.geometry));
  }
  io::Writer w;
  w.bytes(kFlowMagic);
  w.u16(static_cast<std::uint16_t>(f.geometry.width));
  w.u16(static_cast<std::uint16_t>(f.geometry.height));
  for (const auto& v : f.flow) {
    w.f32(v.dx);
    w.f32(v.dy);
  }
  return w.take();
}

inline FlowField parse_flow(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes);
  if (!r.has(4) || r.bytes(4) != kFlowMagic) throw Error(Errc::BadMagic, "expected FLW1");
  Geometry g;
  g.width = r.u16();
  g.height = r.u16();
  FlowField f(g);
  for (auto& v : f.flow) {
    v.dx = r.f32();
    v.dy = r.f32();
  }
  return f;
}

}  // namespace spikeseg
