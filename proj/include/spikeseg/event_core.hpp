#pragma once

// AER event streams: parsing, time slicing and per-region density.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/io.hpp"

namespace spikeseg {

struct Event {
  std::uint64_t t = 0;  // microseconds
  int x = 0;
  int y = 0;
  int p = 1;  // -1 or +1

  bool operator==(const Event&) const = default;
};

// Time-ordered events in the half-open interval [t_start, t_end).
struct EventWindow {
  std::vector<Event> events;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  Geometry geometry;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

// Per-pixel event counts, polarity ignored.
struct DensityMap {
  Geometry geometry;
  std::vector<std::uint32_t> counts;  // row-major
  std::uint64_t total = 0;

  std::uint32_t at(int x, int y) const {
    return counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
};

namespace detail {

inline void finish_window(EventWindow& w) {
  std::stable_sort(w.events.begin(), w.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  if (!w.events.empty()) {
    w.t_start = w.events.front().t;
    w.t_end = w.events.back().t + 1;
  }
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

// Parses "t,x,y,p" lines. Blank lines are skipped. When no geometry is given
// it is inferred as the bounding box of the coordinates.
inline EventWindow parse_events_csv(std::string_view source,
                                    std::optional<Geometry> geometry = std::nullopt) {
  EventWindow w;
  std::size_t line_no = 0;
  int max_x = -1, max_y = -1;
  while (!source.empty()) {
    const auto nl = source.find('\n');
    std::string_view line = source.substr(0, nl);
    source = nl == std::string_view::npos ? std::string_view{} : source.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    std::string_view fields[4];
    std::size_t n = 0;
    while (n < 4) {
      const auto comma = line.find(',');
      fields[n++] = line.substr(0, comma);
      if (comma == std::string_view::npos) {
        line = {};
        break;
      }
      line = line.substr(comma + 1);
    }
    std::int64_t t = 0, x = 0, y = 0, p = 0;
    const bool ok = n == 4 && line.empty() && detail::parse_int(fields[0], t) &&
                    detail::parse_int(fields[1], x) && detail::parse_int(fields[2], y) &&
                    detail::parse_int(fields[3], p) && t >= 0 && x >= 0 && y >= 0 &&
                    x <= std::numeric_limits<int>::max() && y <= std::numeric_limits<int>::max() &&
                    (p == 1 || p == -1);
    if (!ok) throw Error(Errc::MalformedLine, "line " + std::to_string(line_no));
    if (geometry && !geometry->contains(static_cast<int>(x), static_cast<int>(y))) {
      throw Error(Errc::CoordinateOutOfRange,
                  "(" + std::to_string(x) + "," + std::to_string(y) + ") at line " + std::to_string(line_no));
    }
    w.events.push_back({static_cast<std::uint64_t>(t), static_cast<int>(x), static_cast<int>(y),
                        static_cast<int>(p)});
    max_x = std::max(max_x, static_cast<int>(x));
    max_y = std::max(max_y, static_cast<int>(y));
  }
  if (w.events.empty()) throw Error(Errc::EmptyStream, "no events in CSV stream");
  w.geometry = geometry ? *geometry : Geometry{max_x + 1, max_y + 1};
  detail::finish_window(w);
  return w;
}

inline std::string write_events_csv(const EventWindow& w) {
  std::string out;
  for (const auto& e : w.events) {
    out += std::to_string(e.t) + "," + std::to_string(e.x) + "," + std::to_string(e.y) + "," +
           std::to_string(e.p) + "\n";
  }
  return out;
}

inline constexpr std::string_view kEventMagic = "EVT1";

// EVT1: magic, u16 width, u16 height, u64 count, then count records of
// (u32 t_us, u16 x, u16 y, u8 p) with p byte 0 -> -1 and 1 -> +1.
// An empty stream is an error unless allow_empty is set, in which case the
// returned window carries only the declared geometry.
inline EventWindow parse_events_binary(std::span<const std::uint8_t> source, bool allow_empty = false) {
  io::Reader r(source);
  if (!r.has(4) || r.bytes(4) != kEventMagic) throw Error(Errc::BadMagic, "expected EVT1");
  EventWindow w;
  w.geometry.width = r.u16();
  w.geometry.height = r.u16();
  const std::uint64_t count = r.u64();
  constexpr std::size_t kRecord = 4 + 2 + 2 + 1;
  if (count > r.remaining() / kRecord) {
    throw Error(Errc::TruncatedStream, "declared " + std::to_string(count) + " records, room for " +
                                           std::to_string(r.remaining() / kRecord));
  }
  w.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t = r.u32();
    e.x = r.u16();
    e.y = r.u16();
    const std::uint8_t pb = r.u8();
    if (pb > 1) throw Error(Errc::MalformedLine, "record " + std::to_string(i) + ": polarity byte " + std::to_string(pb));
    e.p = pb == 1 ? 1 : -1;
    if (!w.geometry.contains(e.x, e.y)) {
      throw Error(Errc::CoordinateOutOfRange, "(" + std::to_string(e.x) + "," + std::to_string(e.y) + ")");
    }
    w.events.push_back(e);
  }
  if (w.events.empty() && !allow_empty) throw Error(Errc::EmptyStream, "EVT1 stream has no records");
  detail::finish_window(w);
  return w;
}

inline std::vector<std::uint8_t> write_events_binary(const EventWindow& w) {
  if (w.geometry.width > 0xFFFF || w.geometry.height > 0xFFFF) {
    throw Error(Errc::CoordinateOutOfRange, "geometry " + to_string(w.geometry) + " exceeds u16");
  }
  io::Writer out;
  out.bytes(kEventMagic);
  out.u16(static_cast<std::uint16_t>(w.geometry.width));
  out.u16(static_cast<std::uint16_t>(w.geometry.height));
  out.u64(w.events.size());
  for (const auto& e : w.events) {
    if (e.t > 0xFFFFFFFFull) throw Error(Errc::CoordinateOutOfRange, "timestamp " + std::to_string(e.t) + " exceeds u32");
    out.u32(static_cast<std::uint32_t>(e.t));
    out.u16(static_cast<std::uint16_t>(e.x));
    out.u16(static_cast<std::uint16_t>(e.y));
    out.u8(e.p > 0 ? 1 : 0);
  }
  return out.take();
}

// Events with t0 <= t < t1. Window bounds become [t0, t1).
inline EventWindow slice_window(const EventWindow& w, std::uint64_t t0, std::uint64_t t1) {
  if (t0 > t1) throw Error(Errc::InvertedInterval, "[" + std::to_string(t0) + ", " + std::to_string(t1) + ")");
  EventWindow out;
  out.geometry = w.geometry;
  out.t_start = t0;
  out.t_end = t1;
  const auto lo = std::lower_bound(w.events.begin(), w.events.end(), t0,
                                   [](const Event& e, std::uint64_t t) { return e.t < t; });
  const auto hi = std::lower_bound(lo, w.events.end(), t1,
                                   [](const Event& e, std::uint64_t t) { return e.t < t; });
  out.events.assign(lo, hi);
  return out;
}

inline DensityMap accumulate_density(const EventWindow& w) {
  DensityMap d;
  d.geometry = w.geometry;
  d.counts.assign(w.geometry.area(), 0);
  for (const auto& e : w.events) {
    ++d.counts[static_cast<std::size_t>(e.y) * w.geometry.width + e.x];
  }
  d.total = w.events.size();
  return d;
}

// Total events inside r.
inline std::uint64_t region_count(const DensityMap& d, const Region& r) {
  if (!r.inside(d.geometry)) {
    throw Error(Errc::RegionOutOfBounds, to_string(r) + " outside " + to_string(d.geometry));
  }
  std::uint64_t sum = 0;
  for (int y = r.y0; y < r.y1(); ++y) {
    const auto* row = d.counts.data() + static_cast<std::size_t>(y) * d.geometry.width;
    for (int x = r.x0; x < r.x1(); ++x) sum += row[x];
  }
  return sum;
}

// Events per pixel inside r.
inline double mean_density(const DensityMap& d, const Region& r) {
  return static_cast<double>(region_count(d, r)) / static_cast<double>(r.area());
}

}  // namespace spikeseg
