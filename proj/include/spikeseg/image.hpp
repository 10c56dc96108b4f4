#pragma once

// 8-bit rasters: grayscale frames and class label maps, with binary PGM I/O.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/io.hpp"

namespace spikeseg {

struct Image {
  Geometry geometry;
  std::vector<std::uint8_t> pixels;  // row-major

  Image() = default;
  explicit Image(Geometry g, std::uint8_t fill = 0) : geometry(g), pixels(g.area(), fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * geometry.width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * geometry.width + x]; }
  std::vector<std::uint8_t>& buffer() { return pixels; }
  const std::vector<std::uint8_t>& buffer() const { return pixels; }
  bool operator==(const Image&) const = default;
};

// Per-pixel class ids in [0, num_classes).
struct LabelMap {
  Geometry geometry;
  int num_classes = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(Geometry g, int classes, std::uint8_t fill = 0)
      : geometry(g), num_classes(classes), labels(g.area(), fill) {}

  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * geometry.width + x]; }
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * geometry.width + x]; }
  std::vector<std::uint8_t>& buffer() { return labels; }
  const std::vector<std::uint8_t>& buffer() const { return labels; }
  bool operator==(const LabelMap&) const = default;

  void validate() const {
    if (labels.size() != geometry.area()) throw Error(Errc::ShapeMismatch, "label buffer size");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes) {
        throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[i]) + " at pixel " +
                                               std::to_string(i) + " with C=" + std::to_string(num_classes));
      }
    }
  }
};

namespace detail {

struct PgmData {
  Geometry geometry;
  int maxval = 0;
  std::vector<std::uint8_t> pixels;
};

inline PgmData parse_pgm(std::span<const std::uint8_t> bytes, const std::string& where) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> int {
    skip_ws();
    long v = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && v < 1'000'000) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw Error(Errc::BadMagic, where + ": malformed PGM header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(Errc::BadMagic, where + ": expected P5");
  pos = 2;
  PgmData d;
  d.geometry.width = read_uint();
  d.geometry.height = read_uint();
  d.maxval = read_uint();
  if (d.maxval < 1 || d.maxval > 255) throw Error(Errc::BadMagic, where + ": unsupported maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(Errc::BadMagic, where + ": malformed PGM header");
  ++pos;
  if (bytes.size() - pos < d.geometry.area()) throw Error(Errc::TruncatedStream, where + ": PGM pixel data");
  d.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + d.geometry.area()));
  return d;
}

inline std::vector<std::uint8_t> encode_pgm(Geometry g, int maxval, std::span<const std::uint8_t> pixels) {
  const std::string header = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n" +
                             std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace detail

inline Image read_image_pgm(const std::filesystem::path& path) {
  auto d = detail::parse_pgm(io::read_file(path), path.string());
  Image img;
  img.geometry = d.geometry;
  img.pixels = std::move(d.pixels);
  return img;
}

inline void write_image_pgm(const std::filesystem::path& path, const Image& img) {
  io::write_file(path, detail::encode_pgm(img.geometry, 255, img.pixels));
}

// Label maps are stored with maxval = C - 1, so C is recovered on read.
inline LabelMap read_labels_pgm(const std::filesystem::path& path) {
  auto d = detail::parse_pgm(io::read_file(path), path.string());
  LabelMap m;
  m.geometry = d.geometry;
  m.num_classes = d.maxval + 1;
  m.labels = std::move(d.pixels);
  m.validate();
  return m;
}

inline void write_labels_pgm(const std::filesystem::path& path, const LabelMap& m) {
  if (m.num_classes < 2 || m.num_classes > 256) {
    throw Error(Errc::LabelOutOfRange, path.string() + ": PGM label maps need 2..256 classes");
  }
  io::write_file(path, detail::encode_pgm(m.geometry, m.num_classes - 1, m.labels));
}

}  // namespace spikeseg
