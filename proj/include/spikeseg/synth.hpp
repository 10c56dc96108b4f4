#pragma once

// Synthetic moving-primitive scenes: rendered frames, ground-truth labels,
// log-intensity events between frames and exact displacement fields.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikeseg/config.hpp"
#include "spikeseg/error.hpp"
#include "spikeseg/event_core.hpp"
#include "spikeseg/flow.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/image.hpp"
#include "spikeseg/rng.hpp"

namespace spikeseg {

enum class Shape { Rect, Disk };

struct Bounds {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// A rectangle (width x height) or a disk (diameter width) whose top-left
// corner starts at (x, y) and moves by (vx, vy) pixels per frame, bouncing
// off the edges of its bounds (the frame unless given).
struct Primitive {
  Shape shape = Shape::Rect;
  int class_id = 1;
  double x = 0, y = 0;
  int width = 1, height = 1;
  double vx = 0, vy = 0;
  int intensity = -1;  // -1: class default
  std::optional<Bounds> bounds;
};

struct SceneSpec {
  Geometry geometry{64, 64};
  int num_classes = 4;
  int background = 30;
  int frames = 10;
  double c_ev = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t frame_interval_us = 50'000;
  std::vector<Primitive> primitives;
  // Extra primitives drawn from the seed: random class, size and velocity.
  int random_primitives = 0;
  int random_min_size = 12;
  int random_max_size = 24;
  double random_max_speed = 3.0;

  // Default intensity per class, evenly spread from the background to 230.
  int class_intensity(int c) const {
    if (c == 0) return background;
    return background + static_cast<int>(std::lround((230.0 - background) * c / (num_classes - 1)));
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::SpecInvalid, m); };
    if (geometry.width < 1 || geometry.height < 1 || geometry.width > 0xFFFF || geometry.height > 0xFFFF) {
      bad("geometry " + to_string(geometry));
    }
    if (num_classes < 2 || num_classes > 256) bad("classes must be in [2, 256]");
    if (frames < 1) bad("frames must be >= 1");
    if (!(c_ev > 0.0) || !std::isfinite(c_ev)) bad("c_ev must be > 0");
    if (background < 0 || background > 255) bad("background intensity");
    if (frame_interval_us < 1) bad("frame_interval_us must be >= 1");
    if (random_primitives < 0 || random_min_size < 1 || random_max_size < random_min_size) bad("random primitive ranges");
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      const auto& p = primitives[i];
      const std::string tag = "primitive " + std::to_string(i + 1) + ": ";
      if (p.class_id < 1 || p.class_id >= num_classes) bad(tag + "class out of range");
      if (p.width < 1 || p.height < 1) bad(tag + "size must be positive");
      if (p.intensity > 255) bad(tag + "intensity");
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.vx) || !std::isfinite(p.vy)) {
        bad(tag + "non-finite position or velocity");
      }
      const Bounds b = p.bounds.value_or(Bounds{0, 0, geometry.width, geometry.height});
      if (b.x0 < 0 || b.y0 < 0 || b.x1 > geometry.width || b.y1 > geometry.height) bad(tag + "bounds outside frame");
      const int h = p.shape == Shape::Disk ? p.width : p.height;
      if (b.x1 - b.x0 < p.width || b.y1 - b.y0 < h) bad(tag + "does not fit its bounds");
    }
  }

  static SceneSpec from_config(const Config& c) {
    SceneSpec s;
    s.geometry.width = c.require<int>("scene.width");
    s.geometry.height = c.require<int>("scene.height");
    s.num_classes = c.get<int>("scene.classes", 4);
    s.background = c.get<int>("scene.background", 30);
    s.frames = c.require<int>("scene.frames");
    s.c_ev = c.get<double>("scene.c_ev", 0.05);
    s.seed = c.get<std::uint64_t>("scene.seed", 1);
    s.frame_interval_us = c.get<std::uint64_t>("scene.frame_interval_us", 50'000);
    s.random_primitives = c.get<int>("scene.random_primitives", 0);
    s.random_min_size = c.get<int>("scene.random_min_size", 12);
    s.random_max_size = c.get<int>("scene.random_max_size", 24);
    s.random_max_speed = c.get<double>("scene.random_max_speed", 3.0);
    for (const auto& sec : c.sections()) {
      if (sec.rfind("primitive", 0) != 0) continue;
      Primitive p;
      const auto shape = c.get<std::string>(sec + ".shape", "rect");
      if (shape != "rect" && shape != "disk") throw Error(Errc::SpecInvalid, sec + ": shape " + shape);
      p.shape = shape == "rect" ? Shape::Rect : Shape::Disk;
      p.class_id = c.require<int>(sec + ".class");
      p.x = c.require<double>(sec + ".x");
      p.y = c.require<double>(sec + ".y");
      p.width = c.require<int>(sec + ".width");
      p.height = p.shape == Shape::Disk ? p.width : c.require<int>(sec + ".height");
      p.vx = c.get<double>(sec + ".vx", 0.0);
      p.vy = c.get<double>(sec + ".vy", 0.0);
      p.intensity = c.get<int>(sec + ".intensity", -1);
      if (c.has(sec + ".bounds")) {
        const auto raw = c.get<std::string>(sec + ".bounds", "");
        Bounds b;
        if (std::sscanf(raw.c_str(), "%d,%d,%d,%d", &b.x0, &b.y0, &b.x1, &b.y1) != 4) {
          throw Error(Errc::SpecInvalid, sec + ": bounds must be x0,y0,x1,y1");
        }
        p.bounds = b;
      }
      s.primitives.push_back(p);
    }
    s.validate();
    return s;
  }
};

struct Sequence {
  SceneSpec spec;
  std::vector<Image> frames;
  std::vector<LabelMap> labels;
  // events[i] covers [t_{i-1}, t_i); events[0] is empty.
  std::vector<EventWindow> events;
  // flows[i] maps frame i-1 to frame i (backward: pixel q of frame i came
  // from q - flow(q)); flows[0] is zero.
  std::vector<FlowField> flows;

  std::uint64_t frame_time(int i) const { return static_cast<std::uint64_t>(i) * spec.frame_interval_us; }
};

namespace detail {

// Reflecting motion of a coordinate inside [lo, lo + range].
inline int bounce(double start, double velocity, int frame, int lo, int range) {
  if (range <= 0) return lo;
  double q = start - lo + velocity * frame;
  const double period = 2.0 * range;
  q = std::fmod(q, period);
  if (q < 0) q += period;
  const double pos = q <= range ? q : period - q;
  return lo + static_cast<int>(std::floor(pos + 0.5));
}

struct Placed {
  int x, y;
};

inline Placed place(const Primitive& p, int frame, Geometry g) {
  const Bounds b = p.bounds.value_or(Bounds{0, 0, g.width, g.height});
  return {bounce(p.x, p.vx, frame, b.x0, b.x1 - b.x0 - p.width),
          bounce(p.y, p.vy, frame, b.y0, b.y1 - b.y0 - p.height)};
}

inline bool covers(const Primitive& p, Placed at, int px, int py) {
  if (px < at.x || py < at.y || px >= at.x + p.width || py >= at.y + p.height) return false;
  if (p.shape == Shape::Rect) return true;
  const double r = p.width / 2.0;
  const double dx = px + 0.5 - (at.x + r);
  const double dy = py + 0.5 - (at.y + r);
  return dx * dx + dy * dy <= r * r;
}

// Index of the topmost primitive per pixel, -1 for background.
inline std::vector<int> owners(const std::vector<Primitive>& prims, int frame, Geometry g) {
  std::vector<int> own(g.area(), -1);
  for (std::size_t k = 0; k < prims.size(); ++k) {
    const auto at = place(prims[k], frame, g);
    const int y_end = std::min(g.height, at.y + prims[k].height);
    const int x_end = std::min(g.width, at.x + prims[k].width);
    for (int y = std::max(0, at.y); y < y_end; ++y) {
      for (int x = std::max(0, at.x); x < x_end; ++x) {
        if (covers(prims[k], at, x, y)) own[static_cast<std::size_t>(y) * g.width + x] = static_cast<int>(k);
      }
    }
  }
  return own;
}

inline std::vector<Primitive> all_primitives(const SceneSpec& s) {
  std::vector<Primitive> prims = s.primitives;
  Rng rng(s.seed);
  for (int i = 0; i < s.random_primitives; ++i) {
    Primitive p;
    p.shape = rng.uniform() < 0.5 ? Shape::Rect : Shape::Disk;
    p.class_id = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.num_classes - 1)));
    const int span = s.random_max_size - s.random_min_size + 1;
    p.width = std::min(s.geometry.width, s.random_min_size + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
    p.height = p.shape == Shape::Disk ? p.width
                                      : std::min(s.geometry.height,
                                                 s.random_min_size + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
    if (p.shape == Shape::Disk) p.width = p.height = std::min({p.width, s.geometry.width, s.geometry.height});
    p.x = std::floor(rng.uniform(0, std::max(1, s.geometry.width - p.width)));
    p.y = std::floor(rng.uniform(0, std::max(1, s.geometry.height - p.height)));
    p.vx = std::round(rng.uniform(-s.random_max_speed, s.random_max_speed));
    p.vy = std::round(rng.uniform(-s.random_max_speed, s.random_max_speed));
    prims.push_back(p);
  }
  return prims;
}

}  // namespace detail

// Events for one pixel whose intensity goes from a to b: floor(|dlog| / c_ev)
// events, evenly spaced inside [t0, t1), polarity = sign of the change.
inline int event_count(int a, int b, double c_ev) {
  const double d = std::abs(std::log(b + 1.0) - std::log(a + 1.0));
  return static_cast<int>(std::floor(d / c_ev + 1e-9));
}

inline Sequence render_sequence(const SceneSpec& spec) {
  spec.validate();
  const Geometry g = spec.geometry;
  const auto prims = detail::all_primitives(spec);
  Sequence seq;
  seq.spec = spec;

  std::vector<std::vector<int>> own(static_cast<std::size_t>(spec.frames));
  std::vector<std::vector<detail::Placed>> placed(static_cast<std::size_t>(spec.frames));
  for (int i = 0; i < spec.frames; ++i) {
    const auto fi = static_cast<std::size_t>(i);
    own[fi] = detail::owners(prims, i, g);
    for (const auto& p : prims) placed[fi].push_back(detail::place(p, i, g));
    Image img(g, static_cast<std::uint8_t>(spec.background));
    LabelMap lab(g, spec.num_classes, 0);
    for (std::size_t px = 0; px < g.area(); ++px) {
      const int k = own[fi][px];
      if (k < 0) continue;
      const auto& p = prims[static_cast<std::size_t>(k)];
      img.pixels[px] = static_cast<std::uint8_t>(p.intensity >= 0 ? p.intensity : spec.class_intensity(p.class_id));
      lab.labels[px] = static_cast<std::uint8_t>(p.class_id);
    }
    seq.frames.push_back(std::move(img));
    seq.labels.push_back(std::move(lab));
  }

  for (int i = 0; i < spec.frames; ++i) {
    const auto fi = static_cast<std::size_t>(i);
    EventWindow w;
    w.geometry = g;
    FlowField flow(g);
    if (i > 0) {
      const std::uint64_t t0 = seq.frame_time(i - 1);
      const std::uint64_t dt = spec.frame_interval_us;
      w.t_start = t0;
      w.t_end = t0 + dt;
      const auto& prev = seq.frames[fi - 1].pixels;
      const auto& cur = seq.frames[fi].pixels;
      for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
          const std::size_t px = static_cast<std::size_t>(y) * g.width + x;
          const int k = event_count(prev[px], cur[px], spec.c_ev);
          const int pol = cur[px] > prev[px] ? 1 : -1;
          for (int j = 0; j < k; ++j) {
            const std::uint64_t t = t0 + (static_cast<std::uint64_t>(j) + 1) * dt / (static_cast<std::uint64_t>(k) + 1);
            w.events.push_back({t, x, y, pol});
          }
          // Primitive pixels move with their primitive; background uncovered
          // by a primitive points past it, to where the background was.
          int owner = own[fi][px];
          if (owner < 0) owner = own[fi - 1][px];
          if (owner >= 0) {
            const auto ko = static_cast<std::size_t>(owner);
            flow.flow[px] = {static_cast<float>(placed[fi][ko].x - placed[fi - 1][ko].x),
                             static_cast<float>(placed[fi][ko].y - placed[fi - 1][ko].y)};
          }
        }
      }
      std::stable_sort(w.events.begin(), w.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    }
    seq.events.push_back(std::move(w));
    seq.flows.push_back(std::move(flow));
  }
  return seq;
}

}  // namespace spikeseg
