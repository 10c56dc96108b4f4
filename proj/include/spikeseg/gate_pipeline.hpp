#pragma once

// Event-density gating over a region grid: each region is re-segmented only
// when enough events arrived since its keyframe, otherwise the cached labels
// are reused (copied, or warped along optical flow).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spikeseg/corpus.hpp"
#include "spikeseg/error.hpp"
#include "spikeseg/event_core.hpp"
#include "spikeseg/metrics.hpp"
#include "spikeseg/region_grid.hpp"
#include "spikeseg/snn/segment.hpp"
#include "spikeseg/warp.hpp"

namespace spikeseg {

enum class Decision { Process, Reuse };
enum class DensityInterval { SinceKeyframe, PreviousFrame };
enum class ReuseMode { Copy, Warp };

inline const char* to_string(ReuseMode m) { return m == ReuseMode::Copy ? "copy" : "warp"; }

struct GateConfig {
  double theta = 0.0;  // events per pixel; +inf processes reset frames only
  int reset_period = 5;
  int rows = 1;
  int cols = 3;
  int overlap = 20;
  DensityInterval interval = DensityInterval::SinceKeyframe;
  ReuseMode reuse = ReuseMode::Copy;
  int threads = 1;

  void validate() const {
    if (std::isnan(theta) || theta < 0) throw Error(Errc::ConfigInvalid, "theta must be >= 0");
    if (reset_period < 1) throw Error(Errc::ConfigInvalid, "reset_period must be >= 1");
    if (threads < 1) throw Error(Errc::ConfigInvalid, "threads must be >= 1");
    if (rows < 1 || cols < 1) throw Error(Errc::ConfigInvalid, "grid must be at least 1x1");
    if (overlap < 0) throw Error(Errc::ConfigInvalid, "overlap must be >= 0");
  }

  bool is_reset(std::size_t frame_index) const { return frame_index % static_cast<std::size_t>(reset_period) == 0; }
  std::string grid_name() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

inline Decision decide(double density, const GateConfig& cfg, bool is_reset_frame) {
  return (is_reset_frame || density >= cfg.theta) ? Decision::Process : Decision::Reuse;
}

struct CacheEntry {
  std::optional<LabelMap> labels;
  double priority = 0.0;
  std::optional<std::size_t> frame_index;  // last PROCESS frame
  std::uint64_t pending_events = 0;         // events since that frame
};

struct KeyframeCache {
  std::vector<CacheEntry> entries;
  std::size_t frame_counter = 0;
};

struct RegionDecision {
  Decision decision = Decision::Process;
  double density = 0.0;
};

struct FrameDecision {
  std::vector<RegionDecision> regions;

  std::size_t processed() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.decision == Decision::Process ? 1 : 0;
    return n;
  }
  std::size_t reused() const { return regions.size() - processed(); }
};

struct MetricsSample {
  double seconds = 0.0;
  snn::FlopTotals flops;
  std::vector<std::vector<snn::LayerFlopSpec>> layers;  // one entry per processed region
  std::uint64_t neurons = 0;
  std::uint64_t fired = 0;
};

struct FrameResult {
  LabelMap labels;
  FrameDecision decision;
  MetricsSample metrics;
};

// Stateful per-sequence pipeline. Frames must arrive in order.
class GatePipeline {
 public:
  GatePipeline(const snn::Network<float>& net, GateConfig cfg, Geometry geometry)
      : cfg_(std::move(cfg)), grid_(build_grid(geometry, cfg_.rows, cfg_.cols, cfg_.overlap)) {
    cfg_.validate();
    const auto deployed = net.is_folded() ? net : net.folded();
    workers_.assign(static_cast<std::size_t>(cfg_.threads), deployed);
    cache_.entries.resize(grid_.size());
  }

  const GateConfig& config() const { return cfg_; }
  const RegionGrid& grid() const { return grid_; }
  const KeyframeCache& cache() const { return cache_; }

  FrameResult process_frame(const Image& frame, const EventWindow& events, const FlowField* flow = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    if (frame.geometry != grid_.geometry) {
      throw Error(Errc::ShapeMismatch, "frame " + to_string(frame.geometry) + " vs grid " + to_string(grid_.geometry));
    }
    if (events.geometry != grid_.geometry) {
      throw Error(Errc::ShapeMismatch, "events " + to_string(events.geometry) + " vs grid " + to_string(grid_.geometry));
    }
    const std::size_t index = cache_.frame_counter;
    const bool reset = cfg_.is_reset(index);
    const auto density = accumulate_density(events);

    FrameResult out;
    out.decision.regions.resize(grid_.size());
    std::vector<double> frame_density(grid_.size());
    std::vector<std::size_t> to_process;
    for (std::size_t r = 0; r < grid_.size(); ++r) {
      const Region& reg = grid_[r];
      auto& entry = cache_.entries[r];
      const std::uint64_t window_events = region_count(density, reg);
      frame_density[r] = static_cast<double>(window_events) / static_cast<double>(reg.area());
      entry.pending_events += window_events;
      const double gate_density = cfg_.interval == DensityInterval::SinceKeyframe
                                      ? static_cast<double>(entry.pending_events) / static_cast<double>(reg.area())
                                      : frame_density[r];
      const Decision d = decide(gate_density, cfg_, reset);
      out.decision.regions[r] = {d, gate_density};
      if (d == Decision::Process) {
        to_process.push_back(r);
      } else if (!entry.labels) {
        throw Error(Errc::EmptyCacheReuse, "region " + std::to_string(r) + " at frame " + std::to_string(index));
      }
    }

    std::vector<snn::Segmentation> segs(grid_.size());
    auto run = [&](std::size_t worker) {
      for (std::size_t i = worker; i < to_process.size(); i += workers_.size()) {
        const std::size_t r = to_process[i];
        segs[r] = snn::forward_segment(crop(frame, grid_[r]), workers_[worker]);
      }
    };
    const std::size_t n_workers = std::min(workers_.size(), to_process.size());
    if (n_workers <= 1) {
      run(0);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(n_workers);
      for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            run(w);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    std::vector<RegionLabels> parts;
    parts.reserve(grid_.size());
    for (std::size_t r = 0; r < grid_.size(); ++r) {
      auto& entry = cache_.entries[r];
      if (out.decision.regions[r].decision == Decision::Process) {
        auto& seg = segs[r];
        for (const auto& a : seg.trace.activity) {
          out.metrics.neurons += a.neurons;
          out.metrics.fired += a.fired;
        }
        out.metrics.flops += snn::total_flops(seg.trace.layers);
        out.metrics.layers.push_back(std::move(seg.trace.layers));
        entry.labels = std::move(seg.labels);
        entry.priority = frame_density[r];
        entry.frame_index = index;
        entry.pending_events = 0;
      } else if (cfg_.reuse == ReuseMode::Warp) {
        if (flow == nullptr) throw Error(Errc::MissingFlow, "frame " + std::to_string(index));
        entry.labels = warp_labels(*entry.labels, crop(*flow, grid_[r]));
      }
      parts.push_back({static_cast<int>(r), *entry.labels, entry.priority});
    }
    out.labels = merge_labels(grid_, parts);
    ++cache_.frame_counter;
    out.metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

 private:
  GateConfig cfg_;
  RegionGrid grid_;
  KeyframeCache cache_;
  std::vector<snn::Network<float>> workers_;
};

// A region deviating by more than this fraction from the training size in
// either dimension counts as a dimension mismatch.
inline constexpr double kDimsTolerance = 0.2;

inline bool dims_mismatch(const RegionGrid& grid, const snn::NetworkSpec& spec) {
  if (spec.train_height <= 0 || spec.train_width <= 0) return false;
  for (const auto& r : grid.regions) {
    const double dh = std::abs(r.height - spec.train_height) / static_cast<double>(spec.train_height);
    const double dw = std::abs(r.width - spec.train_width) / static_cast<double>(spec.train_width);
    if (dh > kDimsTolerance || dw > kDimsTolerance) return true;
  }
  return false;
}

struct SequenceReport {
  double theta = 0.0;
  std::string grid;
  ReuseMode reuse = ReuseMode::Copy;
  std::size_t frames = 0;
  std::optional<double> miou;
  double fps = 0.0;
  double mean_latency = 0.0;  // seconds
  snn::FlopTotals flops;
  std::vector<std::uint64_t> processed;  // per region
  std::vector<std::uint64_t> reused;
  double activation_rate = 0.0;
  bool dims_mismatch = false;
  std::vector<double> frame_seconds;

  std::uint64_t total_processed() const {
    std::uint64_t n = 0;
    for (auto v : processed) n += v;
    return n;
  }
};

struct SequenceOptions {
  std::function<void(std::size_t, const LabelMap&)> on_frame;
};

inline SequenceReport run_sequence(const FrameSource& source, const GateConfig& cfg, const snn::Network<float>& net,
                                   const SequenceOptions& opts = {}) {
  cfg.validate();
  if (source.size() < 1) throw Error(Errc::SequenceTooShort, "sequence has no frames");
  if (cfg.reuse == ReuseMode::Warp) {
    for (std::size_t i = 1; i < source.size(); ++i) {
      if (!source.has_flow(i)) throw Error(Errc::MissingFlow, "no flow for transition into frame " + std::to_string(i));
    }
  }
  std::optional<GatePipeline> pipe;
  std::optional<ConfusionMatrix> cm;
  bool have_gt = true;
  SequenceReport rep;
  rep.theta = cfg.theta;
  rep.grid = cfg.grid_name();
  rep.reuse = cfg.reuse;
  std::uint64_t neurons = 0, fired = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const FrameData fd = source.load(i);
    if (!pipe) {
      pipe.emplace(net, cfg, fd.frame.geometry);
      rep.processed.assign(pipe->grid().size(), 0);
      rep.reused.assign(pipe->grid().size(), 0);
      rep.dims_mismatch = dims_mismatch(pipe->grid(), net.spec());
    }
    const bool use_flow = cfg.reuse == ReuseMode::Warp && fd.flow.has_value();
    auto res = pipe->process_frame(fd.frame, fd.events, use_flow ? &*fd.flow : nullptr);
    for (std::size_t r = 0; r < res.decision.regions.size(); ++r) {
      (res.decision.regions[r].decision == Decision::Process ? rep.processed : rep.reused)[r] += 1;
    }
    rep.flops += res.metrics.flops;
    neurons += res.metrics.neurons;
    fired += res.metrics.fired;
    rep.frame_seconds.push_back(res.metrics.seconds);
    if (fd.ground_truth && have_gt) {
      if (!cm) cm.emplace(fd.ground_truth->num_classes);
      accumulate_confusion(*fd.ground_truth, res.labels, *cm);
    } else {
      have_gt = false;
    }
    if (opts.on_frame) opts.on_frame(i, res.labels);
  }
  rep.frames = source.size();
  if (have_gt && cm) rep.miou = miou(*cm);
  rep.fps = throughput({rep.frame_seconds});
  rep.mean_latency = mean_latency({rep.frame_seconds});
  rep.activation_rate = neurons == 0 ? 0.0 : static_cast<double>(fired) / static_cast<double>(neurons);
  return rep;
}

// Same gating as run_sequence; REUSE regions follow the supplied flow.
inline SequenceReport run_sequence_warp(const FrameSource& source, GateConfig cfg, const snn::Network<float>& net,
                                        const SequenceOptions& opts = {}) {
  cfg.reuse = ReuseMode::Warp;
  return run_sequence(source, cfg, net, opts);
}

}  // namespace spikeseg
