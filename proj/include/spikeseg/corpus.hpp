#pragma once

// Frame sequences on disk: one manifest line per frame,
//   <frame.pgm> <events.evt> [<labels.pgm>|-] [<flow.flw>|-]
// with paths relative to the manifest. Events files hold the window since
// the previous frame; the flow file maps the previous frame to this one.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/event_core.hpp"
#include "spikeseg/flow.hpp"
#include "spikeseg/image.hpp"
#include "spikeseg/io.hpp"
#include "spikeseg/synth.hpp"

namespace spikeseg {

struct FrameData {
  Image frame;
  EventWindow events;
  std::optional<LabelMap> ground_truth;
  std::optional<FlowField> flow;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual FrameData load(std::size_t index) const = 0;
  virtual bool has_flow(std::size_t index) const = 0;
};

class InMemorySource final : public FrameSource {
 public:
  explicit InMemorySource(const Sequence& seq, bool with_flow = true) : seq_(&seq), with_flow_(with_flow) {}

  std::size_t size() const override { return seq_->frames.size(); }
  bool has_flow(std::size_t i) const override { return with_flow_ && i < seq_->flows.size(); }
  FrameData load(std::size_t i) const override {
    FrameData d{seq_->frames[i], seq_->events[i], seq_->labels[i], std::nullopt};
    if (has_flow(i)) d.flow = seq_->flows[i];
    return d;
  }

 private:
  const Sequence* seq_;
  bool with_flow_;
};

struct ManifestEntry {
  std::filesystem::path frame;
  std::filesystem::path events;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> flow;
};

class ManifestSource final : public FrameSource {
 public:
  explicit ManifestSource(const std::filesystem::path& manifest) : manifest_(manifest) {
    if (!std::filesystem::exists(manifest)) throw Error(Errc::IoFailure, "missing manifest " + manifest.string());
    const auto base = manifest.parent_path();
    std::istringstream in(io::read_text(manifest));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      std::vector<std::string> tok;
      for (std::string t; fields >> t;) tok.push_back(t);
      if (tok.empty()) continue;
      if (tok.size() < 2 || tok.size() > 4) {
        throw Error(Errc::MalformedLine, manifest.string() + " line " + std::to_string(line_no));
      }
      ManifestEntry e;
      e.frame = base / tok[0];
      e.events = base / tok[1];
      if (tok.size() > 2 && tok[2] != "-") e.labels = base / tok[2];
      if (tok.size() > 3 && tok[3] != "-") e.flow = base / tok[3];
      entries_.push_back(std::move(e));
    }
  }

  std::size_t size() const override { return entries_.size(); }
  bool has_flow(std::size_t i) const override { return entries_.at(i).flow.has_value(); }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const std::filesystem::path& path() const { return manifest_; }

  FrameData load(std::size_t i) const override {
    const auto& e = entries_.at(i);
    FrameData d;
    d.frame = read_image_pgm(require(e.frame));
    try {
      d.events = parse_events_binary(io::read_file(require(e.events)), true);
    } catch (const Error& err) {
      if (err.code() == Errc::IoFailure) throw;
      throw Error(err.code(), e.events.string() + ": " + err.context());
    }
    if (d.events.geometry != d.frame.geometry) {
      throw Error(Errc::ShapeMismatch, e.events.string() + ": geometry " + to_string(d.events.geometry));
    }
    if (e.labels) d.ground_truth = read_labels_pgm(require(*e.labels));
    if (e.flow) {
      try {
        d.flow = parse_flow(io::read_file(require(*e.flow)));
      } catch (const Error& err) {
        if (err.code() == Errc::IoFailure) throw;
        throw Error(err.code(), e.flow->string() + ": " + err.context());
      }
    }
    return d;
  }

 private:
  static const std::filesystem::path& require(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw Error(Errc::IoFailure, "missing file " + p.string());
    return p;
  }

  std::filesystem::path manifest_;
  std::vector<ManifestEntry> entries_;
};

// Writes frames, labels, EVT1 events and FLW1 flows plus manifest.txt into
// dir, returning the manifest path.
inline std::filesystem::path write_corpus(const Sequence& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"frames", "labels", "events", "flows"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  std::string manifest;
  char name[64];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "%05zu", i);
    const std::string frame = "frames/frame_" + std::string(name) + ".pgm";
    const std::string labels = "labels/labels_" + std::string(name) + ".pgm";
    const std::string events = "events/events_" + std::string(name) + ".evt";
    const std::string flow = "flows/flow_" + std::string(name) + ".flw";
    write_image_pgm(dir / frame, seq.frames[i]);
    write_labels_pgm(dir / labels, seq.labels[i]);
    io::write_file(dir / events, write_events_binary(seq.events[i]));
    std::string flow_field = "-";
    if (i > 0) {
      io::write_file(dir / flow, write_flow(seq.flows[i]));
      flow_field = flow;
    }
    manifest += frame + " " + events + " " + labels + " " + flow_field + "\n";
  }
  const auto path = dir / "manifest.txt";
  io::write_text(path, manifest);
  return path;
}

}  // namespace spikeseg
