#pragma once

// Implementations behind the command-line tool. Each command writes its
// outputs under `out` and returns what it wrote so callers can inspect it.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spikeseg/config.hpp"
#include "spikeseg/corpus.hpp"
#include "spikeseg/gate_pipeline.hpp"
#include "spikeseg/report.hpp"
#include "spikeseg/snn/checkpoint.hpp"
#include "spikeseg/synth.hpp"
#include "spikeseg/trainer.hpp"

namespace spikeseg::cli {

namespace fs = std::filesystem;

struct GridShape {
  int rows = 1;
  int cols = 3;
  std::string name() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

inline GridShape parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t a = 0, b = 0;
    GridShape g{std::stoi(text.substr(0, x), &a), std::stoi(text.substr(x + 1), &b)};
    if (a != x || b != text.size() - x - 1 || g.rows < 1 || g.cols < 1) throw std::invalid_argument(text);
    return g;
  } catch (const std::logic_error&) {
    throw Error(Errc::ConfigInvalid, "grid '" + text + "' is not RxC");
  }
}

inline std::vector<GridShape> parse_grid_list(const std::string& text) {
  std::vector<GridShape> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const auto item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(parse_grid(item));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (out.empty()) throw Error(Errc::ConfigInvalid, "empty grid list");
  return out;
}

inline double parse_theta(const std::string& text) {
  if (text == "inf" || text == "never") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || std::isnan(v) || v < 0) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw Error(Errc::ConfigInvalid, "theta '" + text + "' is not a number >= 0 or inf");
  }
}

inline std::vector<double> parse_theta_list(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const auto end = item.find(',', start);
      const auto tok = item.substr(start, end == std::string::npos ? std::string::npos : end - start);
      if (!tok.empty()) out.push_back(parse_theta(tok));
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  if (out.empty()) throw Error(Errc::ConfigInvalid, "theta list is empty");
  return out;
}

inline std::string theta_name(double theta) {
  if (std::isinf(theta)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", theta);
  return buf;
}

// "reference" and "desk" name the built-in layouts; anything else is a
// network INI file.
inline snn::NetworkSpec resolve_net(const std::string& net, int num_classes) {
  if (net == "reference") return snn::reference_spec(num_classes);
  if (net == "desk") return snn::desk_spec(num_classes);
  if (!fs::exists(net)) throw Error(Errc::IoFailure, "missing network file " + net);
  return snn::NetworkSpec::from_config(Config::load(net));
}

inline int corpus_classes(const FrameSource& src) {
  if (src.size() == 0) throw Error(Errc::SequenceTooShort, "corpus has no frames");
  const auto first = src.load(0);
  if (!first.ground_truth) throw Error(Errc::ConfigInvalid, "corpus has no labels to infer the class count from");
  return first.ground_truth->num_classes;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(Errc::IoFailure, "cannot create " + dir.string());
}

// ---- gen

struct GenOptions {
  fs::path scene;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

inline fs::path cmd_gen(const GenOptions& o) {
  auto spec = SceneSpec::from_config(Config::load(o.scene));
  if (o.seed) spec.seed = *o.seed;
  const auto seq = render_sequence(spec);
  ensure_dir(o.out);
  const auto manifest = write_corpus(seq, o.out);
  io::write_text(o.out / "scene.ini", io::read_text(o.scene));
  return manifest;
}

// ---- train

struct TrainOptions {
  fs::path corpus;
  std::string net = "desk";
  fs::path out;
  TrainConfig train;
};

inline TrainResult cmd_train(const TrainOptions& o, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  const ManifestSource src(o.corpus);
  const auto spec = resolve_net(o.net, corpus_classes(src));
  ensure_dir(o.out);
  auto res = train(src, spec, o.train, on_epoch);
  std::string log = "epoch,loss,heldout_miou,activation_rate\n";
  for (const auto& e : res.log) {
    log += std::to_string(e.epoch) + "," + detail::fmt_double(e.loss) + "," +
           (e.heldout_miou ? detail::fmt_double(*e.heldout_miou) : "") + "," + detail::fmt_double(e.activation_rate) +
           "\n";
  }
  io::write_text(o.out / "train_log.csv", log);
  snn::save_checkpoint(o.out / "model.segw", res.net);
  return res;
}

// ---- run / sweep / ablate-warp

struct EvalOptions {
  fs::path corpus;
  std::optional<fs::path> checkpoint;  // otherwise an untrained `net` seeded with `seed`
  std::string net = "desk";
  std::uint64_t seed = 1;
  fs::path out;
  std::vector<double> thetas{0.0};
  std::vector<GridShape> grids{GridShape{}};
  int overlap = 20;
  int reset_period = 5;
  int threads = 1;
  DensityInterval interval = DensityInterval::SinceKeyframe;
  bool warp = false;  // run only
};

inline snn::Network<float> load_model(const EvalOptions& o, const FrameSource& src) {
  if (o.checkpoint) return snn::load_checkpoint(*o.checkpoint);
  return snn::Network<float>(resolve_net(o.net, corpus_classes(src)), o.seed);
}

inline GateConfig gate_config(const EvalOptions& o, double theta, GridShape g) {
  GateConfig c;
  c.theta = theta;
  c.rows = g.rows;
  c.cols = g.cols;
  c.overlap = (g.rows == 1 && g.cols == 1) ? 0 : o.overlap;
  c.reset_period = o.reset_period;
  c.threads = o.threads;
  c.interval = o.interval;
  return c;
}

// Writes predicted label maps to out/labels and a one-row report.
inline SequenceReport cmd_run(const EvalOptions& o) {
  const ManifestSource src(o.corpus);
  const auto net = load_model(o, src).folded();
  ensure_dir(o.out / "labels");
  auto cfg = gate_config(o, o.thetas.front(), o.grids.front());
  cfg.reuse = o.warp ? ReuseMode::Warp : ReuseMode::Copy;
  SequenceOptions so;
  so.on_frame = [&](std::size_t i, const LabelMap& m) {
    char name[40];
    std::snprintf(name, sizeof name, "pred_%05zu.pgm", i);
    write_labels_pgm(o.out / "labels" / name, m);
  };
  const auto rep = run_sequence(src, cfg, net, so);
  const auto doc = build_report({to_row(rep, o.warp ? "warp" : "gated")});
  io::write_text(o.out / "report.csv", write_report_csv(doc));
  return rep;
}

// Baseline (1x1, theta 0), then per grid a split baseline (theta 0) and one
// row per non-zero theta.
inline Report cmd_sweep(const EvalOptions& o) {
  const ManifestSource src(o.corpus);
  const auto net = load_model(o, src).folded();
  ensure_dir(o.out);
  std::vector<ReportRow> rows;
  rows.push_back(to_row(run_sequence(src, gate_config(o, 0.0, {1, 1}), net), "baseline"));
  for (const auto& g : o.grids) {
    rows.push_back(to_row(run_sequence(src, gate_config(o, 0.0, g), net), "split"));
    for (const double theta : o.thetas) {
      if (theta == 0.0) continue;
      rows.push_back(to_row(run_sequence(src, gate_config(o, theta, g), net), "gated"));
    }
  }
  const auto rep = build_report(std::move(rows));
  io::write_text(o.out / "report.csv", write_report_csv(rep));
  io::write_text(o.out / "report.txt", format_report(rep));
  return rep;
}

inline std::vector<WarpRow> cmd_ablate_warp(const EvalOptions& o) {
  const ManifestSource src(o.corpus);
  for (std::size_t i = 1; i < src.size(); ++i) {
    if (!src.has_flow(i)) throw Error(Errc::MissingFlow, o.corpus.string() + ": frame " + std::to_string(i));
  }
  const auto net = load_model(o, src).folded();
  ensure_dir(o.out);
  std::vector<WarpRow> rows;
  for (const double theta : o.thetas) {
    auto cfg = gate_config(o, theta, o.grids.front());
    const auto up = run_sequence(src, cfg, net);
    const auto of = run_sequence_warp(src, cfg, net);
    rows.push_back({theta, of.miou, of.fps, up.miou, up.fps});
  }
  io::write_text(o.out / "warp.csv", write_warp_csv(rows));
  io::write_text(o.out / "warp.txt", format_warp_report(rows));
  return rows;
}

inline std::string cmd_report(const fs::path& csv) {
  return format_report(parse_report_csv(io::read_text(csv)));
}

}  // namespace spikeseg::cli
