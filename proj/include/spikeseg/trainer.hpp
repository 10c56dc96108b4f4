#pragma once

// Training loop over a labelled corpus: fixed random crops from the first
// part of the sequence, held-out evaluation through the gated pipeline at
// theta = 0 on the remaining frames.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "spikeseg/corpus.hpp"
#include "spikeseg/gate_pipeline.hpp"
#include "spikeseg/region_grid.hpp"
#include "spikeseg/rng.hpp"
#include "spikeseg/snn/train.hpp"

namespace spikeseg {

struct TrainConfig {
  int epochs = 30;
  double lr = 0.02;
  int batch = 4;
  int samples = 400;  // crops drawn once from the training frames
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  // Held-out evaluation layout.
  int eval_rows = 1;
  int eval_cols = 3;
  int eval_overlap = 20;

  void validate() const {
    if (epochs < 0) throw Error(Errc::ConfigInvalid, "epochs must be >= 0");
    if (!(lr >= 0) || !std::isfinite(lr)) throw Error(Errc::ConfigInvalid, "lr must be finite and >= 0");
    if (batch < 1) throw Error(Errc::ConfigInvalid, "batch must be >= 1");
    if (samples < batch) throw Error(Errc::ConfigInvalid, "samples must be >= batch");
    if (!(train_fraction > 0 && train_fraction < 1)) throw Error(Errc::ConfigInvalid, "train_fraction must be in (0, 1)");
  }
};

struct EpochLog {
  int epoch = 0;  // 0 is the untrained network
  double loss = 0.0;
  std::optional<double> heldout_miou;
  double activation_rate = 0.0;
};

struct TrainResult {
  snn::Network<float> net;
  std::vector<EpochLog> log;
};

// Frames [0, split) train, [split, N) are held out.
inline std::size_t train_split(std::size_t frames, double fraction) {
  const auto split = static_cast<std::size_t>(std::floor(static_cast<double>(frames) * fraction));
  return std::clamp<std::size_t>(split, 1, frames > 1 ? frames - 1 : 1);
}

class HeldOutSource final : public FrameSource {
 public:
  HeldOutSource(const FrameSource& base, std::size_t first) : base_(&base), first_(first) {}
  std::size_t size() const override { return base_->size() - first_; }
  bool has_flow(std::size_t i) const override { return base_->has_flow(first_ + i); }
  FrameData load(std::size_t i) const override { return base_->load(first_ + i); }

 private:
  const FrameSource* base_;
  std::size_t first_;
};

inline std::optional<double> evaluate_heldout(const FrameSource& source, const TrainConfig& cfg,
                                              const snn::Network<float>& net, double* activation = nullptr) {
  const std::size_t split = train_split(source.size(), cfg.train_fraction);
  if (split >= source.size()) return std::nullopt;
  GateConfig g;
  g.theta = 0.0;
  g.rows = cfg.eval_rows;
  g.cols = cfg.eval_cols;
  g.overlap = cfg.eval_overlap;
  const auto rep = run_sequence(HeldOutSource(source, split), g, net.folded());
  if (activation != nullptr) *activation = rep.activation_rate;
  return rep.miou;
}

// Draws cfg.samples crops of the network's training size from the training
// frames. Frames smaller than that size are used whole.
inline std::vector<snn::Sample> draw_samples(const FrameSource& source, const TrainConfig& cfg,
                                             const snn::NetworkSpec& spec) {
  const std::size_t split = train_split(source.size(), cfg.train_fraction);
  std::vector<FrameData> frames;
  frames.reserve(split);
  for (std::size_t i = 0; i < split; ++i) {
    frames.push_back(source.load(i));
    if (!frames.back().ground_truth) {
      throw Error(Errc::ConfigInvalid, "training needs labels; frame " + std::to_string(i) + " has none");
    }
  }
  Rng rng(cfg.seed ^ 0x5eedc0ffee);
  std::vector<snn::Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.samples));
  for (int k = 0; k < cfg.samples; ++k) {
    const auto& f = frames[rng.below(frames.size())];
    const Geometry g = f.frame.geometry;
    const int w = spec.train_width > 0 ? std::min(spec.train_width, g.width) : g.width;
    const int h = spec.train_height > 0 ? std::min(spec.train_height, g.height) : g.height;
    const Region r{static_cast<int>(rng.below(static_cast<std::uint64_t>(g.width - w + 1))),
                   static_cast<int>(rng.below(static_cast<std::uint64_t>(g.height - h + 1))), w, h, 0};
    out.push_back({crop(f.frame, r), crop(*f.ground_truth, r)});
  }
  return out;
}

// Batches keep a fixed composition; only their order is shuffled each epoch.
// Epoch losses are summed in batch order so lr = 0 gives an exactly flat
// curve.
inline TrainResult train(const FrameSource& source, const snn::NetworkSpec& spec, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (source.size() < 2) throw Error(Errc::SequenceTooShort, "training needs at least 2 frames");
  TrainResult res{snn::Network<float>(spec, cfg.seed), {}};
  const auto samples = draw_samples(source, cfg, spec);
  for (const auto& s : samples) {
    if (s.labels.num_classes > spec.num_classes) {
      throw Error(Errc::LabelOutOfRange, "corpus has " + std::to_string(s.labels.num_classes) + " classes, network " +
                                             std::to_string(spec.num_classes));
    }
  }
  const std::size_t n_batches = samples.size() / static_cast<std::size_t>(cfg.batch);
  std::vector<std::vector<snn::Sample>> batches(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    batches[b].assign(samples.begin() + static_cast<std::ptrdiff_t>(b * cfg.batch),
                      samples.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg.batch));
  }

  auto log_epoch = [&](int epoch, double loss) {
    EpochLog e;
    e.epoch = epoch;
    e.loss = loss;
    e.heldout_miou = evaluate_heldout(source, cfg, res.net, &e.activation_rate);
    res.log.push_back(e);
    if (on_epoch) on_epoch(e);
  };

  {
    double sum = 0;
    for (const auto& b : batches) {
      std::vector<snn::Tensor<float>> inputs;
      std::vector<LabelMap> labels;
      for (const auto& s : b) {
        inputs.push_back(snn::encode_image<float>(s.image, spec.in_channels));
        labels.push_back(s.labels);
      }
      auto probe = res.net;  // BN running statistics stay untouched
      sum += snn::batch_loss(probe, inputs, labels, false);
    }
    log_epoch(0, sum / static_cast<double>(n_batches));
  }

  snn::Adam<float> opt({cfg.lr});
  Rng order_rng(cfg.seed ^ 0x0bade5);
  std::vector<std::size_t> order(n_batches);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    std::vector<double> losses(n_batches);
    for (const std::size_t b : order) {
      try {
        losses[b] = snn::train_step(batches[b], res.net, opt);
      } catch (const Error& e) {
        if (e.code() != Errc::NonFiniteLoss) throw;
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.context());
      }
    }
    double sum = 0;
    for (double l : losses) sum += l;
    log_epoch(epoch, sum / static_cast<double>(n_batches));
  }
  return res;
}

}  // namespace spikeseg
