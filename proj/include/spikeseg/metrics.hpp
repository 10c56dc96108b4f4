#pragma once

// Confusion matrices, MIoU, throughput and flop aggregation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/image.hpp"
#include "spikeseg/snn/flops.hpp"

namespace spikeseg {

// Row = ground truth, column = prediction. Merging is element-wise addition,
// so shards of an evaluation can be combined in any order.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return classes_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::uint64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t row_sum(int c) const {
    std::uint64_t t = 0;
    for (int p = 0; p < classes_; ++p) t += at(c, p);
    return t;
  }
  std::uint64_t col_sum(int c) const {
    std::uint64_t t = 0;
    for (int g = 0; g < classes_; ++g) t += at(g, c);
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes_ != classes_) throw Error(Errc::ShapeMismatch, "merging confusion matrices of different C");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix& accumulate_confusion(const LabelMap& gt, const LabelMap& pred, ConfusionMatrix& cm) {
  if (gt.geometry != pred.geometry) {
    throw Error(Errc::ShapeMismatch, "gt " + to_string(gt.geometry) + " vs pred " + to_string(pred.geometry));
  }
  if (gt.num_classes != cm.num_classes() || pred.num_classes != cm.num_classes()) {
    throw Error(Errc::ShapeMismatch, "class counts gt=" + std::to_string(gt.num_classes) + " pred=" +
                                         std::to_string(pred.num_classes) + " cm=" + std::to_string(cm.num_classes()));
  }
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g >= cm.num_classes() || p >= cm.num_classes()) {
      throw Error(Errc::LabelOutOfRange, "pixel " + std::to_string(i) + ": gt " + std::to_string(g) + " pred " + std::to_string(p));
    }
    ++cm.at(g, p);
  }
  return cm;
}

// TP / (TP + FP + FN) per class; nullopt when the class has zero union.
inline std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t uni = cm.row_sum(c) + cm.col_sum(c) - tp;
    if (uni == 0) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(static_cast<double>(tp) / static_cast<double>(uni));
    }
  }
  return out;
}

// Mean IoU over classes with a non-empty union.
inline double miou(const ConfusionMatrix& cm) {
  double sum = 0;
  int n = 0;
  for (const auto& iou : per_class_iou(cm)) {
    if (iou) {
      sum += *iou;
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::NoValidClasses, "every class has an empty union");
  return sum / n;
}

// Per-frame end-to-end segmentation latency in seconds.
struct ThroughputStats {
  std::vector<double> seconds;
};

// Mean of per-frame reciprocal latencies (frames per second).
inline double throughput(const ThroughputStats& s) {
  if (s.seconds.empty()) throw Error(Errc::SequenceTooShort, "no frames timed");
  double sum = 0;
  for (std::size_t i = 0; i < s.seconds.size(); ++i) {
    if (!(s.seconds[i] > 0.0)) throw Error(Errc::ZeroTime, "frame " + std::to_string(i));
    sum += 1.0 / s.seconds[i];
  }
  return sum / static_cast<double>(s.seconds.size());
}

inline double mean_latency(const ThroughputStats& s) {
  if (s.seconds.empty()) return 0.0;
  double sum = 0;
  for (double t : s.seconds) sum += t;
  return sum / static_cast<double>(s.seconds.size());
}

// Network flops over every processed region; reused regions add nothing.
inline snn::FlopTotals aggregate_flops(const std::vector<std::vector<snn::LayerFlopSpec>>& processed_regions) {
  snn::FlopTotals t;
  for (const auto& layers : processed_regions) t += snn::total_flops(layers);
  return t;
}

}  // namespace spikeseg
