#pragma once

// Image <-> tensor encoding and single-region inference.

#include <cmath>
#include <cstdint>

#include "spikeseg/image.hpp"
#include "spikeseg/snn/network.hpp"

namespace spikeseg::snn {

// Direct (analog) encoding: intensity / 255, replicated over input channels.
template <class T>
Tensor<T> encode_image(const Image& img, int channels) {
  Tensor<T> t(channels, img.geometry.height, img.geometry.width);
  for (int c = 0; c < channels; ++c) {
    T* dst = t.channel(c);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = static_cast<T>(img.pixels[i]) / T(255);
  }
  return t;
}

// Per-pixel argmax; ties go to the lower class id.
template <class T>
LabelMap argmax_labels(const Tensor<T>& scores) {
  LabelMap m({scores.w, scores.h}, scores.c);
  const std::size_t n = scores.plane();
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    T best_v = scores.v[i];
    for (int c = 1; c < scores.c; ++c) {
      const T v = scores.v[c * n + i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    m.labels[i] = static_cast<std::uint8_t>(best);
  }
  return m;
}

struct Segmentation {
  Tensor<float> scores;
  LabelMap labels;
  SpikeTrace trace;
};

// Inference on one region with a (typically BN-folded) network.
inline Segmentation forward_segment(const Image& region, Network<float>& net) {
  RunOptions opts;
  opts.record_trace = true;
  auto res = net.forward({encode_image<float>(region, net.spec().in_channels)}, opts);
  Segmentation out;
  out.scores = std::move(res.scores.front());
  for (const float v : out.scores.v) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "non-finite class score");
  }
  out.labels = argmax_labels(out.scores);
  out.trace = std::move(res.traces.front());
  return out;
}

}  // namespace spikeseg::snn
