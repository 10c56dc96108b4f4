#pragma once

// Stateless kernels: 2-D convolution, bilinear resize and per-pixel
// cross-entropy, each with its backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spikeseg/snn/tensor.hpp"

namespace spikeseg::snn {

inline int conv_out_extent(int in, int k, int stride) { return (in + 2 * (k / 2) - k) / stride + 1; }

namespace detail {

// Output columns whose input column ox*stride + kx - pad lands in [0, in_w).
inline std::pair<int, int> valid_range(int out_w, int in_w, int kx, int pad, int stride) {
  int lo = 0;
  while (lo < out_w && lo * stride + kx - pad < 0) ++lo;
  int hi = out_w;
  while (hi > lo && (hi - 1) * stride + kx - pad >= in_w) --hi;
  return {lo, hi};
}

}  // namespace detail

// Zero-padded ("same" for stride 1) convolution. weight is [out][in][k][k].
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& in, std::span<const T> weight, const T* bias, int out_c, int k,
                         int stride) {
  const int pad = k / 2;
  const int oh = conv_out_extent(in.h, k, stride);
  const int ow = conv_out_extent(in.w, k, stride);
  if (weight.size() != static_cast<std::size_t>(out_c) * in.c * k * k) {
    throw Error(Errc::ShapeMismatch, "conv weight size for input " + in.shape_string());
  }
  Tensor<T> out(out_c, oh, ow);
  for (int oc = 0; oc < out_c; ++oc) {
    T* dst = out.channel(oc);
    if (bias != nullptr) std::fill(dst, dst + out.plane(), bias[oc]);
    for (int ic = 0; ic < in.c; ++ic) {
      const T* src = in.channel(ic);
      const T* wk = weight.data() + (static_cast<std::size_t>(oc) * in.c + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T wv = wk[ky * k + kx];
          if (wv == T(0)) continue;
          const auto [lo, hi] = detail::valid_range(ow, in.w, kx, pad, stride);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            const T* srow = src + static_cast<std::size_t>(iy) * in.w + kx - pad;
            T* drow = dst + static_cast<std::size_t>(oy) * ow;
            if (stride == 1) {
              for (int ox = lo; ox < hi; ++ox) drow[ox] += wv * srow[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) drow[ox] += wv * srow[ox * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight (and bias) gradients; fills grad_in when non-null.
template <class T>
void conv2d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out, int k, int stride,
                     std::span<T> grad_weight, T* grad_bias, Tensor<T>* grad_in) {
  const int pad = k / 2;
  const int oh = grad_out.h;
  const int ow = grad_out.w;
  if (grad_in != nullptr) *grad_in = Tensor<T>(in.c, in.h, in.w);
  for (int oc = 0; oc < grad_out.c; ++oc) {
    const T* g = grad_out.channel(oc);
    if (grad_bias != nullptr) {
      T s = 0;
      for (std::size_t i = 0; i < grad_out.plane(); ++i) s += g[i];
      grad_bias[oc] += s;
    }
    for (int ic = 0; ic < in.c; ++ic) {
      const T* src = in.channel(ic);
      T* gsrc = grad_in != nullptr ? grad_in->channel(ic) : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(oc) * in.c + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T wv = weight[wbase + ky * k + kx];
          const auto [lo, hi] = detail::valid_range(ow, in.w, kx, pad, stride);
          T acc = 0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            const std::size_t soff = static_cast<std::size_t>(iy) * in.w + kx - pad;
            const T* grow = g + static_cast<std::size_t>(oy) * ow;
            const T* srow = src + soff;
            for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * srow[ox * stride];
            if (gsrc != nullptr && wv != T(0)) {
              T* girow = gsrc + soff;
              for (int ox = lo; ox < hi; ++ox) girow[ox * stride] += wv * grow[ox];
            }
          }
          grad_weight[wbase + ky * k + kx] += acc;
        }
      }
    }
  }
}

// Half-pixel-centred bilinear taps along one axis (align_corners = false).
struct ResizeTap {
  int i0;
  int i1;
  double w0;
  double w1;
};

// factor > 0 fixes the sampling step at 1/factor input cells per output
// pixel, so a feature map of ceil(out / factor) cells stays aligned with its
// receptive fields; factor 0 stretches `in` over `out`.
inline std::vector<ResizeTap> resize_taps(int in, int out, int factor = 0) {
  std::vector<ResizeTap> taps(static_cast<std::size_t>(out));
  const double scale = factor > 0 ? 1.0 / factor : static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double f = src - i0;
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& in, int out_h, int out_w, int factor = 0) {
  const auto ty = resize_taps(in.h, out_h, factor);
  const auto tx = resize_taps(in.w, out_w, factor);
  Tensor<T> out(in.c, out_h, out_w);
  for (int c = 0; c < in.c; ++c) {
    const T* src = in.channel(c);
    T* dst = out.channel(c);
    for (int y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      const T* r0 = src + static_cast<std::size_t>(a.i0) * in.w;
      const T* r1 = src + static_cast<std::size_t>(a.i1) * in.w;
      for (int x = 0; x < out_w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        dst[static_cast<std::size_t>(y) * out_w + x] =
            static_cast<T>(a.w0) * (static_cast<T>(b.w0) * r0[b.i0] + static_cast<T>(b.w1) * r0[b.i1]) +
            static_cast<T>(a.w1) * (static_cast<T>(b.w0) * r1[b.i0] + static_cast<T>(b.w1) * r1[b.i1]);
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& grad_out, int in_h, int in_w, int factor = 0) {
  const auto ty = resize_taps(in_h, grad_out.h, factor);
  const auto tx = resize_taps(in_w, grad_out.w, factor);
  Tensor<T> g(grad_out.c, in_h, in_w);
  for (int c = 0; c < grad_out.c; ++c) {
    const T* src = grad_out.channel(c);
    T* dst = g.channel(c);
    for (int y = 0; y < grad_out.h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      for (int x = 0; x < grad_out.w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const T v = src[static_cast<std::size_t>(y) * grad_out.w + x];
        dst[static_cast<std::size_t>(a.i0) * in_w + b.i0] += static_cast<T>(a.w0 * b.w0) * v;
        dst[static_cast<std::size_t>(a.i0) * in_w + b.i1] += static_cast<T>(a.w0 * b.w1) * v;
        dst[static_cast<std::size_t>(a.i1) * in_w + b.i0] += static_cast<T>(a.w1 * b.w0) * v;
        dst[static_cast<std::size_t>(a.i1) * in_w + b.i1] += static_cast<T>(a.w1 * b.w1) * v;
      }
    }
  }
  return g;
}

// Sum over pixels of -log softmax(scores)[label]. When grad is non-null it
// receives (softmax - onehot) * grad_scale.
template <class T>
double cross_entropy(const Tensor<T>& scores, std::span<const std::uint8_t> labels, Tensor<T>* grad,
                     double grad_scale) {
  if (labels.size() != scores.plane()) throw Error(Errc::ShapeMismatch, "labels vs scores " + scores.shape_string());
  if (grad != nullptr) *grad = Tensor<T>(scores.c, scores.h, scores.w);
  const std::size_t n = scores.plane();
  double total = 0.0;
  std::vector<double> p(static_cast<std::size_t>(scores.c));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label >= scores.c) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label));
    double mx = -INFINITY;
    for (int c = 0; c < scores.c; ++c) mx = std::max(mx, static_cast<double>(scores.v[c * n + i]));
    double z = 0.0;
    for (int c = 0; c < scores.c; ++c) {
      p[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(scores.v[c * n + i]) - mx);
      z += p[static_cast<std::size_t>(c)];
    }
    total += std::log(z) - (static_cast<double>(scores.v[label * n + i]) - mx);
    if (grad != nullptr) {
      for (int c = 0; c < scores.c; ++c) {
        const double sm = p[static_cast<std::size_t>(c)] / z - (c == label ? 1.0 : 0.0);
        grad->v[c * n + i] = static_cast<T>(sm * grad_scale);
      }
    }
  }
  return total;
}

}  // namespace spikeseg::snn
