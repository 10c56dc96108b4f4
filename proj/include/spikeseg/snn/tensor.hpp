#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"

namespace spikeseg::snn {

// Dense channels x height x width activation map.
template <class T>
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  T* channel(int ch) { return v.data() + ch * plane(); }
  const T* channel(int ch) const { return v.data() + ch * plane(); }
  T& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  const T& at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace spikeseg::snn
