#pragma once

// Per-layer accumulate / multiply-accumulate operation counts for a spiking
// convolution, given measured input and output spike counts.

#include <cstdint>
#include <string>
#include <vector>

namespace spikeseg::snn {

struct LayerFlopSpec {
  std::string name;
  std::uint64_t kernel_h = 1;
  std::uint64_t kernel_w = 1;
  std::uint64_t stride = 1;
  std::uint64_t c_out = 1;
  std::uint64_t h_out = 1;
  std::uint64_t w_out = 1;
  std::uint64_t timesteps = 1;
  std::uint64_t spikes_in = 0;
  std::uint64_t spikes_out = 0;
};

// #ACC = spikes_in * (kh/S) * (kw/S) * C_out + T * C_out * H_out * W_out + spikes_out,
// with kh/S and kw/S in integer (floor) division.
inline std::uint64_t flops_acc(const LayerFlopSpec& l) {
  return l.spikes_in * (l.kernel_h / l.stride) * (l.kernel_w / l.stride) * l.c_out +
         l.timesteps * l.c_out * l.h_out * l.w_out + l.spikes_out;
}

// #MAC = T * C_out * H_out * W_out
inline std::uint64_t flops_mac(const LayerFlopSpec& l) { return l.timesteps * l.c_out * l.h_out * l.w_out; }

struct FlopTotals {
  std::uint64_t acc = 0;
  std::uint64_t mac = 0;

  FlopTotals& operator+=(const FlopTotals& o) {
    acc += o.acc;
    mac += o.mac;
    return *this;
  }
  bool operator==(const FlopTotals&) const = default;
};

inline FlopTotals total_flops(const std::vector<LayerFlopSpec>& layers) {
  FlopTotals t;
  for (const auto& l : layers) {
    t.acc += flops_acc(l);
    t.mac += flops_mac(l);
  }
  return t;
}

}  // namespace spikeseg::snn
