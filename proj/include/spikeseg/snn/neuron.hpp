#pragma once

// Integrate-and-fire dynamics and the rectangular surrogate derivative.

#include <cmath>
#include <utility>

#include "spikeseg/error.hpp"
#include "spikeseg/snn/tensor.hpp"

namespace spikeseg::snn {

enum class ResetMode { Hard, Soft };

// leak is the multiplicative decay per step: 1 gives IF, below 1 gives LIF.
struct NeuronParams {
  double v_th = 1.0;
  double v_rest = 0.0;
  double leak = 0.9;
  ResetMode reset = ResetMode::Hard;

  void validate() const {
    if (!(v_th > v_rest)) throw Error(Errc::SpecInvalid, "v_th must exceed v_rest");
    if (!(leak > 0.0 && leak <= 1.0)) throw Error(Errc::SpecInvalid, "leak must lie in (0, 1]");
  }
};

struct SurrogateParams {
  double gamma = 1.0;
  double v_th = 1.0;
};

// Rectangular window: 1/gamma inside |u - v_th| < gamma/2, zero outside.
inline double surrogate_grad(double u, const SurrogateParams& s) {
  return std::abs(u - s.v_th) < s.gamma / 2.0 ? 1.0 / s.gamma : 0.0;
}

// Heaviside is the real spike function. SigmoidExact swaps it for a smooth
// sigmoid((u - v_th) / 0.2) whose derivative is exact, so whole-network
// gradients can be checked against finite differences.
enum class SpikeMode { Heaviside, SigmoidExact };
inline constexpr double kSigmoidScale = 0.2;

template <class T>
T spike_value(T u, T v_th, SpikeMode mode) {
  if (mode == SpikeMode::Heaviside) return u >= v_th ? T(1) : T(0);
  return T(1) / (T(1) + std::exp(-(u - v_th) / T(kSigmoidScale)));
}

// d spike / du given the forward value; the surrogate stands in for Heaviside.
template <class T>
T spike_derivative(T u, T spike, const SurrogateParams& s, SpikeMode mode) {
  if (mode == SpikeMode::Heaviside) return static_cast<T>(surrogate_grad(static_cast<double>(u), s));
  return spike * (T(1) - spike) / T(kSigmoidScale);
}

template <class T>
struct LifOutput {
  Tensor<T> spikes;
  Tensor<T> state;
};

// One step: v' = leak * v + input; fire where v' >= v_th, then reset the
// fired entries (hard: to v_rest, soft: subtract v_th).
template <class T>
LifOutput<T> lif_step(const Tensor<T>& state, const Tensor<T>& input, const NeuronParams& p) {
  require_same_shape(state, input, "lif_step");
  LifOutput<T> out{Tensor<T>(state.c, state.h, state.w), Tensor<T>(state.c, state.h, state.w)};
  const T leak = static_cast<T>(p.leak);
  const T v_th = static_cast<T>(p.v_th);
  for (std::size_t i = 0; i < state.size(); ++i) {
    const T v = leak * state.v[i] + input.v[i];
    if (v >= v_th) {
      out.spikes.v[i] = T(1);
      out.state.v[i] = p.reset == ResetMode::Hard ? static_cast<T>(p.v_rest) : v - v_th;
    } else {
      out.state.v[i] = v;
    }
  }
  return out;
}

}  // namespace spikeseg::snn
