#pragma once

// Adam optimiser and one surrogate-gradient training step with per-pixel
// cross-entropy.

#include <cmath>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/image.hpp"
#include "spikeseg/snn/network.hpp"
#include "spikeseg/snn/segment.hpp"

namespace spikeseg::snn {

struct AdamConfig {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double update = cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

struct Sample {
  Image image;
  LabelMap labels;
};

// Mean per-pixel cross-entropy of the batch with BN in training mode, and
// optionally its gradient (accumulated into the parameters after zeroing).
template <class T>
double batch_loss(Network<T>& net, const std::vector<Tensor<T>>& inputs, const std::vector<LabelMap>& labels,
                  bool with_grad, SpikeMode mode = SpikeMode::Heaviside) {
  RunOptions opts;
  opts.spike_mode = mode;
  opts.train_bn = true;
  opts.keep_cache = with_grad;
  opts.record_trace = false;
  auto res = net.forward(inputs, opts);
  double pixels = 0;
  for (const auto& l : labels) pixels += static_cast<double>(l.labels.size());
  double total = 0;
  std::vector<Tensor<T>> grads(with_grad ? inputs.size() : 0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (labels[i].geometry != Geometry{inputs[i].w, inputs[i].h}) {
      throw Error(Errc::ShapeMismatch, "labels " + to_string(labels[i].geometry) + " for input " + inputs[i].shape_string());
    }
    total += cross_entropy(res.scores[i], labels[i].labels, with_grad ? &grads[i] : nullptr, 1.0 / pixels);
  }
  if (with_grad) {
    net.zero_grad();
    net.backward(grads);
    net.clear_cache();
  }
  return total / pixels;
}

// One optimisation step. Returns the batch loss measured before the update.
template <class T>
double train_step(const std::vector<Sample>& batch, Network<T>& net, Adam<T>& opt) {
  std::vector<Tensor<T>> inputs;
  std::vector<LabelMap> labels;
  for (const auto& s : batch) {
    s.labels.validate();
    if (s.labels.num_classes > net.spec().num_classes) {
      throw Error(Errc::LabelOutOfRange, "sample has " + std::to_string(s.labels.num_classes) + " classes");
    }
    inputs.push_back(encode_image<T>(s.image, net.spec().in_channels));
    labels.push_back(s.labels);
  }
  const double loss = batch_loss(net, inputs, labels, true);
  if (!std::isfinite(loss)) throw Error(Errc::NonFiniteLoss, "batch loss " + std::to_string(loss));
  opt.step(net.params());
  return loss;
}

}  // namespace spikeseg::snn
