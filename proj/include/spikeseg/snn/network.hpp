#pragma once

// Fully spiking segmentation network: forward pass with spike bookkeeping,
// surrogate-gradient backward pass, and BN folding for deployment.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/rng.hpp"
#include "spikeseg/snn/flops.hpp"
#include "spikeseg/snn/layers.hpp"
#include "spikeseg/snn/network_spec.hpp"
#include "spikeseg/snn/neuron.hpp"
#include "spikeseg/snn/tensor.hpp"

namespace spikeseg::snn {

struct LayerActivity {
  std::string name;
  std::uint64_t neurons = 0;
  std::uint64_t spikes = 0;
  std::uint64_t fired = 0;  // neurons with at least one spike
};

// Per-layer activity of one forward pass over one input.
struct SpikeTrace {
  std::vector<LayerActivity> activity;
  std::vector<LayerFlopSpec> layers;
};

inline double activation_rate(const SpikeTrace& trace) {
  std::uint64_t fired = 0, total = 0;
  for (const auto& a : trace.activity) {
    fired += a.fired;
    total += a.neurons;
  }
  return total == 0 ? 0.0 : static_cast<double>(fired) / static_cast<double>(total);
}

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t size() const { return value.size(); }
};

struct RunOptions {
  SpikeMode spike_mode = SpikeMode::Heaviside;
  bool train_bn = false;       // batch statistics (and running-stat updates)
  bool keep_cache = false;     // retain activations for backward()
  bool record_trace = true;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

namespace detail {

template <class T>
struct UnitContext {
  const RunOptions& opts;
  const NeuronParams& neuron;
  SurrogateParams surrogate;
  std::vector<SpikeTrace>* traces;  // one per sample, may be null
};

// conv -> [BN] -> [spiking neuron], operating on a batch.
template <class T>
struct ConvUnit {
  std::string name;
  int in_c = 0, out_c = 0, k = 3, stride = 1;
  bool use_bn = true, use_spike = true, use_bias = false;
  bool analog_input = false;
  Param<T> weight, bias, bn_gamma, bn_beta;
  std::vector<T> running_mean, running_var;

  std::vector<Tensor<T>> in_cache, xhat_cache, u_cache, s_cache;
  std::vector<T> inv_std;

  ConvUnit() = default;
  ConvUnit(std::string n, int in, int out, int kernel, int s, bool bn, bool spike, bool with_bias)
      : name(std::move(n)), in_c(in), out_c(out), k(kernel), stride(s), use_bn(bn), use_spike(spike),
        use_bias(with_bias) {
    weight = Param<T>(name + ".weight", {out, in, kernel, kernel});
    if (use_bias) bias = Param<T>(name + ".bias", {out});
    if (use_bn) {
      bn_gamma = Param<T>(name + ".bn.gamma", {out});
      bn_beta = Param<T>(name + ".bn.beta", {out});
      std::fill(bn_gamma.value.begin(), bn_gamma.value.end(), T(1));
      running_mean.assign(static_cast<std::size_t>(out), T(0));
      running_var.assign(static_cast<std::size_t>(out), T(1));
    }
  }

  void params(std::vector<Param<T>*>& out) {
    out.push_back(&weight);
    if (use_bias) out.push_back(&bias);
    if (use_bn) {
      out.push_back(&bn_gamma);
      out.push_back(&bn_beta);
    }
  }

  void init(Rng& rng, double gain) {
    const double fan_in = static_cast<double>(in_c) * k * k;
    const double bound = gain * std::sqrt(3.0 / fan_in);
    for (auto& w : weight.value) w = static_cast<T>(rng.uniform(-bound, bound));
  }

  std::vector<Tensor<T>> forward(const std::vector<Tensor<T>>& x, const UnitContext<T>& ctx) {
    const std::size_t n = x.size();
    std::vector<Tensor<T>> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i].c != in_c) throw Error(Errc::ShapeMismatch, name + ": input " + x[i].shape_string());
      y[i] = conv2d_forward<T>(x[i], weight.value, use_bias ? bias.value.data() : nullptr, out_c, k, stride);
    }
    if (ctx.opts.keep_cache) in_cache = x;

    if (use_bn) {
      const std::size_t plane = y.front().plane();
      inv_std.assign(static_cast<std::size_t>(out_c), T(0));
      if (ctx.opts.keep_cache) xhat_cache.assign(n, Tensor<T>(out_c, y.front().h, y.front().w));
      for (int c = 0; c < out_c; ++c) {
        T mean, var;
        if (ctx.opts.train_bn) {
          const double m = static_cast<double>(n * plane);
          double s = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const T* p = y[i].channel(c);
            for (std::size_t j = 0; j < plane; ++j) s += static_cast<double>(p[j]);
          }
          const double mu = s / m;
          double sq = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const T* p = y[i].channel(c);
            for (std::size_t j = 0; j < plane; ++j) {
              const double d = static_cast<double>(p[j]) - mu;
              sq += d * d;
            }
          }
          mean = static_cast<T>(mu);
          var = static_cast<T>(sq / m);
          const double unbiased = m > 1 ? sq / (m - 1) : sq;
          const T mom = static_cast<T>(ctx.opts.bn_momentum);
          running_mean[static_cast<std::size_t>(c)] = (T(1) - mom) * running_mean[static_cast<std::size_t>(c)] + mom * mean;
          running_var[static_cast<std::size_t>(c)] =
              (T(1) - mom) * running_var[static_cast<std::size_t>(c)] + mom * static_cast<T>(unbiased);
        } else {
          mean = running_mean[static_cast<std::size_t>(c)];
          var = running_var[static_cast<std::size_t>(c)];
        }
        const T istd = T(1) / std::sqrt(var + static_cast<T>(ctx.opts.bn_eps));
        inv_std[static_cast<std::size_t>(c)] = istd;
        const T g = bn_gamma.value[static_cast<std::size_t>(c)];
        const T b = bn_beta.value[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < n; ++i) {
          T* p = y[i].channel(c);
          T* xh = ctx.opts.keep_cache ? xhat_cache[i].channel(c) : nullptr;
          for (std::size_t j = 0; j < plane; ++j) {
            const T xn = (p[j] - mean) * istd;
            if (xh) xh[j] = xn;
            p[j] = g * xn + b;
          }
        }
      }
    }

    if (use_spike) {
      // Single step from rest: u = leak * v_rest + I.
      const T offset = static_cast<T>(ctx.neuron.leak * ctx.neuron.v_rest);
      const T v_th = static_cast<T>(ctx.neuron.v_th);
      if (ctx.opts.keep_cache) u_cache.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (offset != T(0)) {
          for (auto& v : y[i].v) v += offset;
        }
        if (ctx.opts.keep_cache) u_cache[i] = y[i];
        for (auto& v : y[i].v) v = spike_value(v, v_th, ctx.opts.spike_mode);
      }
      if (ctx.opts.keep_cache) s_cache = y;
    }

    if (ctx.traces != nullptr) {
      for (std::size_t i = 0; i < n; ++i) record(x[i], y[i], (*ctx.traces)[i], ctx.opts.spike_mode);
    }
    return y;
  }

  void record(const Tensor<T>& in, const Tensor<T>& out, SpikeTrace& trace, SpikeMode mode) const {
    LayerFlopSpec f;
    f.name = name;
    f.kernel_h = f.kernel_w = static_cast<std::uint64_t>(k);
    f.stride = static_cast<std::uint64_t>(stride);
    f.c_out = static_cast<std::uint64_t>(out.c);
    f.h_out = static_cast<std::uint64_t>(out.h);
    f.w_out = static_cast<std::uint64_t>(out.w);
    f.timesteps = 1;
    // Analog stem input: every non-zero pixel counts as one incoming event.
    double sin = 0;
    for (const T v : in.v) sin += analog_input ? (v != T(0) ? 1.0 : 0.0) : static_cast<double>(v);
    f.spikes_in = static_cast<std::uint64_t>(std::llround(sin));
    if (use_spike) {
      LayerActivity a;
      a.name = name;
      a.neurons = out.size();
      for (const T v : out.v) {
        if (mode == SpikeMode::Heaviside && v != T(0) && v != T(1)) {
          throw Error(Errc::NonFiniteValue, name + ": non-binary spike value");
        }
        a.spikes += v != T(0) ? 1 : 0;
      }
      a.fired = a.spikes;
      f.spikes_out = a.spikes;
      trace.activity.push_back(a);
    }
    trace.layers.push_back(f);
  }

  std::vector<Tensor<T>> backward(std::vector<Tensor<T>> g, bool need_grad_in, const UnitContext<T>& ctx) {
    const std::size_t n = g.size();
    if (use_spike) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& u = u_cache[i].v;
        const auto& s = s_cache[i].v;
        for (std::size_t j = 0; j < g[i].size(); ++j) {
          g[i].v[j] *= spike_derivative(u[j], s[j], ctx.surrogate, ctx.opts.spike_mode);
        }
      }
    }
    if (use_bn) {
      const std::size_t plane = g.front().plane();
      const double m = static_cast<double>(n * plane);
      for (int c = 0; c < out_c; ++c) {
        double sum_g = 0, sum_gx = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const T* gp = g[i].channel(c);
          const T* xh = xhat_cache[i].channel(c);
          for (std::size_t j = 0; j < plane; ++j) {
            sum_g += static_cast<double>(gp[j]);
            sum_gx += static_cast<double>(gp[j]) * static_cast<double>(xh[j]);
          }
        }
        bn_gamma.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_gx);
        bn_beta.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_g);
        const T gamma = bn_gamma.value[static_cast<std::size_t>(c)];
        const T istd = inv_std[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < n; ++i) {
          T* gp = g[i].channel(c);
          const T* xh = xhat_cache[i].channel(c);
          if (ctx.opts.train_bn) {
            const T mg = static_cast<T>(sum_g / m);
            const T mgx = static_cast<T>(sum_gx / m);
            for (std::size_t j = 0; j < plane; ++j) gp[j] = gamma * istd * (gp[j] - mg - xh[j] * mgx);
          } else {
            for (std::size_t j = 0; j < plane; ++j) gp[j] *= gamma * istd;
          }
        }
      }
    }
    std::vector<Tensor<T>> gin(need_grad_in ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
      conv2d_backward<T>(in_cache[i], weight.value, g[i], k, stride, weight.grad,
                         use_bias ? bias.grad.data() : nullptr, need_grad_in ? &gin[i] : nullptr);
    }
    return gin;
  }

  // conv+BN(running stats) collapsed into conv+bias.
  ConvUnit folded(double eps) const {
    ConvUnit f(name, in_c, out_c, k, stride, false, use_spike, use_bias || use_bn);
    f.analog_input = analog_input;
    f.weight.value = weight.value;
    if (use_bias) f.bias.value = bias.value;
    if (use_bn) {
      const std::size_t per_out = static_cast<std::size_t>(in_c) * k * k;
      for (int c = 0; c < out_c; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const T scale = bn_gamma.value[cc] / std::sqrt(running_var[cc] + static_cast<T>(eps));
        for (std::size_t j = 0; j < per_out; ++j) f.weight.value[cc * per_out + j] *= scale;
        const T b0 = use_bias ? bias.value[cc] : T(0);
        f.bias.value[cc] = (b0 - running_mean[cc]) * scale + bn_beta.value[cc];
      }
    }
    return f;
  }

  void clear_cache() {
    in_cache.clear();
    xhat_cache.clear();
    u_cache.clear();
    s_cache.clear();
  }
};

template <class T>
std::vector<Tensor<T>> add_batches(std::vector<Tensor<T>> a, const std::vector<Tensor<T>>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_same_shape(a[i], b[i], "residual add");
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i].v[j] += b[i].v[j];
  }
  return a;
}

// Spike-element-wise residual block with ADD:
// out = SN(BN(conv2(SN(BN(conv1(x)))))) + shortcut(x), where the shortcut is
// the identity or a strided 1x1 spiking projection. Outputs are spike counts
// in {0, 1, 2}.
template <class T>
struct SewBlock {
  ConvUnit<T> conv1, conv2;
  bool has_proj = false;
  ConvUnit<T> proj;

  SewBlock() = default;
  SewBlock(const std::string& name, int in, int out, int stride)
      : conv1(name + ".conv1", in, out, 3, stride, true, true, false),
        conv2(name + ".conv2", out, out, 3, 1, true, true, false),
        has_proj(stride != 1 || in != out) {
    if (has_proj) proj = ConvUnit<T>(name + ".proj", in, out, 1, stride, true, true, false);
  }

  void params(std::vector<Param<T>*>& out) {
    conv1.params(out);
    conv2.params(out);
    if (has_proj) proj.params(out);
  }
  template <class F>
  void for_each_unit(F&& f) {
    f(conv1);
    f(conv2);
    if (has_proj) f(proj);
  }

  std::vector<Tensor<T>> forward(const std::vector<Tensor<T>>& x, const UnitContext<T>& ctx) {
    auto a = conv1.forward(x, ctx);
    auto b = conv2.forward(a, ctx);
    return add_batches(std::move(b), has_proj ? proj.forward(x, ctx) : x);
  }

  std::vector<Tensor<T>> backward(const std::vector<Tensor<T>>& g, bool need_grad_in, const UnitContext<T>& ctx) {
    auto ga = conv2.backward(g, true, ctx);
    auto gx = conv1.backward(std::move(ga), need_grad_in, ctx);
    if (has_proj) {
      auto gs = proj.backward(g, need_grad_in, ctx);
      return need_grad_in ? add_batches(std::move(gx), gs) : gx;
    }
    return need_grad_in ? add_batches(std::move(gx), g) : gx;
  }
};

}  // namespace detail

template <class T>
struct ForwardResult {
  std::vector<Tensor<T>> scores;  // C x H_in x W_in per sample
  std::vector<SpikeTrace> traces;
};

template <class T>
class Network {
 public:
  Network() = default;

  Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    build();
    Rng rng(seed);
    for_each_unit([&](detail::ConvUnit<T>& u) { u.init(rng, u.use_spike ? 2.0 : 1.0); });
  }

  const NetworkSpec& spec() const { return spec_; }
  NetworkSpec& mutable_spec() { return spec_; }
  bool is_folded() const { return folded_; }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    stem_.params(out);
    for (auto& b : blocks_) b.params(out);
    for (auto& h : head_) h.params(out);
    classifier_.params(out);
    return out;
  }

  std::uint64_t num_parameters() const {
    std::uint64_t n = 0;
    for (auto* p : const_cast<Network*>(this)->params()) n += p->size();
    return n;
  }

  // BN running statistics, in unit order, as (name, values) pairs.
  std::vector<std::pair<std::string, std::vector<T>*>> buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    for_each_unit([&](detail::ConvUnit<T>& u) {
      if (u.use_bn) {
        out.emplace_back(u.name + ".bn.running_mean", &u.running_mean);
        out.emplace_back(u.name + ".bn.running_var", &u.running_var);
      }
    });
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  ForwardResult<T> forward(const std::vector<Tensor<T>>& inputs, const RunOptions& opts) {
    if (inputs.empty()) throw Error(Errc::ShapeMismatch, "empty batch");
    for (const auto& x : inputs) {
      if (x.c != spec_.in_channels) throw Error(Errc::ShapeMismatch, "network input " + x.shape_string());
      if (x.h < 1 || x.w < 1) throw Error(Errc::ShapeMismatch, "empty input");
    }
    ForwardResult<T> res;
    if (opts.record_trace) res.traces.resize(inputs.size());
    detail::UnitContext<T> ctx{opts, spec_.neuron, spec_.surrogate(), opts.record_trace ? &res.traces : nullptr};
    in_h_ = inputs.front().h;
    in_w_ = inputs.front().w;
    auto x = stem_.forward(inputs, ctx);
    for (auto& b : blocks_) x = b.forward(x, ctx);
    for (auto& h : head_) x = h.forward(x, ctx);
    // Spike accumulator: classifier voltages summed over the (single) step.
    x = classifier_.forward(x, ctx);
    if (opts.keep_cache) {
      logit_h_ = x.front().h;
      logit_w_ = x.front().w;
    }
    res.scores.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      res.scores.push_back(resize_bilinear(x[i], inputs[i].h, inputs[i].w, spec_.downsample()));
    }
    last_opts_ = opts;
    return res;
  }

  // Accumulates parameter gradients for dLoss/dScores from the last forward
  // pass, which must have run with keep_cache.
  void backward(const std::vector<Tensor<T>>& grad_scores) {
    if (!last_opts_.keep_cache) throw Error(Errc::ShapeMismatch, "backward without cached forward pass");
    detail::UnitContext<T> ctx{last_opts_, spec_.neuron, spec_.surrogate(), nullptr};
    std::vector<Tensor<T>> g;
    g.reserve(grad_scores.size());
    for (const auto& gs : grad_scores) g.push_back(resize_bilinear_backward(gs, logit_h_, logit_w_, spec_.downsample()));
    g = classifier_.backward(std::move(g), true, ctx);
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) g = it->backward(std::move(g), true, ctx);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g, true, ctx);
    stem_.backward(std::move(g), false, ctx);
  }

  void clear_cache() {
    for_each_unit([](detail::ConvUnit<T>& u) { u.clear_cache(); });
  }

  // Inference copy with every BN folded into its convolution.
  Network folded(double eps = 1e-5) const {
    Network f = *this;
    f.clear_cache();
    f.for_each_unit([eps](detail::ConvUnit<T>& u) { u = u.folded(eps); });
    f.folded_ = true;
    return f;
  }

  template <class U>
  Network<U> cast() const {
    Network<U> out;
    out.spec_ = spec_;
    out.folded_ = folded_;
    out.build_with(folded_);
    auto* self = const_cast<Network*>(this);
    auto src = self->all_units();
    auto dst = out.all_units();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto conv = [](const std::vector<T>& a, std::vector<U>& b) {
        b.resize(a.size());
        for (std::size_t j = 0; j < a.size(); ++j) b[j] = static_cast<U>(a[j]);
      };
      conv(src[i]->weight.value, dst[i]->weight.value);
      if (src[i]->use_bias) conv(src[i]->bias.value, dst[i]->bias.value);
      if (src[i]->use_bn) {
        conv(src[i]->bn_gamma.value, dst[i]->bn_gamma.value);
        conv(src[i]->bn_beta.value, dst[i]->bn_beta.value);
        conv(src[i]->running_mean, dst[i]->running_mean);
        conv(src[i]->running_var, dst[i]->running_var);
      }
    }
    return out;
  }

  template <class F>
  void for_each_unit(F&& f) {
    f(stem_);
    for (auto& b : blocks_) b.for_each_unit(f);
    for (auto& h : head_) f(h);
    f(classifier_);
  }

  std::vector<detail::ConvUnit<T>*> all_units() {
    std::vector<detail::ConvUnit<T>*> out;
    for_each_unit([&](detail::ConvUnit<T>& u) { out.push_back(&u); });
    return out;
  }

 private:
  template <class>
  friend class Network;

  void build() { build_with(false); }

  void build_with(bool folded) {
    const bool bn = !folded;
    const bool cbias = folded;
    stem_ = detail::ConvUnit<T>("stem", spec_.in_channels, spec_.stem_channels, 3, spec_.stem_stride, bn, true, cbias);
    stem_.analog_input = true;
    blocks_.clear();
    int ch = spec_.stem_channels;
    for (std::size_t s = 0; s < spec_.stages.size(); ++s) {
      const auto& st = spec_.stages[s];
      for (int b = 0; b < st.blocks; ++b) {
        detail::SewBlock<T> blk("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1), ch, st.channels,
                                b == 0 ? st.stride : 1);
        if (folded) {
          blk.for_each_unit([&](detail::ConvUnit<T>& u) {
            u = detail::ConvUnit<T>(u.name, u.in_c, u.out_c, u.k, u.stride, false, true, true);
          });
        }
        blocks_.push_back(std::move(blk));
        ch = st.channels;
      }
    }
    head_.clear();
    for (std::size_t i = 0; i < spec_.head_channels.size(); ++i) {
      head_.emplace_back("head" + std::to_string(i + 1), ch, spec_.head_channels[i], 3, 1, bn, true, cbias);
      ch = spec_.head_channels[i];
    }
    classifier_ = detail::ConvUnit<T>("classifier", ch, spec_.num_classes, 1, 1, false, false, true);
  }

  NetworkSpec spec_;
  bool folded_ = false;
  detail::ConvUnit<T> stem_;
  std::vector<detail::SewBlock<T>> blocks_;
  std::vector<detail::ConvUnit<T>> head_;
  detail::ConvUnit<T> classifier_;
  int in_h_ = 0, in_w_ = 0, logit_h_ = 0, logit_w_ = 0;
  RunOptions last_opts_;
};

}  // namespace spikeseg::snn
