#include <gtest/gtest.h>

#include <cmath>

#include "spikeseg/rng.hpp"
#include "spikeseg/snn/checkpoint.hpp"
#include "spikeseg/snn/flops.hpp"
#include "spikeseg/snn/network.hpp"
#include "spikeseg/snn/segment.hpp"
#include "spikeseg/snn/train.hpp"
#include "test_util.hpp"

using namespace spikeseg;
using namespace spikeseg::snn;
using testutil::code_of;

namespace {

Tensor<float> scalar(float v) { return Tensor<float>(1, 1, 1, v); }

template <class T>
Tensor<T> random_tensor(Rng& rng, int c, int h, int w, double lo = -1, double hi = 1) {
  Tensor<T> t(c, h, w);
  for (auto& v : t.v) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

Tensor<float> random_spikes(Rng& rng, int c, int h, int w) {
  Tensor<float> t(c, h, w);
  for (auto& v : t.v) v = rng.below(3) == 0 ? 1.0f : 0.0f;
  return t;
}

// Direct nested-loop convolution with zero padding k/2.
Tensor<double> naive_conv(const Tensor<double>& in, const std::vector<double>& w, const std::vector<double>* bias,
                          int out_c, int k, int stride) {
  const int pad = k / 2;
  const int oh = (in.h + 2 * pad - k) / stride + 1, ow = (in.w + 2 * pad - k) / stride + 1;
  Tensor<double> out(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
        for (int i = 0; i < in.c; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = y * stride + ky - pad, ix = x * stride + kx - pad;
              if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
              s += w[((static_cast<std::size_t>(o) * in.c + i) * k + ky) * k + kx] * in.at(i, iy, ix);
            }
          }
        }
        out.at(o, y, x) = s;
      }
    }
  }
  return out;
}

// Under 5k parameters, for the finite-difference check.
NetworkSpec tiny_spec() {
  NetworkSpec s = desk_spec(4);
  s.name = "tiny";
  s.stem_channels = 4;
  s.stages = {{4, 1, 1}, {6, 2, 1}, {8, 2, 1}};
  s.head_channels = {6, 6};
  s.train_height = 16;
  s.train_width = 16;
  return s;
}

Image random_image(Rng& rng, Geometry g) {
  Image img(g);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

RunOptions eval_opts() {
  RunOptions o;
  o.record_trace = true;
  return o;
}

}  // namespace

// ---- neuron dynamics

TEST(Lif, LeakyIntegrationThenHardReset) {
  NeuronParams p;
  p.leak = 0.5;
  auto s1 = lif_step(scalar(0.0f), scalar(0.8f), p);
  EXPECT_EQ(s1.spikes.v[0], 0.0f);
  EXPECT_FLOAT_EQ(s1.state.v[0], 0.8f);
  auto s2 = lif_step(s1.state, scalar(0.8f), p);
  EXPECT_EQ(s2.spikes.v[0], 1.0f);
  EXPECT_EQ(s2.state.v[0], 0.0f);
}

TEST(Lif, SoftResetSubtractsThreshold) {
  NeuronParams p;
  p.leak = 1.0;
  p.reset = ResetMode::Soft;
  auto s = lif_step(scalar(0.0f), scalar(1.3f), p);
  EXPECT_EQ(s.spikes.v[0], 1.0f);
  EXPECT_NEAR(s.state.v[0], 0.3f, 1e-6);
}

TEST(Lif, ZeroInputDecaysWithoutSpiking) {
  NeuronParams p;
  p.leak = 0.9;
  Tensor<double> v(1, 1, 1, 0.95);
  for (int t = 0; t < 100; ++t) {
    auto s = lif_step(v, Tensor<double>(1, 1, 1, 0.0), p);
    EXPECT_EQ(s.spikes.v[0], 0.0);
    EXPECT_LE(s.state.v[0], v.v[0]);
    EXPECT_GE(s.state.v[0], 0.0);
    v = s.state;
  }
  EXPECT_LT(v.v[0], 1e-4);
}

TEST(Lif, UnitLeakIsIntegrateAndFire) {
  NeuronParams p;
  p.leak = 1.0;
  Tensor<double> v(1, 1, 1, 0.0);
  int spikes = 0;
  for (int t = 0; t < 10; ++t) {
    auto s = lif_step(v, Tensor<double>(1, 1, 1, 0.25), p);
    spikes += static_cast<int>(s.spikes.v[0]);
    v = s.state;
  }
  EXPECT_EQ(spikes, 2);  // fires at steps 4 and 8
  EXPECT_NEAR(v.v[0], 0.5, 1e-12);
}

TEST(Lif, ShapeMismatch) {
  EXPECT_EQ(code_of([] { lif_step(Tensor<float>(1, 2, 2), Tensor<float>(1, 2, 3), NeuronParams{}); }),
            Errc::ShapeMismatch);
}

// ---- surrogate

TEST(Surrogate, WindowValues) {
  EXPECT_EQ(surrogate_grad(1.0, {1.0, 1.0}), 1.0);
  for (double g : {0.25, 0.5, 1.0, 3.0}) EXPECT_EQ(surrogate_grad(1.0 + g, {g, 1.0}), 0.0);
  EXPECT_EQ(surrogate_grad(1.24, {0.5, 1.0}), 2.0);
  EXPECT_EQ(surrogate_grad(1.26, {0.5, 1.0}), 0.0);
}

TEST(Surrogate, IntegratesToOne) {
  for (double gamma : {0.5, 1.0, 2.0}) {
    const double h = 1e-6;
    const double lo = 1.0 - gamma;
    const long n = std::lround(2 * gamma / h);
    double sum = 0;
    for (long i = 0; i < n; ++i) sum += surrogate_grad(lo + (static_cast<double>(i) + 0.5) * h, {gamma, 1.0}) * h;
    EXPECT_NEAR(sum, 1.0, 1e-6) << gamma;
  }
}

// ---- layers

TEST(Conv, MatchesNestedLoopOracle) {
  Rng rng(42);
  for (int k : {1, 3}) {
    for (int stride : {1, 2}) {
      const auto in = random_tensor<double>(rng, 3, 5, 5);
      std::vector<double> w(static_cast<std::size_t>(4 * 3 * k * k)), b(4);
      for (auto& v : w) v = rng.uniform(-1, 1);
      for (auto& v : b) v = rng.uniform(-1, 1);
      const auto got = conv2d_forward<double>(in, w, b.data(), 4, k, stride);
      const auto want = naive_conv(in, w, &b, 4, k, stride);
      ASSERT_TRUE(got.same_shape(want));
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.v[i], want.v[i], 1e-6);
    }
  }
}

TEST(Conv, PreActivationsOfUnitMatchOracle) {
  Rng rng(7);
  snn::detail::ConvUnit<float> u("c", 2, 3, 3, 1, false, true, true);
  for (auto& v : u.weight.value) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : u.bias.value) v = static_cast<float>(rng.uniform(-1, 1));
  const auto x = random_tensor<float>(rng, 2, 5, 5);
  RunOptions o;
  o.keep_cache = true;
  NeuronParams np;
  snn::detail::UnitContext<float> ctx{o, np, {}, nullptr};
  const auto s = u.forward({x}, ctx);
  Tensor<double> xd(2, 5, 5);
  for (std::size_t i = 0; i < x.size(); ++i) xd.v[i] = x.v[i];
  std::vector<double> wd(u.weight.value.begin(), u.weight.value.end()), bd(u.bias.value.begin(), u.bias.value.end());
  const auto want = naive_conv(xd, wd, &bd, 3, 3, 1);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(u.u_cache[0].v[i], want.v[i], 1e-6);
    EXPECT_EQ(s[0].v[i], want.v[i] >= 1.0 ? 1.0f : 0.0f);
  }
}

TEST(Conv, IdentityKernelPassesSpikes) {
  Rng rng(3);
  snn::detail::ConvUnit<float> u("id", 2, 2, 1, 1, false, true, false);
  u.weight.value = {1, 0, 0, 1};
  NeuronParams np;
  np.v_th = 0.5;
  RunOptions o;
  snn::detail::UnitContext<float> ctx{o, np, {}, nullptr};
  const auto x = random_spikes(rng, 2, 6, 5);
  EXPECT_EQ(u.forward({x}, ctx)[0].v, x.v);
}

TEST(CrossEntropy, UniformLogits) {
  Tensor<double> s(4, 3, 3, 0.7);
  std::vector<std::uint8_t> labels(9, 2);
  EXPECT_NEAR(cross_entropy<double>(s, labels, nullptr, 1.0) / 9.0, std::log(4.0), 1e-12);
}

TEST(Resize, BackwardIsAdjointOfForward) {
  Rng rng(5);
  const auto x = random_tensor<double>(rng, 2, 4, 6);
  const auto g = random_tensor<double>(rng, 2, 13, 21);
  const auto y = resize_bilinear(x, 13, 21);
  const auto gx = resize_bilinear_backward(g, 4, 6);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < y.size(); ++i) a += y.v[i] * g.v[i];
  for (std::size_t i = 0; i < x.size(); ++i) b += x.v[i] * gx.v[i];
  EXPECT_NEAR(a, b, 1e-9);
  const auto y4 = resize_bilinear(x, 13, 21, 4);
  const auto gx4 = resize_bilinear_backward(g, 4, 6, 4);
  a = b = 0;
  for (std::size_t i = 0; i < y4.size(); ++i) a += y4.v[i] * g.v[i];
  for (std::size_t i = 0; i < x.size(); ++i) b += x.v[i] * gx4.v[i];
  EXPECT_NEAR(a, b, 1e-9);
}

TEST(Resize, FixedFactorKeepsCellsAligned) {
  Tensor<double> ramp(1, 1, 6);
  for (int j = 0; j < 6; ++j) ramp.v[static_cast<std::size_t>(j)] = j;
  const auto full = resize_bilinear(ramp, 1, 24, 4);
  const auto cut = resize_bilinear(ramp, 1, 21, 4);
  for (int o = 0; o < 21; ++o) EXPECT_EQ(cut.v[static_cast<std::size_t>(o)], full.v[static_cast<std::size_t>(o)]) << o;
  // Output pixel o samples cell (o + 0.5) / 4 - 0.5.
  EXPECT_DOUBLE_EQ(full.v[10], 2.125);
  EXPECT_DOUBLE_EQ(full.v[0], 0.0);
  EXPECT_DOUBLE_EQ(full.v[23], 5.0);
  EXPECT_EQ(resize_bilinear(ramp, 1, 24).v, full.v);
}

// ---- SEW blocks

TEST(Sew, ZeroWeightsIdentityShortcutPassesInput) {
  Rng rng(1);
  snn::detail::SewBlock<float> blk("b", 3, 3, 1);
  ASSERT_FALSE(blk.has_proj);
  RunOptions o;
  NeuronParams np;
  snn::detail::UnitContext<float> ctx{o, np, {}, nullptr};
  const auto x = random_spikes(rng, 3, 7, 6);
  EXPECT_EQ(blk.forward({x}, ctx)[0].v, x.v);
  const Tensor<float> zero(3, 7, 6);
  EXPECT_EQ(blk.forward({zero}, ctx)[0].v, zero.v);
}

TEST(Sew, ZeroInputGivesZeroWithProjection) {
  Rng rng(2);
  snn::detail::SewBlock<float> blk("b", 3, 5, 2);
  for (auto* u : {&blk.conv1, &blk.conv2, &blk.proj}) u->init(rng, 2.0);
  RunOptions o;
  NeuronParams np;
  snn::detail::UnitContext<float> ctx{o, np, {}, nullptr};
  const auto out = blk.forward({Tensor<float>(3, 8, 8)}, ctx)[0];
  EXPECT_EQ(out.c, 5);
  EXPECT_EQ(out.h, 4);
  for (float v : out.v) EXPECT_EQ(v, 0.0f);
}

TEST(Sew, MatchesLayerByLayerComposition) {
  Rng rng(9);
  for (int stride : {1, 2}) {
    snn::detail::SewBlock<float> blk("b", 4, stride == 1 ? 4 : 6, stride);
    for (auto* u : {&blk.conv1, &blk.conv2, &blk.proj}) {
      if (u == &blk.proj && !blk.has_proj) continue;
      u->init(rng, 3.0);
      for (auto& v : u->running_mean) v = static_cast<float>(rng.uniform(-0.2, 0.2));
      for (auto& v : u->running_var) v = static_cast<float>(rng.uniform(0.5, 1.5));
      for (auto& v : u->bn_gamma.value) v = static_cast<float>(rng.uniform(0.5, 1.5));
      for (auto& v : u->bn_beta.value) v = static_cast<float>(rng.uniform(0.0, 0.8));
    }
    RunOptions o;
    NeuronParams np;
    snn::detail::UnitContext<float> ctx{o, np, {}, nullptr};
    const auto x = random_spikes(rng, 4, 9, 9);
    // conv -> eval-mode BN -> threshold, written out by hand.
    auto unit = [&](const snn::detail::ConvUnit<float>& u, const Tensor<float>& in) {
      auto y = conv2d_forward<float>(in, u.weight.value, nullptr, u.out_c, u.k, u.stride);
      for (int c = 0; c < y.c; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const float istd = 1.0f / std::sqrt(u.running_var[cc] + 1e-5f);
        for (std::size_t j = 0; j < y.plane(); ++j) {
          float& v = y.channel(c)[j];
          v = u.bn_gamma.value[cc] * ((v - u.running_mean[cc]) * istd) + u.bn_beta.value[cc];
          v = v >= 1.0f ? 1.0f : 0.0f;
        }
      }
      return y;
    };
    auto want = unit(blk.conv2, unit(blk.conv1, x));
    const auto shortcut = blk.has_proj ? unit(blk.proj, x) : x;
    for (std::size_t i = 0; i < want.size(); ++i) want.v[i] += shortcut.v[i];
    const auto got = blk.forward({x}, ctx)[0];
    EXPECT_EQ(got.v, want.v) << "stride " << stride;
    for (float v : got.v) EXPECT_TRUE(v == 0.0f || v == 1.0f || v == 2.0f);
  }
}

// ---- whole network

TEST(Network, ShapesAndDeterminism) {
  Rng rng(4);
  Network<float> a(desk_spec(4), 11), b(desk_spec(4), 11);
  const auto img = random_image(rng, {37, 29});
  const auto sa = forward_segment(img, a);
  const auto sb = forward_segment(img, b);
  EXPECT_EQ(sa.scores.c, 4);
  EXPECT_EQ(sa.scores.h, 29);
  EXPECT_EQ(sa.scores.w, 37);
  EXPECT_EQ(sa.scores.v, sb.scores.v);
  EXPECT_EQ(sa.labels, sb.labels);
  EXPECT_EQ(sa.labels.geometry, img.geometry);
}

TEST(Network, ZeroInputIsSilent) {
  Network<float> net(desk_spec(4), 3);
  const auto seg = forward_segment(Image({32, 32}, 0), net);
  for (const auto& a : seg.trace.activity) EXPECT_EQ(a.spikes, 0u) << a.name;
  EXPECT_EQ(activation_rate(seg.trace), 0.0);
}

TEST(Network, HiddenSpikesAreBinary) {
  Rng rng(6);
  Network<float> net(desk_spec(4), 5);
  RunOptions o;
  o.keep_cache = true;
  o.record_trace = true;
  net.forward({encode_image<float>(random_image(rng, {24, 24}), 1)}, o);
  std::size_t checked = 0;
  net.for_each_unit([&](snn::detail::ConvUnit<float>& u) {
    if (!u.use_spike) return;
    for (float v : u.s_cache[0].v) ASSERT_TRUE(v == 0.0f || v == 1.0f) << u.name;
    ++checked;
  });
  EXPECT_EQ(checked, 11u);
}

TEST(Network, BatchOfOneEqualsSingleSample) {
  Rng rng(8);
  Network<float> net(desk_spec(4), 2);
  const auto x1 = encode_image<float>(random_image(rng, {20, 16}), 1);
  const auto x2 = encode_image<float>(random_image(rng, {20, 16}), 1);
  const auto both = net.forward({x1, x2}, eval_opts());
  EXPECT_EQ(both.scores[0].v, net.forward({x1}, eval_opts()).scores[0].v);
  EXPECT_EQ(both.scores[1].v, net.forward({x2}, eval_opts()).scores[0].v);
}

TEST(Network, MatchesHandUnrolledLayers) {
  Rng rng(12);
  Network<float> net(tiny_spec(), 21);
  const auto x = encode_image<float>(random_image(rng, {19, 14}), 1);
  RunOptions o;
  o.record_trace = false;
  NeuronParams np = net.spec().neuron;
  snn::detail::UnitContext<float> ctx{o, np, net.spec().surrogate(), nullptr};
  auto units = net.all_units();
  // all_units order: stem, (conv1, conv2[, proj]) per block, head, classifier.
  std::size_t k = 0;
  auto h = units[k++]->forward({x}, ctx);
  for (const auto& st : net.spec().stages) {
    (void)st;
    auto* c1 = units[k++];
    auto* c2 = units[k++];
    const bool proj = k < units.size() && units[k]->name.find(".proj") != std::string::npos;
    auto a = c2->forward(c1->forward(h, ctx), ctx);
    const auto s = proj ? units[k++]->forward(h, ctx) : h;
    for (std::size_t i = 0; i < a[0].size(); ++i) a[0].v[i] += s[0].v[i];
    h = a;
  }
  h = units[k++]->forward(h, ctx);
  h = units[k++]->forward(h, ctx);
  h = units[k++]->forward(h, ctx);
  ASSERT_EQ(k, units.size());
  const auto want = resize_bilinear(h[0], x.h, x.w, net.spec().downsample());
  EXPECT_EQ(net.forward({x}, o).scores[0].v, want.v);
}

TEST(Network, FoldedMatchesEvalBatchNorm) {
  Rng rng(13);
  Network<float> net(desk_spec(4), 4);
  net.for_each_unit([&](snn::detail::ConvUnit<float>& u) {
    for (auto& v : u.running_mean) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    for (auto& v : u.running_var) v = static_cast<float>(rng.uniform(0.05, 0.2));
  });
  auto folded = net.folded();
  EXPECT_TRUE(folded.is_folded());
  const auto x = encode_image<float>(random_image(rng, {32, 32}), 1);
  RunOptions o;
  o.record_trace = false;
  const auto a = net.forward({x}, o).scores[0];
  const auto b = folded.forward({x}, o).scores[0];
  // Folding reorders float arithmetic; a neuron sitting exactly on the
  // threshold may flip, so compare labels and require near-equal scores.
  std::size_t close = 0;
  for (std::size_t i = 0; i < a.size(); ++i) close += std::abs(a.v[i] - b.v[i]) < 1e-3f ? 1 : 0;
  EXPECT_GT(static_cast<double>(close) / static_cast<double>(a.size()), 0.99);
}

TEST(Network, RejectsWrongChannelCount) {
  Network<float> net(desk_spec(4), 1);
  EXPECT_EQ(code_of([&] { net.forward({Tensor<float>(3, 8, 8)}, eval_opts()); }), Errc::ShapeMismatch);
}

// ---- training

TEST(Train, StepLowersLossOnFixedSample) {
  Rng rng(14);
  Network<float> net(desk_spec(4), 6);
  Sample s{random_image(rng, {32, 32}), LabelMap({32, 32}, 4)};
  for (std::size_t i = 0; i < s.labels.labels.size(); ++i) s.labels.labels[i] = s.image.pixels[i] / 64;
  const std::vector<Tensor<float>> in{encode_image<float>(s.image, 1)};
  const double before = batch_loss(net, in, {s.labels}, false);
  Adam<float> opt({1e-3});
  train_step({s}, net, opt);
  const double after = batch_loss(net, in, {s.labels}, false);
  EXPECT_LT(after, before);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  Rng rng(15);
  Network<float> net(desk_spec(4), 6);
  std::vector<std::vector<float>> before;
  for (auto* p : net.params()) before.push_back(p->value);
  Sample s{random_image(rng, {16, 16}), LabelMap({16, 16}, 4, 1)};
  Adam<float> opt({0.0});
  const double l1 = train_step({s}, net, opt);
  const double l2 = train_step({s}, net, opt);
  EXPECT_EQ(l1, l2);
  std::size_t k = 0;
  for (auto* p : net.params()) EXPECT_EQ(p->value, before[k++]) << p->name;
}

TEST(Train, LabelOutOfRange) {
  Network<float> net(desk_spec(2), 6);
  Sample s{Image({8, 8}), LabelMap({8, 8}, 4, 3)};
  Adam<float> opt;
  EXPECT_EQ(code_of([&] { train_step({s}, net, opt); }), Errc::LabelOutOfRange);
}

// Analytic gradients in sigmoid mode against central differences on every
// parameter, BN in training mode, double precision.
TEST(Train, GradientMatchesFiniteDifferences) {
  Rng rng(16);
  Network<double> net(tiny_spec(), 31);
  ASSERT_LE(net.num_parameters(), 5000u);
  for (auto* p : net.params()) {
    if (p->name.find(".bn.beta") != std::string::npos) {
      for (auto& v : p->value) v = rng.uniform(0.3, 0.9);  // keep units near threshold
    }
  }
  std::vector<Tensor<double>> in;
  std::vector<LabelMap> labels;
  for (int i = 0; i < 2; ++i) {
    in.push_back(encode_image<double>(random_image(rng, {12, 12}), 1));
    LabelMap m({12, 12}, 4);
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.below(4));
    labels.push_back(m);
  }
  batch_loss(net, in, labels, true, SpikeMode::SigmoidExact);
  std::vector<double> analytic, numeric;
  const double h = 1e-5;
  for (auto* p : net.params()) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      analytic.push_back(p->grad[i]);
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = batch_loss(net, in, labels, false, SpikeMode::SigmoidExact);
      p->value[i] = keep - h;
      const double down = batch_loss(net, in, labels, false, SpikeMode::SigmoidExact);
      p->value[i] = keep;
      numeric.push_back((up - down) / (2 * h));
    }
  }
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += numeric[i] * numeric[i];
  }
  ASSERT_GT(norm, 0.0);
  EXPECT_LE(std::sqrt(diff / norm), 1e-4);
}

// ---- parameter budget and flops

TEST(Params, SingleConvKernel) {
  snn::detail::ConvUnit<float> u("c", 3, 16, 3, 1, false, true, false);
  std::vector<Param<float>*> ps;
  u.params(ps);
  std::size_t n = 0;
  for (auto* p : ps) n += p->size();
  EXPECT_EQ(n, 432u);
}

TEST(Params, ReferenceBudget) {
  const auto n = parameter_count(reference_spec());
  EXPECT_GE(n, 280000u);
  EXPECT_LE(n, 380000u);
  Network<float> net(reference_spec(), 1);
  EXPECT_EQ(net.num_parameters(), n);
}

TEST(Params, DeskCount) {
  Network<float> net(desk_spec(), 1);
  EXPECT_EQ(parameter_count(desk_spec()), net.num_parameters());
  EXPECT_EQ(parameter_count(desk_spec()), 19412u);
}

TEST(Flops, FormulaExample) {
  LayerFlopSpec l{"l", 3, 3, 1, 4, 2, 2, 1, 10, 5};
  EXPECT_EQ(flops_acc(l), 381u);
  EXPECT_EQ(flops_mac(l), 16u);
}

TEST(Flops, SilentLayerAccEqualsMac) {
  LayerFlopSpec l{"l", 3, 3, 2, 7, 5, 3, 1, 0, 0};
  EXPECT_EQ(flops_acc(l), flops_mac(l));
}

TEST(Flops, MacNeverExceedsAcc) {
  Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    LayerFlopSpec l{"l", 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3), 1 + rng.below(64), 1 + rng.below(50),
                    1 + rng.below(50), 1, rng.below(1000), rng.below(1000)};
    EXPECT_LE(flops_mac(l), flops_acc(l));
  }
}

TEST(Flops, DoublingInputSpikesDoublesFirstTerm) {
  Rng rng(20);
  Network<float> net(desk_spec(4), 8);
  const auto seg = forward_segment(random_image(rng, {40, 40}), net);
  auto doubled = seg.trace.layers;
  std::uint64_t first = 0;
  for (auto& l : doubled) {
    first += l.spikes_in * (l.kernel_h / l.stride) * (l.kernel_w / l.stride) * l.c_out;
    l.spikes_in *= 2;
  }
  EXPECT_GT(first, 0u);
  EXPECT_EQ(total_flops(doubled).acc, total_flops(seg.trace.layers).acc + first);
  EXPECT_EQ(total_flops(doubled).mac, total_flops(seg.trace.layers).mac);
}

TEST(Flops, TraceCountsMatchSpikeCache) {
  Rng rng(22);
  Network<float> net(desk_spec(4), 9);
  RunOptions o;
  o.keep_cache = true;
  o.record_trace = true;
  const auto res = net.forward({encode_image<float>(random_image(rng, {24, 24}), 1)}, o);
  const auto& tr = res.traces[0];
  std::size_t spiking = 0;
  for (const auto& l : tr.layers) {
    if (l.name == "classifier") {
      EXPECT_EQ(l.spikes_out, 0u);
    } else {
      EXPECT_EQ(l.spikes_out, tr.activity[spiking++].spikes);
    }
  }
  EXPECT_EQ(tr.layers.front().name, "stem");
  EXPECT_EQ(tr.layers.front().h_out, 12u);
}

TEST(Activation, SilentAndSaturated) {
  SpikeTrace t;
  t.activity = {{"a", 10, 0, 0}, {"b", 6, 0, 0}};
  EXPECT_EQ(activation_rate(t), 0.0);
  t.activity = {{"a", 10, 10, 10}, {"b", 6, 6, 6}};
  EXPECT_EQ(activation_rate(t), 1.0);
  t.activity = {{"a", 10, 2, 2}, {"b", 6, 6, 6}};
  EXPECT_DOUBLE_EQ(activation_rate(t), 0.5);
}

// ---- checkpoints

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(23);
  Network<float> net(desk_spec(4), 10);
  net.for_each_unit([&](snn::detail::ConvUnit<float>& u) {
    for (auto& v : u.running_mean) v = static_cast<float>(rng.uniform(-1, 1));
  });
  const auto bytes = write_checkpoint(net);
  auto back = parse_checkpoint(bytes);
  EXPECT_EQ(write_checkpoint(back), bytes);
  const auto img = random_image(rng, {30, 30});
  EXPECT_EQ(forward_segment(img, net).scores.v, forward_segment(img, back).scores.v);
  auto folded = net.folded();
  auto folded_back = parse_checkpoint(write_checkpoint(folded));
  EXPECT_TRUE(folded_back.is_folded());
  EXPECT_EQ(write_checkpoint(folded_back), write_checkpoint(folded));
}

TEST(Checkpoint, Corrupt) {
  Network<float> net(desk_spec(4), 10);
  auto bytes = write_checkpoint(net);
  auto cut = bytes;
  cut.resize(cut.size() / 2);
  EXPECT_EQ(code_of([&] { parse_checkpoint(cut); }), Errc::TruncatedStream);
  bytes[0] = 'X';
  EXPECT_EQ(code_of([&] { parse_checkpoint(bytes); }), Errc::BadMagic);
}

TEST(Spec, IniRoundTrip) {
  const auto s = desk_spec(4);
  const auto back = NetworkSpec::from_config(Config::parse(s.to_ini()));
  EXPECT_EQ(back.to_ini(), s.to_ini());
  EXPECT_EQ(parameter_count(NetworkSpec::from_config(Config::load(testutil::data_path("nets/reference.ini")))),
            parameter_count(reference_spec()));
  EXPECT_EQ(NetworkSpec::from_config(Config::load(testutil::data_path("nets/desk.ini"))).to_ini(), s.to_ini());
}
