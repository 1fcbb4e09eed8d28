// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "normlab/rng.hpp"
#include "normlab/training.hpp"

namespace normlab {

void ModelSpec::validate() const {
  if (in_channels == 0 || n_classes < 2 || widths.empty()) {
    throw ConfigError("model needs in_channels >= 1, n_classes >= 2 and at least one block");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("block widths must be >= 1");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0,1)");
}

SoftmaxXent softmax_xent(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DimensionError("softmax_xent: label " + std::to_string(label) + " out of range");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  SoftmaxXent out{0.0, std::vector<double>(logits.size())};
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out.d_logits[k] = std::exp(logits[k] - top);
    total += out.d_logits[k];
  }
  const auto y = static_cast<std::size_t>(label);
  out.loss = std::log(total) - (logits[y] - top);
  for (double& p : out.d_logits) p /= total;
  out.d_logits[y] -= 1.0;
  return out;
}

namespace {

// (N, in, H, W) -> (N, out, H, W): per-position out = W * in + b.
Tensor4 mix_channels(const Tensor4& x, const Block& b) {
  const Shape& s = x.shape();
  if (s.c != b.in) throw DimensionError("block expects " + std::to_string(b.in) + " channels");
  Shape os = s;
  os.c = b.out;
  std::vector<double> out(os.size());
  const std::size_t hw = s.spatial();
  const auto in = x.values();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < b.out; ++o) {
      double* dst = out.data() + (n * b.out + o) * hw;
      std::fill_n(dst, hw, b.bias[o]);
      for (std::size_t i = 0; i < b.in; ++i) {
        const double w = b.weight[o * b.in + i];
        const double* src = in.data() + (n * s.c + i) * hw;
        for (std::size_t p = 0; p < hw; ++p) dst[p] += w * src[p];
      }
    }
  }
  return Tensor4(os, std::move(out));
}

// Accumulates dW, db; returns d_input.
Tensor4 mix_channels_backward(const Tensor4& x, const Block& b, const Tensor4& d_out,
                              std::vector<double>& d_weight, std::vector<double>& d_bias) {
  const Shape& s = x.shape();
  const std::size_t hw = s.spatial();
  Tensor4 d_in = Tensor4::zeros(s);
  auto dx = d_in.mutable_values();
  const auto in = x.values();
  const auto dy = d_out.values();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < b.out; ++o) {
      const double* g = dy.data() + (n * b.out + o) * hw;
      double gs = 0.0;
      for (std::size_t p = 0; p < hw; ++p) gs += g[p];
      d_bias[o] += gs;
      for (std::size_t i = 0; i < b.in; ++i) {
        const double* src = in.data() + (n * s.c + i) * hw;
        double* dst = dx.data() + (n * s.c + i) * hw;
        const double w = b.weight[o * b.in + i];
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) {
          acc += g[p] * src[p];
          dst[p] += w * g[p];
        }
        d_weight[o * b.in + i] += acc;
      }
    }
  }
  return d_in;
}

Tensor4 relu(const Tensor4& y) {
  return y.map_cells([](double v) { return v > 0.0 ? v : 0.0; });
}

// (N, C, H, W) -> N x C spatial means.
std::vector<double> pool(const Tensor4& r) {
  const Shape& s = r.shape();
  const std::size_t hw = s.spatial();
  std::vector<double> out(s.n * s.c);
  const auto v = r.values();
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += v[k * hw + p];
    out[k] = acc / static_cast<double>(hw);
  }
  return out;
}

std::vector<double> classify(const std::vector<double>& pooled, std::size_t n, std::size_t width,
                             const std::vector<double>& weight, const std::vector<double>& bias) {
  const std::size_t classes = bias.size();
  std::vector<double> logits(n * classes);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t k = 0; k < classes; ++k) {
      double acc = bias[k];
      for (std::size_t c = 0; c < width; ++c) acc += weight[k * width + c] * pooled[e * width + c];
      logits[e * classes + k] = acc;
    }
  }
  return logits;
}

OutputBound layer_bound(const NormParams& p, std::size_t group_cells) {
  OutputBound env{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < p.channels(); ++c) {
    const OutputBound b = output_bound(p.gamma[c], p.beta[c], group_cells);
    env.lo = std::min(env.lo, b.lo);
    env.hi = std::max(env.hi, b.hi);
  }
  return env;
}

}  // namespace

Network Network::init(const ModelSpec& spec, const NormScheme& scheme, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec_ = spec;
  net.scheme_ = scheme;
  Rng rng(seed, 7);
  std::size_t in = spec.in_channels;
  for (std::size_t width : spec.widths) {
    Block b;
    b.in = in;
    b.out = width;
    b.weight.resize(width * in);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : b.weight) w = scale * rng.normal();
    b.bias.assign(width, 0.0);
    b.norm = NormParams::identity(width, spec.epsilon);
    b.moving = MovingMoments::init(width, spec.rho);
    net.blocks_.push_back(std::move(b));
    in = width;
  }
  net.cls_weight_.resize(spec.n_classes * in);
  const double scale = std::sqrt(1.0 / static_cast<double>(in));
  for (double& w : net.cls_weight_) w = scale * rng.normal();
  net.cls_bias_.assign(spec.n_classes, 0.0);
  return net;
}

Network Network::from_parts(const ModelSpec& spec, const NormScheme& scheme,
                            std::vector<Block> blocks, std::vector<double> cls_weight,
                            std::vector<double> cls_bias) {
  spec.validate();
  if (blocks.size() != spec.widths.size()) throw DimensionError("checkpoint block count mismatch");
  std::size_t in = spec.in_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const std::size_t out = spec.widths[i];
    if (b.in != in || b.out != out || b.weight.size() != in * out || b.bias.size() != out ||
        b.moving.channels() != out || b.moving.m_x2.size() != out) {
      throw DimensionError("checkpoint block " + std::to_string(i) + " has inconsistent sizes");
    }
    b.norm.validate(out);
    in = out;
  }
  if (cls_weight.size() != spec.n_classes * in || cls_bias.size() != spec.n_classes) {
    throw DimensionError("checkpoint classifier has inconsistent sizes");
  }
  Network net;
  net.spec_ = spec;
  net.scheme_ = scheme;
  net.blocks_ = std::move(blocks);
  net.cls_weight_ = std::move(cls_weight);
  net.cls_bias_ = std::move(cls_bias);
  return net;
}

std::vector<std::span<double>> Network::parameters() {
  std::vector<std::span<double>> out;
  for (Block& b : blocks_) {
    out.emplace_back(b.weight);
    out.emplace_back(b.bias);
    out.emplace_back(b.norm.gamma);
    out.emplace_back(b.norm.beta);
  }
  out.emplace_back(cls_weight_);
  out.emplace_back(cls_bias_);
  return out;
}

std::vector<std::size_t> Network::weight_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) out.push_back(4 * i);
  out.push_back(4 * blocks_.size());
  return out;
}

LossResult Network::train_step_grads(const Tensor4& x, std::span<const int> labels,
                                     NetworkGrads& grads, bool update_moving,
                                     RangeTracker* tracker) {
  const std::size_t n = x.shape().n;
  if (labels.size() != n) throw DimensionError("train step: label count mismatch");

  struct Stage {
    Tensor4 input;
    ForwardCache cache;
    Tensor4 y;
  };
  std::vector<Stage> stages;
  stages.reserve(blocks_.size());
  Tensor4 h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Block& b = blocks_[i];
    Tensor4 a = mix_channels(h, b);
    TrainForward f = forward_train(a, b.norm, scheme_, b.moving);
    if (update_moving) b.moving = std::move(f.moving);
    if (tracker != nullptr) {
      tracker->track(i, f.y, Mode::train);
      const std::size_t cells = f.cache.partition.count(0);
      if (cells >= 2) tracker->track_bound(i, layer_bound(b.norm, cells));
    }
    Tensor4 r = relu(f.y);
    stages.push_back(Stage{std::move(h), std::move(f.cache), std::move(f.y)});
    h = std::move(r);
  }
  const std::size_t width = blocks_.back().out;
  const std::size_t classes = spec_.n_classes;
  const std::vector<double> pooled = pool(h);
  const std::vector<double> logits = classify(pooled, n, width, cls_weight_, cls_bias_);

  grads.tensors.resize(4 * blocks_.size() + 2);
  auto params = parameters();
  for (std::size_t t = 0; t < params.size(); ++t) grads.tensors[t].assign(params[t].size(), 0.0);

  LossResult result;
  std::vector<double> d_logits(n * classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t e = 0; e < n; ++e) {
    const std::span<const double> row(logits.data() + e * classes, classes);
    const SoftmaxXent sx = softmax_xent(row, labels[e]);
    result.loss += sx.loss * inv_n;
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == static_cast<std::size_t>(labels[e])) ++result.correct;
    for (std::size_t k = 0; k < classes; ++k) d_logits[e * classes + k] = sx.d_logits[k] * inv_n;
  }

  auto& d_cls_w = grads.tensors[4 * blocks_.size()];
  auto& d_cls_b = grads.tensors[4 * blocks_.size() + 1];
  std::vector<double> d_pooled(n * width, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t k = 0; k < classes; ++k) {
      const double g = d_logits[e * classes + k];
      d_cls_b[k] += g;
      for (std::size_t c = 0; c < width; ++c) {
        d_cls_w[k * width + c] += g * pooled[e * width + c];
        d_pooled[e * width + c] += g * cls_weight_[k * width + c];
      }
    }
  }

  // Back through pooling: every spatial cell receives d_pooled / HW.
  const Shape& hs = h.shape();
  const std::size_t hw = hs.spatial();
  Tensor4 d_h = Tensor4::zeros(hs);
  {
    auto dv = d_h.mutable_values();
    for (std::size_t k = 0; k < n * width; ++k) {
      const double g = d_pooled[k] / static_cast<double>(hw);
      std::fill_n(dv.begin() + static_cast<std::ptrdiff_t>(k * hw), hw, g);
    }
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    Stage& st = stages[i];
    auto dv = d_h.mutable_values();
    const auto yv = st.y.values();
    for (std::size_t k = 0; k < dv.size(); ++k) {
      if (!(yv[k] > 0.0)) dv[k] = 0.0;
    }
    GradientBundle gb = backward(st.cache, d_h);
    grads.tensors[4 * i + 2] = std::move(gb.d_gamma);
    grads.tensors[4 * i + 3] = std::move(gb.d_beta);
    d_h = mix_channels_backward(st.input, blocks_[i], gb.d_input, grads.tensors[4 * i],
                                grads.tensors[4 * i + 1]);
  }
  return result;
}

double Network::train_loss(const Tensor4& x, std::span<const int> labels) const {
  Network copy = *this;
  NetworkGrads scratch;
  return copy.train_step_grads(x, labels, scratch, false).loss;
}

std::vector<Tensor4> Network::train_norm_outputs(const Tensor4& x) const {
  std::vector<Tensor4> out;
  out.reserve(blocks_.size());
  Tensor4 h = x;
  for (const Block& b : blocks_) {
    out.push_back(forward_train(mix_channels(h, b), b.norm, scheme_, b.moving).y);
    h = relu(out.back());
  }
  return out;
}

std::vector<double> Network::infer_logits(const Tensor4& x, double alpha, double max_alpha,
                                          RangeTracker* tracker) const {
  Tensor4 h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    Tensor4 y = forward_infer(mix_channels(h, b), b.norm, scheme_, b.moving, alpha, max_alpha);
    if (tracker != nullptr) tracker->track(i, y, Mode::infer);
    h = relu(y);
  }
  return classify(pool(h), x.shape().n, blocks_.back().out, cls_weight_, cls_bias_);
}

}  // namespace normlab
