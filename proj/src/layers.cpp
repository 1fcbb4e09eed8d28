// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace normlab {

NormParams NormParams::identity(std::size_t channels, double epsilon) {
  return NormParams{std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0), epsilon};
}

void NormParams::validate(std::size_t channels) const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
  if (gamma.size() != channels || beta.size() != channels) {
    throw DimensionError("norm params sized for " + std::to_string(gamma.size()) +
                         " channels, input has " + std::to_string(channels));
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (!std::isfinite(gamma[c]) || !std::isfinite(beta[c])) {
      throw NumericError("norm params: non-finite gamma/beta");
    }
  }
}

namespace {

struct Normalized {
  Tensor4 y;
  Tensor4 xhat;
  std::vector<double> inv_std;
};

Normalized normalize(const Tensor4& x, const StatPartition& p, const Moments& m,
                     const NormParams& params) {
  Normalized out{x, x, std::vector<double>(m.size())};
  for (std::size_t g = 0; g < m.size(); ++g) out.inv_std[g] = 1.0 / std::sqrt(m.var[g] + params.epsilon);

  const auto in = x.values();
  auto y = out.y.mutable_values();
  auto xhat = out.xhat.mutable_values();
  const auto& map = p.group_of_cell();
  const Shape& s = x.shape();
  const std::size_t hw = s.spatial();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t g = map[i];
    const std::size_t c = (i / hw) % s.c;
    xhat[i] = (in[i] - m.mean[g]) * out.inv_std[g];
    y[i] = params.gamma[c] * xhat[i] + params.beta[c];
  }
  out.y.check_finite("normalization output");
  return out;
}

}  // namespace

TrainForward forward_train(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                           const MovingMoments& moving) {
  params.validate(x.shape().c);
  StatPartition p = partition_of(scheme, x.shape(), Mode::train);
  Moments m = compute_moments(x, p);
  Normalized n = normalize(x, p, m, params);
  MovingMoments next = update_moving(moving, x);
  return TrainForward{
      std::move(n.y),
      ForwardCache{std::move(p), std::move(m), std::move(n.inv_std), params.gamma, std::move(n.xhat)},
      std::move(next)};
}

Tensor4 forward_infer(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                      const MovingMoments& moving, std::optional<double> alpha, double max_alpha) {
  params.validate(x.shape().c);
  const double a = alpha.value_or(scheme.alpha);
  const StatPartition p = partition_of(scheme.with_alpha(0.0), x.shape(), Mode::infer);
  const Moments blended = blend(compute_moments(x, p), p, moving, a, max_alpha);
  return normalize(x, p, blended, params).y;
}

Tensor4 forward_moving_average(const Tensor4& x, const NormParams& params,
                               const MovingMoments& moving) {
  const Shape& s = x.shape();
  params.validate(s.c);
  if (moving.channels() != s.c) throw DimensionError("forward_moving_average: channel mismatch");
  Tensor4 y = x;
  auto v = y.mutable_values();
  const std::size_t hw = s.spatial();
  for (std::size_t c = 0; c < s.c; ++c) {
    const double mean = moving.m_x[c];
    const double var = std::max(moving.m_x2[c] - mean * mean, 0.0);
    const double inv_std = 1.0 / std::sqrt(var + params.epsilon);
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = x.index(n, c, 0, 0);
      for (std::size_t k = 0; k < hw; ++k) {
        const double xhat = (v[base + k] - mean) * inv_std;
        v[base + k] = params.gamma[c] * xhat + params.beta[c];
      }
    }
  }
  y.check_finite("moving-average inference");
  return y;
}

GradientBundle backward(const ForwardCache& cache, const Tensor4& dy) {
  const Shape& s = cache.normalized.shape();
  if (!(dy.shape() == s)) {
    throw DimensionError("backward: dy is " + dy.shape().str() + ", forward was " + s.str());
  }
  const std::size_t groups = cache.partition.n_groups();
  const auto& map = cache.partition.group_of_cell();
  const auto xhat = cache.normalized.values();
  const auto d = dy.values();
  const std::size_t hw = s.spatial();

  GradientBundle out{Tensor4::zeros(s), std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  // Gradient w.r.t. xhat is gamma_c * dy; groups may span channels.
  std::vector<double> sum_g(groups, 0.0);
  std::vector<double> sum_gx(groups, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = (i / hw) % s.c;
    const std::size_t g = map[i];
    const double gi = cache.gamma[c] * d[i];
    sum_g[g] += gi;
    sum_gx[g] += gi * xhat[i];
    out.d_beta[c] += d[i];
    out.d_gamma[c] += d[i] * xhat[i];
  }
  for (std::size_t g = 0; g < groups; ++g) {
    const auto n = static_cast<double>(cache.partition.count(g));
    sum_g[g] /= n;
    sum_gx[g] /= n;
  }
  auto dx = out.d_input.mutable_values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = (i / hw) % s.c;
    const std::size_t g = map[i];
    dx[i] = cache.inv_std[g] * (cache.gamma[c] * d[i] - sum_g[g] - xhat[i] * sum_gx[g]);
  }
  return out;
}

namespace {

// <y(+) - y(-), dy>; unchanged cells contribute exact zeros.
double paired_difference(const Tensor4& plus, const Tensor4& minus, const Tensor4& dy) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dy.size(); ++i) acc += (plus[i] - minus[i]) * dy[i];
  return acc;
}

}  // namespace

double finite_diff_check(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                         const Tensor4& dy, double step, double floor) {
  if (!(step > 0.0)) throw DomainError("finite_diff_check: step must be > 0");
  const MovingMoments moving = MovingMoments::init(x.shape().c);
  const TrainForward base = forward_train(x, params, scheme, moving);
  const GradientBundle grads = backward(base.cache, dy);
  auto y_at = [&](const Tensor4& xi, const NormParams& pi) {
    return forward_train(xi, pi, scheme, moving).y;
  };

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };

  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor4 xp = x;
    Tensor4 xm = x;
    xp[i] += step;
    xm[i] -= step;
    compare(grads.d_input[i], paired_difference(y_at(xp, params), y_at(xm, params), dy) / (2 * step));
  }
  for (std::size_t c = 0; c < params.channels(); ++c) {
    for (int which = 0; which < 2; ++which) {
      NormParams pp = params;
      NormParams pm = params;
      auto& vp = which == 0 ? pp.gamma : pp.beta;
      auto& vm = which == 0 ? pm.gamma : pm.beta;
      vp[c] += step;
      vm[c] -= step;
      const double numeric = paired_difference(y_at(x, pp), y_at(x, pm), dy) / (2 * step);
      compare(which == 0 ? grads.d_gamma[c] : grads.d_beta[c], numeric);
    }
  }
  return worst;
}

}  // namespace normlab
