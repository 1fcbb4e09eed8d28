// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "normlab/moments.hpp"
#include "normlab/partition.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

inline constexpr double kDefaultEpsilon = 1e-5;

/// Per-channel scale and shift with the variance stabilizer.
struct NormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  double epsilon = kDefaultEpsilon;

  /// gamma = 1, beta = 0.
  static NormParams identity(std::size_t channels, double epsilon = kDefaultEpsilon);

  std::size_t channels() const { return gamma.size(); }
  /// Throws ConfigError (epsilon <= 0, non-finite) or DimensionError (lengths).
  void validate(std::size_t channels) const;

  friend bool operator==(const NormParams&, const NormParams&) = default;
};

/// Everything backward needs from a training forward pass.
struct ForwardCache {
  StatPartition partition;
  Moments moments;
  std::vector<double> inv_std;  // per group, 1 / sqrt(var + eps)
  std::vector<double> gamma;
  Tensor4 normalized;           // pre-affine (x - mean) * inv_std
};

struct GradientBundle {
  Tensor4 d_input;
  std::vector<double> d_gamma;
  std::vector<double> d_beta;
};

struct TrainForward {
  Tensor4 y;
  ForwardCache cache;
  MovingMoments moving;
};

/// y = gamma_c * (x - mean_g) / sqrt(var_g + eps) + beta_c over the train
/// partition of `scheme`, and one moving-moment update from `x`.
TrainForward forward_train(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                           const MovingMoments& moving);

/// Inference with per-example statistics blended into the moving moments.
/// Uses `scheme.alpha` unless `alpha` is given. Each example is normalized
/// independently of the rest of the batch.
Tensor4 forward_infer(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                      const MovingMoments& moving, std::optional<double> alpha = std::nullopt,
                      double max_alpha = 1.0);

/// Classical inference: per-channel moving mean and variance only.
Tensor4 forward_moving_average(const Tensor4& x, const NormParams& params,
                               const MovingMoments& moving);

GradientBundle backward(const ForwardCache& cache, const Tensor4& dy);

/// Central finite differences of <forward_train(x).y, dy> with respect to
/// every input cell, gamma and beta, compared against `backward`. Returns the
/// largest |analytic - numeric| / max(|analytic|, |numeric|, floor).
double finite_diff_check(const Tensor4& x, const NormParams& params, const NormScheme& scheme,
                         const Tensor4& dy, double step, double floor = 1e-6);

}  // namespace normlab
