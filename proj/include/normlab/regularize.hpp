// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "normlab/layers.hpp"

namespace normlab {

/// Decoupled weight decay, applied after each optimizer step.
struct WeightDecayConfig {
  double delta = 0.0;
  int gamma_target = 1;  // 0 or 1
  bool apply_to_norm_params = false;
  bool apply_to_weights = false;

  /// delta in [0, 1) and gamma_target in {0, 1}, else ConfigError.
  void validate() const;
};

/// gamma <- gamma - delta * (gamma - target), beta <- (1 - delta) * beta.
NormParams decay_step(const NormParams& params, const WeightDecayConfig& cfg);

/// w <- (1 - delta) * w.
std::vector<double> decay_weights(std::span<const double> w, const WeightDecayConfig& cfg);
void decay_weights_in_place(std::span<double> w, const WeightDecayConfig& cfg);

}  // namespace normlab
