// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/regularize.hpp"

#include <string>

namespace normlab {

void WeightDecayConfig::validate() const {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw ConfigError("weight decay delta must lie in [0,1), got " + std::to_string(delta));
  }
  if (gamma_target != 0 && gamma_target != 1) throw ConfigError("wd.gamma_target must be 0 or 1");
}

NormParams decay_step(const NormParams& params, const WeightDecayConfig& cfg) {
  if (!cfg.apply_to_norm_params) return params;
  NormParams out = params;
  const auto target = static_cast<double>(cfg.gamma_target);
  for (double& g : out.gamma) g -= cfg.delta * (g - target);
  for (double& b : out.beta) b *= 1.0 - cfg.delta;
  return out;
}

void decay_weights_in_place(std::span<double> w, const WeightDecayConfig& cfg) {
  if (!cfg.apply_to_weights) return;
  const double keep = 1.0 - cfg.delta;
  for (double& v : w) v *= keep;
}

std::vector<double> decay_weights(std::span<const double> w, const WeightDecayConfig& cfg) {
  std::vector<double> out(w.begin(), w.end());
  decay_weights_in_place(out, cfg);
  return out;
}

}  // namespace normlab
