// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "normlab/partition.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

/// Per-group statistics. `var` is the maximum-likelihood estimate and
/// `second` the raw second moment E[x^2].
struct Moments {
  std::vector<double> mean;
  std::vector<double> second;
  std::vector<double> var;
  std::vector<std::size_t> count;

  std::size_t size() const { return mean.size(); }
};

inline constexpr double kDefaultRho = 0.99;

/// Exponential moving averages of the raw moments E[x] and E[x^2], per channel.
struct MovingMoments {
  std::vector<double> m_x;
  std::vector<double> m_x2;
  double rho = kDefaultRho;

  /// m_x = 0, m_x2 = 1 for every channel.
  static MovingMoments init(std::size_t channels, double rho = kDefaultRho);

  std::size_t channels() const { return m_x.size(); }
  double implied_variance(std::size_t c) const { return m_x2[c] - m_x[c] * m_x[c]; }

  friend bool operator==(const MovingMoments&, const MovingMoments&) = default;
};

/// Mean, raw second moment and ML variance (two-pass) per group of `p`.
Moments compute_moments(const Tensor4& x, const StatPartition& p);

/// One EMA step toward the per-channel batch moments of `x`.
MovingMoments update_moving(const MovingMoments& m, const Tensor4& x);

/// Converts a conventional (mean, variance) checkpoint to raw moments.
/// Throws DomainError on negative variance.
MovingMoments from_mean_var(std::span<const double> mean, std::span<const double> var,
                            double rho = kDefaultRho);

/// Mixes each group's example statistics with the moving moments of its
/// member channels (averaged when a group spans several channels):
///
///   mean   = alpha * E[x]   + (1 - alpha) * m_x
///   second = alpha * E[x^2] + (1 - alpha) * m_x2
///   var    = max(second - mean^2, 0)
///
/// `var` is evaluated as alpha * var_x + (1 - alpha) * var_m
/// + alpha (1 - alpha) (E[x] - m_x)^2, which is the same quantity without
/// the cancellation; alpha = 0 and alpha = 1 return the source variances.
///
/// `alpha` must lie in [0, max_alpha]; the default limit is 1, extrapolating
/// sweeps raise it. Throws ConfigError otherwise.
Moments blend(const Moments& example, const StatPartition& p, const MovingMoments& moving,
              double alpha, double max_alpha = 1.0);

/// CSV checkpoint form: `rho,<value>` line, `channel,m_x,m_x2` header, rows.
void write_csv(std::ostream& os, const MovingMoments& m);
MovingMoments read_moving_csv(std::istream& is);

}  // namespace normlab
