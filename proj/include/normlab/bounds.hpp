// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "normlab/partition.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

struct OutputBound {
  double lo;
  double hi;
};

/// Range reachable by a training-mode output over a group of `group_cells`
/// cells: beta -/+ |gamma| * sqrt(group_cells - 1). DomainError below 2 cells.
OutputBound output_bound(double gamma, double beta, std::size_t group_cells);

/// The batch [0, a, ..., a] that attains the lower bound as a grows.
struct TightnessProbe {
  std::size_t group_size = 2;
  double a = 0.0;
  double epsilon = 1e-5;
};

/// -(B - 1) a / sqrt(a^2 (B - 1) + eps). DomainError if group_size < 2,
/// a < 0 or epsilon <= 0. Equals the lowest output of a unit-gamma layer
/// with stabilizer eps / B^2 on tightness_batch(probe); both tend to
/// -sqrt(B - 1) as a grows.
double tightness_value(const TightnessProbe& probe);

/// Shape (B, 1, 1, 1) tensor holding the probe batch.
Tensor4 tightness_batch(const TightnessProbe& probe);

struct ValueRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  bool empty() const { return min > max; }
  void add(double v) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  void merge(const ValueRange& o) {
    if (o.empty()) return;
    add(o.min);
    add(o.max);
  }
};

/// Running min/max of normalization outputs per layer and mode, plus the
/// envelope of the theoretical bound seen alongside the train-mode values.
class RangeTracker {
 public:
  explicit RangeTracker(std::size_t layers = 0) { resize(layers); }

  void resize(std::size_t layers);
  std::size_t layers() const { return train_.size(); }

  void track(std::size_t layer, const Tensor4& y, Mode mode);
  void track_bound(std::size_t layer, const OutputBound& b);

  const ValueRange& range(std::size_t layer, Mode mode) const {
    return mode == Mode::train ? train_.at(layer) : infer_.at(layer);
  }
  /// Loosest bound recorded for `layer` (lo = min, hi = max over calls).
  const ValueRange& bound_envelope(std::size_t layer) const { return bound_.at(layer); }

 private:
  std::vector<ValueRange> train_;
  std::vector<ValueRange> infer_;
  std::vector<ValueRange> bound_;
};

struct RangeRow {
  std::size_t layer = 0;
  Mode mode = Mode::train;
  double min = 0.0;
  double max = 0.0;
  double bound_lo = 0.0;
  double bound_hi = 0.0;

  /// min >= bound_lo and max <= bound_hi.
  bool within_bound() const { return min >= bound_lo && max <= bound_hi; }
};

/// Header `layer,mode,min,max,bound_lo,bound_hi`.
void write_range_csv(std::ostream& os, const std::vector<RangeRow>& rows);

}  // namespace normlab
