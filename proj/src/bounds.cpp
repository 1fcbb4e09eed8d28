// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/bounds.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace normlab {

OutputBound output_bound(double gamma, double beta, std::size_t group_cells) {
  if (group_cells < 2) {
    throw DomainError("output_bound needs at least 2 cells per group, got " +
                      std::to_string(group_cells));
  }
  const double reach = std::abs(gamma) * std::sqrt(static_cast<double>(group_cells - 1));
  return OutputBound{beta - reach, beta + reach};
}

double tightness_value(const TightnessProbe& probe) {
  if (probe.group_size < 2) throw DomainError("tightness probe needs B >= 2");
  if (!(probe.a >= 0.0)) throw DomainError("tightness probe needs a >= 0");
  if (!(probe.epsilon > 0.0)) throw DomainError("tightness probe needs epsilon > 0");
  const auto k = static_cast<double>(probe.group_size - 1);
  return -k * probe.a / std::sqrt(probe.a * probe.a * k + probe.epsilon);
}

Tensor4 tightness_batch(const TightnessProbe& probe) {
  if (probe.group_size < 2) throw DomainError("tightness probe needs B >= 2");
  std::vector<double> v(probe.group_size, probe.a);
  v[0] = 0.0;
  return Tensor4(Shape{probe.group_size, 1, 1, 1}, std::move(v));
}

void RangeTracker::resize(std::size_t layers) {
  train_.resize(layers);
  infer_.resize(layers);
  bound_.resize(layers);
}

void RangeTracker::track(std::size_t layer, const Tensor4& y, Mode mode) {
  if (layer >= layers()) resize(layer + 1);
  ValueRange& r = mode == Mode::train ? train_[layer] : infer_[layer];
  for (double v : y.values()) r.add(v);
}

void RangeTracker::track_bound(std::size_t layer, const OutputBound& b) {
  if (layer >= layers()) resize(layer + 1);
  bound_[layer].add(b.lo);
  bound_[layer].add(b.hi);
}

void write_range_csv(std::ostream& os, const std::vector<RangeRow>& rows) {
  os << "layer,mode,min,max,bound_lo,bound_hi\n";
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, end - buf);
  };
  for (const RangeRow& r : rows) {
    os << r.layer << ',' << (r.mode == Mode::train ? "train" : "infer") << ',';
    put(r.min);
    os << ',';
    put(r.max);
    os << ',';
    put(r.bound_lo);
    os << ',';
    put(r.bound_hi);
    os << '\n';
  }
}

}  // namespace normlab
