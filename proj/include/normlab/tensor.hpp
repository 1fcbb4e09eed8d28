// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "normlab/errors.hpp"

namespace normlab {

class StatPartition;

/// Extents of an (examples, channels, height, width) grid.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t spatial() const { return h * w; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense 4-axis grid of doubles, example-major then channel, row, column.
class Tensor4 {
 public:
  Tensor4() = default;
  /// Takes ownership of `values`; throws DimensionError on a length mismatch
  /// or zero extent and NumericError if any value is non-finite.
  Tensor4(Shape shape, std::vector<double> values);

  static Tensor4 zeros(Shape shape);
  static Tensor4 zeros(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return zeros(Shape{n, c, h, w});
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[index(n, c, h, w)];
  }
  double& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[index(n, c, h, w)];
  }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// Channel of flat cell index `i`.
  std::size_t channel_of(std::size_t i) const { return (i / shape_.spatial()) % shape_.c; }

  /// Applies `f` to every cell. Throws NumericError if `f` yields NaN/Inf.
  template <typename F>
  Tensor4 map_cells(F&& f) const {
    Tensor4 out = *this;
    for (double& v : out.values_) {
      v = f(v);
      if (!std::isfinite(v)) throw NumericError("map_cells: non-finite result");
    }
    return out;
  }

  /// Throws NumericError if any cell is NaN/Inf.
  void check_finite(const char* context) const;

  /// Copies examples [first, first + count) into a new tensor.
  Tensor4 slice_examples(std::size_t first, std::size_t count) const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

/// Per-group sum, sum of squares and cell count.
struct GroupSums {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<std::size_t> count;
};

GroupSums group_sums(const Tensor4& x, const StatPartition& p);

/// CSV form: header `n,c,h,w`, then one value per line at round-trip precision.
void write_csv(std::ostream& os, const Tensor4& x);
Tensor4 read_tensor_csv(std::istream& is);

}  // namespace normlab
