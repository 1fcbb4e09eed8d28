// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/tensor.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "normlab/partition.hpp"

namespace normlab {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace {

void require_nonzero(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("tensor extents must be >= 1, got " + s.str());
  }
}

}  // namespace

Tensor4::Tensor4(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  require_nonzero(shape_);
  if (values_.size() != shape_.size()) {
    throw DimensionError("tensor " + shape_.str() + " needs " + std::to_string(shape_.size()) +
                         " values, got " + std::to_string(values_.size()));
  }
  check_finite("Tensor4");
}

Tensor4 Tensor4::zeros(Shape shape) {
  require_nonzero(shape);
  return Tensor4(shape, std::vector<double>(shape.size(), 0.0));
}

void Tensor4::check_finite(const char* context) const {
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericError(std::string(context) + ": non-finite value");
  }
}

Tensor4 Tensor4::slice_examples(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > shape_.n) {
    throw DimensionError("slice_examples out of range for " + shape_.str());
  }
  const std::size_t stride = shape_.c * shape_.spatial();
  Shape s = shape_;
  s.n = count;
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                        values_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return Tensor4(s, std::move(v));
}

GroupSums group_sums(const Tensor4& x, const StatPartition& p) {
  p.require_shape(x.shape(), "group_sums");
  GroupSums out;
  const std::size_t g = p.n_groups();
  out.sum.assign(g, 0.0);
  out.sum_sq.assign(g, 0.0);
  out.count.assign(g, 0);
  const auto values = x.values();
  const auto& map = p.group_of_cell();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t k = map[i];
    out.sum[k] += values[i];
    out.sum_sq[k] += values[i] * values[i];
    ++out.count[k];
  }
  return out;
}

void write_csv(std::ostream& os, const Tensor4& x) {
  const Shape& s = x.shape();
  os << s.n << ',' << s.c << ',' << s.h << ',' << s.w << '\n';
  char buf[32];
  for (double v : x.values()) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, end - buf);
    os << '\n';
  }
}

namespace {

std::size_t parse_extent(const std::string& field) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw InputError("tensor csv: bad extent '" + field + "'");
  }
  return v;
}

}  // namespace

Tensor4 read_tensor_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("tensor csv: missing header");
  std::istringstream header(line);
  std::size_t dims[4];
  std::string field;
  for (std::size_t& d : dims) {
    if (!std::getline(header, field, ',')) throw InputError("tensor csv: header needs n,c,h,w");
    d = parse_extent(field);
  }
  const Shape shape{dims[0], dims[1], dims[2], dims[3]};
  std::vector<double> values;
  values.reserve(shape.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{}) throw InputError("tensor csv: bad value '" + line + "'");
    values.push_back(v);
  }
  return Tensor4(shape, std::move(values));
}

}  // namespace normlab
