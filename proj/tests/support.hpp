// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the test binaries: seeded random inputs and brute-force
// oracles that do not reuse the library's partition code.

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <tuple>
#include <vector>

#include "normlab/partition.hpp"
#include "normlab/rng.hpp"
#include "normlab/tensor.hpp"

namespace normlab::testing {

inline Tensor4 random_tensor(const Shape& s, std::uint64_t seed, double scale = 1.0,
                             double shift = 0.0) {
  Rng rng(seed, 99);
  std::vector<double> v(s.size());
  for (double& x : v) x = shift + scale * rng.normal();
  return Tensor4(s, std::move(v));
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed, 98);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

/// Group label of (example n, channel c) straight from the scheme
/// definitions: example block index and channel block index.
inline std::pair<std::size_t, std::size_t> oracle_key(const NormScheme& s, const Shape& shape,
                                                      Mode mode, std::size_t n, std::size_t c) {
  const bool per_example = mode == Mode::infer;
  switch (s.kind) {
    case SchemeKind::batch: return {per_example ? n : 0, c};
    case SchemeKind::ghost: return {per_example ? n : n / s.ghost_size, c};
    case SchemeKind::group: return {n, c / (shape.c / s.channel_groups)};
    case SchemeKind::batch_group:
      return {per_example ? n : n / s.example_group, c / (shape.c / s.channel_groups)};
  }
  return {0, 0};
}

/// Per-cell oracle group ids, renumbered densely in first-seen order.
inline std::vector<std::size_t> oracle_groups(const NormScheme& s, const Shape& shape, Mode mode) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> ids;
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < shape.n; ++n) {
    for (std::size_t c = 0; c < shape.c; ++c) {
      const auto key = oracle_key(s, shape, mode, n, c);
      const auto [it, fresh] = ids.emplace(key, ids.size());
      for (std::size_t k = 0; k < shape.spatial(); ++k) out.push_back(it->second);
    }
  }
  return out;
}

/// Renumbers a cell-to-group map densely in first-seen order, so two maps
/// describing the same partition compare equal.
template <typename Id>
std::vector<std::size_t> canonical(const std::vector<Id>& map) {
  std::map<Id, std::size_t> ids;
  std::vector<std::size_t> out;
  out.reserve(map.size());
  for (Id g : map) out.push_back(ids.emplace(g, ids.size()).first->second);
  return out;
}

/// Two-pass mean and ML variance per oracle group.
struct NaiveStats {
  std::vector<double> mean;
  std::vector<double> var;
};

inline NaiveStats naive_stats(const Tensor4& x, const std::vector<std::size_t>& groups) {
  std::size_t n_groups = 0;
  for (std::size_t g : groups) n_groups = std::max(n_groups, g + 1);
  NaiveStats st{std::vector<double>(n_groups, 0.0), std::vector<double>(n_groups, 0.0)};
  std::vector<double> count(n_groups, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    st.mean[groups[i]] += x[i];
    count[groups[i]] += 1.0;
  }
  for (std::size_t g = 0; g < n_groups; ++g) st.mean[g] /= count[g];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - st.mean[groups[i]];
    st.var[groups[i]] += d * d;
  }
  for (std::size_t g = 0; g < n_groups; ++g) st.var[g] /= count[g];
  return st;
}

inline double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace normlab::testing
