// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab {

enum class Mode { train, infer };

enum class SchemeKind { batch, ghost, group, batch_group };

/// Which normalizer a layer applies, plus its inference blend weight.
///
/// `ghost_size` is B' (examples per ghost batch), `channel_groups` is G (the
/// number of channel groups, not channels per group) and `example_group` is
/// E (examples per batch-group block). Fields unused by `kind` stay 0.
struct NormScheme {
  SchemeKind kind = SchemeKind::batch;
  std::size_t ghost_size = 0;
  std::size_t channel_groups = 0;
  std::size_t example_group = 0;
  double alpha = 0.0;

  static NormScheme batch() { return {}; }
  static NormScheme ghost(std::size_t b) { return {SchemeKind::ghost, b, 0, 0, 0.0}; }
  static NormScheme group(std::size_t g) { return {SchemeKind::group, 0, g, 0, 0.0}; }
  static NormScheme batch_group(std::size_t e, std::size_t g) {
    return {SchemeKind::batch_group, 0, g, e, 0.0};
  }
  NormScheme with_alpha(double a) const {
    NormScheme s = *this;
    s.alpha = a;
    return s;
  }

  /// True when the training statistics mix examples.
  bool uses_batch() const { return kind != SchemeKind::group; }

  /// Throws ConfigError if the scheme cannot partition `shape` in `mode`.
  /// Inference only constrains the channel axis.
  void validate(const Shape& shape, Mode mode = Mode::train) const;

  /// Config spelling without alpha: `batch`, `ghost:4`, `group:2`, `batchgroup:2:4`.
  std::string str() const;

  friend bool operator==(const NormScheme&, const NormScheme&) = default;
};

/// Parses the config spelling, optionally followed by `,alpha=<float>`.
/// Throws ConfigError on malformed text.
NormScheme parse_scheme(std::string_view text);

/// Assignment of every cell of a grid to exactly one statistics group.
class StatPartition {
 public:
  /// Groups are contiguous blocks of `example_block` examples by
  /// `channel_block` channels (all spatial cells). Group id is
  /// example_block_index * (C / channel_block) + channel_block_index.
  static StatPartition blocks(const Shape& shape, std::size_t example_block,
                              std::size_t channel_block);

  /// Arbitrary assignment; ids must be dense in [0, n_groups) with every
  /// group non-empty. Throws DimensionError otherwise.
  StatPartition(const Shape& shape, std::vector<std::uint32_t> group_of_cell);

  const Shape& shape() const { return shape_; }
  std::size_t n_groups() const { return channels_of_group_.size(); }
  std::uint32_t group_of(std::size_t cell) const { return group_of_cell_[cell]; }
  const std::vector<std::uint32_t>& group_of_cell() const { return group_of_cell_; }
  const std::vector<std::size_t>& channels_of(std::size_t g) const {
    return channels_of_group_[g];
  }
  std::size_t count(std::size_t g) const { return count_[g]; }

  /// Throws DimensionError if this partition was built for another shape.
  void require_shape(const Shape& s, const char* context) const;

  /// Same cell-to-group map (and shape).
  bool same_grouping(const StatPartition& other) const {
    return shape_ == other.shape_ && group_of_cell_ == other.group_of_cell_;
  }

 private:
  StatPartition() = default;
  void finish();

  Shape shape_{};
  std::vector<std::uint32_t> group_of_cell_;
  std::vector<std::vector<std::size_t>> channels_of_group_;
  std::vector<std::size_t> count_;
};

/// Statistics grouping used by `scheme` on `shape`. In inference mode the
/// example axis collapses to one example per group for every scheme.
StatPartition partition_of(const NormScheme& scheme, const Shape& shape, Mode mode);

/// True iff both schemes produce the same train-mode grouping of `shape`.
bool reduces_to(const NormScheme& a, const NormScheme& b, const Shape& shape);

/// Per-example grouping over all channels.
inline StatPartition layer_norm_partition(const Shape& s) { return StatPartition::blocks(s, 1, s.c); }
/// Per-example, per-channel grouping.
inline StatPartition instance_norm_partition(const Shape& s) { return StatPartition::blocks(s, 1, 1); }

}  // namespace normlab
