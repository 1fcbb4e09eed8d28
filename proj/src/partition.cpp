// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/partition.hpp"

#include <algorithm>
#include <charconv>
#include <string>

namespace normlab {

namespace {

std::string kind_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::batch: return "batch";
    case SchemeKind::ghost: return "ghost";
    case SchemeKind::group: return "group";
    case SchemeKind::batch_group: return "batchgroup";
  }
  return "?";
}

std::size_t parse_count(std::string_view s, std::string_view text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("scheme '" + std::string(text) + "': bad count '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

}  // namespace

void NormScheme::validate(const Shape& shape, Mode mode) const {
  const std::string name = str();
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError(name + ": alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  if (kind == SchemeKind::group || kind == SchemeKind::batch_group) {
    if (channel_groups == 0 || shape.c % channel_groups != 0) {
      throw ConfigError(name + ": channel groups G=" + std::to_string(channel_groups) +
                        " must divide C=" + std::to_string(shape.c));
    }
  }
  if (mode == Mode::infer) return;
  if (kind == SchemeKind::ghost && (ghost_size == 0 || shape.n % ghost_size != 0)) {
    throw ConfigError(name + ": ghost size B'=" + std::to_string(ghost_size) +
                      " must divide B=" + std::to_string(shape.n));
  }
  if (kind == SchemeKind::batch_group && (example_group == 0 || shape.n % example_group != 0)) {
    throw ConfigError(name + ": example group E=" + std::to_string(example_group) +
                      " must divide B=" + std::to_string(shape.n));
  }
}

std::string NormScheme::str() const {
  switch (kind) {
    case SchemeKind::batch: return "batch";
    case SchemeKind::ghost: return "ghost:" + std::to_string(ghost_size);
    case SchemeKind::group: return "group:" + std::to_string(channel_groups);
    case SchemeKind::batch_group:
      return "batchgroup:" + std::to_string(example_group) + ":" + std::to_string(channel_groups);
  }
  return kind_name(kind);
}

NormScheme parse_scheme(std::string_view text) {
  const auto options = split(text, ',');
  const auto fields = split(options[0], ':');
  const std::string_view name = fields[0];
  NormScheme s;
  auto expect = [&](std::size_t n) {
    if (fields.size() != n) throw ConfigError("scheme '" + std::string(text) + "': wrong arity");
  };
  if (name == "batch") {
    expect(1);
  } else if (name == "ghost") {
    expect(2);
    s = NormScheme::ghost(parse_count(fields[1], text));
  } else if (name == "group") {
    expect(2);
    s = NormScheme::group(parse_count(fields[1], text));
  } else if (name == "batchgroup") {
    expect(3);
    s = NormScheme::batch_group(parse_count(fields[1], text), parse_count(fields[2], text));
  } else {
    throw ConfigError("unknown scheme '" + std::string(text) + "'");
  }
  if ((s.kind == SchemeKind::ghost && s.ghost_size == 0) ||
      (s.kind == SchemeKind::group && s.channel_groups == 0) ||
      (s.kind == SchemeKind::batch_group && (s.example_group == 0 || s.channel_groups == 0))) {
    throw ConfigError("scheme '" + std::string(text) + "': counts must be >= 1");
  }
  for (std::size_t i = 1; i < options.size(); ++i) {
    const std::string_view opt = options[i];
    constexpr std::string_view key = "alpha=";
    if (opt.substr(0, key.size()) != key) {
      throw ConfigError("scheme '" + std::string(text) + "': unknown option '" + std::string(opt) + "'");
    }
    const std::string value(opt.substr(key.size()));
    std::size_t used = 0;
    try {
      s.alpha = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) {
      throw ConfigError("scheme '" + std::string(text) + "': bad alpha '" + value + "'");
    }
    if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) {
      throw ConfigError("scheme '" + std::string(text) + "': alpha must lie in [0,1]");
    }
  }
  return s;
}

StatPartition StatPartition::blocks(const Shape& shape, std::size_t example_block,
                                    std::size_t channel_block) {
  if (shape.size() == 0) throw DimensionError("partition of empty shape " + shape.str());
  if (example_block == 0 || shape.n % example_block != 0 || channel_block == 0 ||
      shape.c % channel_block != 0) {
    throw DimensionError("block partition " + std::to_string(example_block) + "x" +
                         std::to_string(channel_block) + " does not tile " + shape.str());
  }
  StatPartition p;
  p.shape_ = shape;
  p.group_of_cell_.resize(shape.size());
  const std::size_t channel_blocks = shape.c / channel_block;
  const std::size_t hw = shape.spatial();
  std::size_t i = 0;
  for (std::size_t n = 0; n < shape.n; ++n) {
    const std::size_t row = (n / example_block) * channel_blocks;
    for (std::size_t c = 0; c < shape.c; ++c) {
      const auto g = static_cast<std::uint32_t>(row + c / channel_block);
      std::fill_n(p.group_of_cell_.begin() + static_cast<std::ptrdiff_t>(i), hw, g);
      i += hw;
    }
  }
  p.finish();
  return p;
}

StatPartition::StatPartition(const Shape& shape, std::vector<std::uint32_t> group_of_cell)
    : shape_(shape), group_of_cell_(std::move(group_of_cell)) {
  if (shape_.size() == 0 || group_of_cell_.size() != shape_.size()) {
    throw DimensionError("partition map length does not match " + shape_.str());
  }
  finish();
}

void StatPartition::finish() {
  const std::uint32_t max_id = *std::max_element(group_of_cell_.begin(), group_of_cell_.end());
  const std::size_t groups = static_cast<std::size_t>(max_id) + 1;
  count_.assign(groups, 0);
  std::vector<std::vector<bool>> seen(groups, std::vector<bool>(shape_.c, false));
  const std::size_t hw = shape_.spatial();
  for (std::size_t i = 0; i < group_of_cell_.size(); ++i) {
    const auto g = group_of_cell_[i];
    ++count_[g];
    seen[g][(i / hw) % shape_.c] = true;
  }
  channels_of_group_.assign(groups, {});
  for (std::size_t g = 0; g < groups; ++g) {
    if (count_[g] == 0) throw DimensionError("partition group " + std::to_string(g) + " is empty");
    for (std::size_t c = 0; c < shape_.c; ++c) {
      if (seen[g][c]) channels_of_group_[g].push_back(c);
    }
  }
}

void StatPartition::require_shape(const Shape& s, const char* context) const {
  if (!(s == shape_)) {
    throw DimensionError(std::string(context) + ": partition built for " + shape_.str() +
                         ", tensor is " + s.str());
  }
}

StatPartition partition_of(const NormScheme& scheme, const Shape& shape, Mode mode) {
  scheme.validate(shape, mode);
  const std::size_t channel_block =
      scheme.kind == SchemeKind::group || scheme.kind == SchemeKind::batch_group
          ? shape.c / scheme.channel_groups
          : 1;
  if (mode == Mode::infer || scheme.kind == SchemeKind::group) {
    return StatPartition::blocks(shape, 1, channel_block);
  }
  switch (scheme.kind) {
    case SchemeKind::batch: return StatPartition::blocks(shape, shape.n, 1);
    case SchemeKind::ghost: return StatPartition::blocks(shape, scheme.ghost_size, 1);
    case SchemeKind::batch_group:
      return StatPartition::blocks(shape, scheme.example_group, channel_block);
    case SchemeKind::group: break;
  }
  return StatPartition::blocks(shape, 1, channel_block);
}

bool reduces_to(const NormScheme& a, const NormScheme& b, const Shape& shape) {
  return partition_of(a, shape, Mode::train).same_grouping(partition_of(b, shape, Mode::train));
}

}  // namespace normlab
