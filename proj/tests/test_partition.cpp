// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "normlab/errors.hpp"
#include "normlab/partition.hpp"
#include "support.hpp"

namespace normlab {
namespace {

using testing::canonical;
using testing::oracle_groups;

std::vector<NormScheme> schemes_for(const Shape& s) {
  std::vector<NormScheme> out{NormScheme::batch()};
  for (std::size_t b = 1; b <= s.n; ++b) {
    if (s.n % b == 0) out.push_back(NormScheme::ghost(b));
  }
  for (std::size_t g = 1; g <= s.c; ++g) {
    if (s.c % g != 0) continue;
    out.push_back(NormScheme::group(g));
    for (std::size_t e = 1; e <= s.n; ++e) {
      if (s.n % e == 0) out.push_back(NormScheme::batch_group(e, g));
    }
  }
  return out;
}

TEST(PartitionOf, BatchHasOneGroupPerChannel) {
  const StatPartition p = partition_of(NormScheme::batch(), {4, 6, 2, 2}, Mode::train);
  ASSERT_EQ(p.n_groups(), 6u);
  for (std::size_t g = 0; g < 6; ++g) EXPECT_EQ(p.count(g), 16u);
}

TEST(PartitionOf, GhostBlocksAreContiguousExamples) {
  const StatPartition p = partition_of(NormScheme::ghost(2), {4, 1, 1, 1}, Mode::train);
  ASSERT_EQ(p.n_groups(), 2u);
  // Oracle: example i belongs to block floor(i / 2).
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(p.group_of(i) == p.group_of(j), i / 2 == j / 2);
    }
  }
}

TEST(PartitionOf, BatchGroupBlocksAreExamplesByChannels) {
  const Shape shape{4, 6, 1, 1};
  const StatPartition p = partition_of(NormScheme::batch_group(2, 3), shape, Mode::train);
  ASSERT_EQ(p.n_groups(), 6u);
  // Brute force: collect member (n, c) pairs per group.
  std::map<std::uint32_t, std::set<std::pair<std::size_t, std::size_t>>> members;
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t c = 0; c < 6; ++c) members[p.group_of(n * 6 + c)].insert({n, c});
  }
  for (const auto& [g, cells] : members) {
    ASSERT_EQ(cells.size(), 4u);
    std::set<std::size_t> ns;
    std::set<std::size_t> cs;
    for (auto [n, c] : cells) {
      ns.insert(n);
      cs.insert(c);
    }
    EXPECT_EQ(ns.size(), 2u);
    EXPECT_EQ(cs.size(), 2u);
    EXPECT_EQ(*ns.rbegin() - *ns.begin(), 1u);
    EXPECT_EQ(*cs.rbegin() - *cs.begin(), 1u);
  }
}

TEST(PartitionOf, GroupCountsPerScheme) {
  const Shape s{8, 6, 2, 2};
  EXPECT_EQ(partition_of(NormScheme::ghost(2), s, Mode::train).n_groups(), 4u * 6u);
  EXPECT_EQ(partition_of(NormScheme::group(3), s, Mode::train).n_groups(), 8u * 3u);
  EXPECT_EQ(partition_of(NormScheme::batch_group(4, 3), s, Mode::train).n_groups(), 2u * 3u);
  EXPECT_EQ(partition_of(NormScheme::batch(), s, Mode::infer).n_groups(), 8u * 6u);
  EXPECT_EQ(partition_of(NormScheme::batch_group(4, 3), s, Mode::infer).n_groups(), 8u * 3u);
}

TEST(PartitionOf, MatchesOracleForEverySchemeAndMode) {
  for (const Shape shape : {Shape{4, 6, 2, 2}, Shape{6, 4, 1, 3}, Shape{1, 2, 1, 1}}) {
    for (const NormScheme& s : schemes_for(shape)) {
      for (Mode mode : {Mode::train, Mode::infer}) {
        const StatPartition p = partition_of(s, shape, mode);
        EXPECT_EQ(canonical(p.group_of_cell()), oracle_groups(s, shape, mode))
            << s.str() << " " << shape.str();
      }
    }
  }
}

TEST(PartitionOf, GroupsAreDisjointCoveringWithExpectedSize) {
  const Shape shape{8, 6, 2, 3};
  for (const NormScheme& s : schemes_for(shape)) {
    const StatPartition p = partition_of(s, shape, Mode::train);
    std::size_t per_group_examples = 0;
    std::size_t per_group_channels = 0;
    switch (s.kind) {
      case SchemeKind::batch: per_group_examples = shape.n; per_group_channels = 1; break;
      case SchemeKind::ghost: per_group_examples = s.ghost_size; per_group_channels = 1; break;
      case SchemeKind::group:
        per_group_examples = 1;
        per_group_channels = shape.c / s.channel_groups;
        break;
      case SchemeKind::batch_group:
        per_group_examples = s.example_group;
        per_group_channels = shape.c / s.channel_groups;
        break;
    }
    std::size_t total = 0;
    for (std::size_t g = 0; g < p.n_groups(); ++g) {
      EXPECT_EQ(p.count(g), per_group_examples * per_group_channels * shape.spatial()) << s.str();
      total += p.count(g);
    }
    EXPECT_EQ(total, shape.size());
    ASSERT_EQ(p.group_of_cell().size(), shape.size());
  }
}

TEST(PartitionOf, Deterministic) {
  const Shape shape{4, 4, 2, 2};
  for (const NormScheme& s : schemes_for(shape)) {
    EXPECT_TRUE(partition_of(s, shape, Mode::train).same_grouping(partition_of(s, shape, Mode::train)));
  }
}

TEST(PartitionOf, DivisibilityViolationsAreConfigErrors) {
  EXPECT_THROW(partition_of(NormScheme::ghost(3), {4, 2, 1, 1}, Mode::train), ConfigError);
  EXPECT_THROW(partition_of(NormScheme::group(4), {4, 6, 1, 1}, Mode::train), ConfigError);
  EXPECT_THROW(partition_of(NormScheme::batch_group(3, 2), {4, 2, 1, 1}, Mode::train), ConfigError);
  EXPECT_THROW(partition_of(NormScheme::ghost(0), {4, 2, 1, 1}, Mode::train), ConfigError);
  EXPECT_THROW(partition_of(NormScheme::group(0), {4, 2, 1, 1}, Mode::train), ConfigError);
  // Inference is per example, so example-axis sizes need not divide N.
  EXPECT_NO_THROW(partition_of(NormScheme::ghost(3), {4, 2, 1, 1}, Mode::infer));
  EXPECT_THROW(NormScheme::batch().with_alpha(1.5).validate({4, 2, 1, 1}), ConfigError);
}

TEST(ReducesTo, SpecExamples) {
  const Shape shape{4, 6, 2, 2};
  EXPECT_TRUE(reduces_to(NormScheme::ghost(4), NormScheme::batch(), shape));
  EXPECT_TRUE(reduces_to(NormScheme::batch_group(1, 3), NormScheme::group(3), shape));
  EXPECT_TRUE(reduces_to(NormScheme::batch_group(4, 6), NormScheme::batch(), shape));
  EXPECT_FALSE(reduces_to(NormScheme::ghost(2), NormScheme::batch(), shape));
  EXPECT_FALSE(reduces_to(NormScheme::group(2), NormScheme::group(3), shape));
}

TEST(ReducesTo, LayerAndInstanceGroupings) {
  const Shape shape{4, 6, 2, 2};
  EXPECT_TRUE(partition_of(NormScheme::batch_group(1, 1), shape, Mode::train)
                  .same_grouping(layer_norm_partition(shape)));
  EXPECT_TRUE(partition_of(NormScheme::batch_group(1, 6), shape, Mode::train)
                  .same_grouping(instance_norm_partition(shape)));
  EXPECT_FALSE(layer_norm_partition(shape).same_grouping(instance_norm_partition(shape)));
}

TEST(StatPartition, ExplicitMapValidation) {
  EXPECT_THROW(StatPartition({1, 1, 1, 3}, {0, 2, 2}), DimensionError);  // id 1 unused
  EXPECT_THROW(StatPartition({1, 1, 1, 3}, {0, 0}), DimensionError);
  EXPECT_THROW(StatPartition::blocks({4, 6, 1, 1}, 3, 1), DimensionError);
  const StatPartition p({2, 2, 1, 1}, {1, 0, 0, 1});
  EXPECT_EQ(p.n_groups(), 2u);
  EXPECT_EQ(p.count(0), 2u);
}

TEST(ParseScheme, RoundTripsAndAlphaSuffix) {
  for (const char* text : {"batch", "ghost:4", "group:2", "batchgroup:2:4"}) {
    EXPECT_EQ(parse_scheme(text).str(), text);
  }
  const NormScheme s = parse_scheme("ghost:4,alpha=0.25");
  EXPECT_EQ(s.kind, SchemeKind::ghost);
  EXPECT_EQ(s.ghost_size, 4u);
  EXPECT_EQ(s.alpha, 0.25);
  EXPECT_THROW(parse_scheme("ghost"), ConfigError);
  EXPECT_THROW(parse_scheme("ghost:x"), ConfigError);
  EXPECT_THROW(parse_scheme("layer"), ConfigError);
  EXPECT_THROW(parse_scheme("batch,beta=1"), ConfigError);
}

}  // namespace
}  // namespace normlab
