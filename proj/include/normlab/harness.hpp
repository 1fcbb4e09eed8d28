// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normlab/bounds.hpp"
#include "normlab/training.hpp"

namespace normlab {

enum class Command { sweep_alpha, sweep_ghost, compare, non_iid, bounds };

/// `sweep-alpha`, `sweep-ghost`, `compare`, `non-iid`, `bounds`.
Command parse_command(std::string_view name);
std::string command_name(Command c);

struct SweepGrids {
  std::vector<double> alpha{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> ghost_sizes;
  std::vector<std::size_t> batch_sizes;
  std::vector<NormScheme> schemes;
};

struct TightnessSweep {
  std::size_t group_size = 32;
  double epsilon = 1e-5;
  std::vector<double> a{0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6};
};

struct ExperimentSpec {
  Command command = Command::sweep_alpha;
  SyntheticSpec data;
  ModelSpec model;
  TrainConfig train;
  SweepGrids grids;
  SelectionMetric selection = SelectionMetric::accuracy;
  /// sweep-alpha: existing checkpoint directory, or train one first.
  std::optional<std::filesystem::path> checkpoint;
  bool train_first = false;
  /// Training seeds per grid point; rows report the median.
  std::size_t repeats = 1;
  /// non-iid: also train batch and batch-group rows with i.i.d. batches.
  bool iid_control = true;
  TightnessSweep tightness;
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

/// Builds a spec from JSON config text. Unknown keys are rejected. Throws
/// ConfigError on malformed input.
ExperimentSpec parse_experiment(std::string_view json_text, Command command);

/// Fail-fast validation of everything the command will train or read.
void validate(const ExperimentSpec& spec);

/// Applies `seed` to the dataset and to every training run.
void apply_seed(ExperimentSpec& spec, std::uint64_t seed);

struct AlphaRow {
  double alpha = 0.0;
  EvalResult val;
  EvalResult test;
};

struct GhostRow {
  std::size_t ghost_size = 0;
  double best_alpha = 0.0;
  EvalResult best;    // test metrics at the validation-selected alpha
  EvalResult alpha0;  // test metrics at alpha = 0
};

struct CompareRow {
  std::size_t batch_size = 0;
  std::string scheme;
  double best_alpha = 0.0;
  EvalResult test;
};

struct NonIidRow {
  std::string method;  // batch, ghost, batch_group
  std::string scheme;
  std::size_t ghost_size = 0;  // examples per statistics block
  std::string sampler;         // iid or non-iid
  double alpha0_accuracy = 0.0;
  double tuned_alpha = 0.0;
  double tuned_accuracy = 0.0;
};

struct BoundsRow {
  std::size_t ghost_size = 0;
  std::size_t group_cells = 0;
  RangeRow range;
};

struct TightnessRow {
  std::size_t group_size = 0;
  double a = 0.0;
  double epsilon = 0.0;
  double value = 0.0;
  double limit = 0.0;
};

struct BoundsResult {
  std::vector<BoundsRow> ranges;
  std::vector<TightnessRow> tightness;
};

std::vector<AlphaRow> run_sweep_alpha(const ExperimentSpec& spec);
std::vector<GhostRow> run_sweep_ghost(const ExperimentSpec& spec);
std::vector<CompareRow> run_compare(const ExperimentSpec& spec);
std::vector<NonIidRow> run_non_iid(const ExperimentSpec& spec);
BoundsResult run_bounds(const ExperimentSpec& spec);

/// Validates, runs and writes the command's CSV files into `spec.out`.
/// Returns the written paths.
std::vector<std::filesystem::path> run_command(const ExperimentSpec& spec);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; results keep index
/// order. The first exception thrown by any job is rethrown.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, F&& fn);

}  // namespace normlab

#include "normlab/parallel.ipp"
