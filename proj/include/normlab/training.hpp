// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normlab/bounds.hpp"
#include "normlab/layers.hpp"
#include "normlab/moments.hpp"
#include "normlab/partition.hpp"
#include "normlab/regularize.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

// ---------------------------------------------------------------------------
// Data

/// Class-conditional Gaussian images. Each class owns a template made of a
/// per-channel offset plus a spatial texture, both scaled by `separation`;
/// samples add i.i.d. N(0, noise^2) to their class template.
struct SyntheticSpec {
  std::size_t n_classes = 8;
  std::size_t n_train_per_class = 32;
  std::size_t n_val_per_class = 16;
  std::size_t n_test_per_class = 32;
  std::size_t channels = 4;
  std::size_t height = 8;
  std::size_t width = 8;
  double separation = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  Tensor4 images;
  std::vector<int> labels;
  std::size_t n_classes = 0;

  std::size_t size() const { return labels.size(); }
  Tensor4 gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticData {
  Dataset train;
  Dataset val;
  Dataset test;
};

SyntheticData make_dataset(const SyntheticSpec& spec);

using Batch = std::vector<std::size_t>;

/// One epoch of uniformly shuffled disjoint batches of exactly `batch_size`
/// examples; a trailing remainder is dropped.
std::vector<Batch> iid_batches(std::size_t dataset_size, std::size_t batch_size,
                               std::uint64_t seed, std::size_t epoch = 0);

/// One epoch (floor(N / B) batches) in which every batch holds exactly
/// `classes_per_batch` distinct labels with B / classes_per_batch examples
/// each. Classes are drawn with replacement across batches; examples within a
/// batch are shuffled. Throws ConfigError if classes_per_batch does not divide
/// B and SamplingError if a class is too small or too few classes exist.
std::vector<Batch> non_iid_batches(std::span<const int> labels, std::size_t n_classes,
                                   std::size_t batch_size, std::size_t classes_per_batch,
                                   std::uint64_t seed, std::size_t epoch = 0);

// ---------------------------------------------------------------------------
// Model

/// Blocks of pointwise channel mixing -> normalization -> ReLU, then global
/// average pooling and a linear classifier.
struct ModelSpec {
  std::size_t in_channels = 4;
  std::vector<std::size_t> widths{16, 16};
  std::size_t n_classes = 8;
  double epsilon = kDefaultEpsilon;
  double rho = kDefaultRho;

  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Block {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out
  NormParams norm;
  MovingMoments moving;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Parameter gradients, laid out like Network::parameters().
struct NetworkGrads {
  std::vector<std::vector<double>> tensors;
};

struct LossResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

class Network {
 public:
  Network() = default;
  /// He-normal mixing weights, zero biases, identity normalization.
  static Network init(const ModelSpec& spec, const NormScheme& scheme, std::uint64_t seed);
  /// Assembles a network from stored tensors; throws DimensionError if
  /// their sizes disagree with `spec`.
  static Network from_parts(const ModelSpec& spec, const NormScheme& scheme,
                            std::vector<Block> blocks, std::vector<double> cls_weight,
                            std::vector<double> cls_bias);

  const ModelSpec& spec() const { return spec_; }
  const NormScheme& scheme() const { return scheme_; }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<double>& classifier_weight() { return cls_weight_; }
  std::vector<double>& classifier_bias() { return cls_bias_; }
  const std::vector<double>& classifier_weight() const { return cls_weight_; }
  const std::vector<double>& classifier_bias() const { return cls_bias_; }

  /// Learnable tensors in a fixed order: per block weight, bias, gamma, beta;
  /// then classifier weight, classifier bias.
  std::vector<std::span<double>> parameters();
  /// Indices into parameters() that are mixing or classifier weights.
  std::vector<std::size_t> weight_indices() const;

  /// Training-mode forward and backward of the mean cross-entropy. Updates
  /// moving moments when `update_moving` is set. Norm outputs go to `tracker`.
  LossResult train_step_grads(const Tensor4& x, std::span<const int> labels, NetworkGrads& grads,
                              bool update_moving = true, RangeTracker* tracker = nullptr);

  /// Training-mode loss only (no state change).
  double train_loss(const Tensor4& x, std::span<const int> labels) const;

  /// Training-mode normalization outputs (the ReLU inputs), one per block.
  std::vector<Tensor4> train_norm_outputs(const Tensor4& x) const;

  /// Inference logits (n x classes, row-major).
  std::vector<double> infer_logits(const Tensor4& x, double alpha, double max_alpha = 1.0,
                                   RangeTracker* tracker = nullptr) const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  ModelSpec spec_;
  NormScheme scheme_;
  std::vector<Block> blocks_;
  std::vector<double> cls_weight_;  // classes x width
  std::vector<double> cls_bias_;
};

struct SoftmaxXent {
  double loss = 0.0;
  std::vector<double> d_logits;
};

/// -log softmax(logits)[label] and its gradient softmax - onehot.
SoftmaxXent softmax_xent(std::span<const double> logits, int label);

// ---------------------------------------------------------------------------
// Training

enum class SamplerKind { iid, non_iid };

/// Upper limit for extrapolating alpha sweeps (alpha > 1 overweights the
/// current example relative to the moving moments).
inline constexpr double kMaxSweepAlpha = 2.0;

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 20;
  WeightDecayConfig wd;
  NormScheme scheme;
  std::vector<double> alpha_grid{0.0};
  SamplerKind sampler = SamplerKind::iid;
  std::size_t classes_per_batch = 4;
  /// Validation metrics every `eval_every` epochs (0: final epoch only).
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;

  /// Checks the config and scheme against the model and dataset size.
  void validate(const ModelSpec& model, std::size_t train_size, std::size_t n_classes) const;
};

struct HistoryRow {
  std::size_t epoch = 0;
  std::string split;
  std::optional<double> alpha;  // empty for training-mode rows
  double accuracy = 0.0;
  double xent = 0.0;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct TrainResult {
  Network model;
  std::vector<HistoryRow> history;
};

/// SGD with momentum, then decoupled weight decay, every step. Throws
/// TrainingError if the loss becomes non-finite.
TrainResult train(const ModelSpec& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, RangeTracker* tracker = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  double xent = 0.0;
};

EvalResult evaluate(const Network& model, const Dataset& data, double alpha,
                    double max_alpha = 1.0, RangeTracker* tracker = nullptr);

enum class SelectionMetric { accuracy, xent };

struct AlphaChoice {
  double alpha = 0.0;
  EvalResult val;
  EvalResult test;
};

/// Picks alpha on `val` (first best in grid order) and reports it on `test`.
AlphaChoice select_alpha(const Network& model, const Dataset& val, const Dataset& test,
                         std::span<const double> grid, SelectionMetric metric,
                         double max_alpha = 1.0);

/// Header `epoch,split,alpha,accuracy,xent`.
void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows);

/// Writes manifest.json, weights.csv, and per-layer norm and moving-moment
/// CSVs into `dir` (created if missing).
void save_checkpoint(const std::filesystem::path& dir, const Network& model);
/// Throws InputError if the directory or any file is missing or malformed.
Network load_checkpoint(const std::filesystem::path& dir);

}  // namespace normlab
