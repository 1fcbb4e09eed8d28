// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <string>

#include "normlab/rng.hpp"
#include "normlab/training.hpp"

namespace normlab {

void SyntheticSpec::validate() const {
  if (n_classes == 0 || n_train_per_class == 0 || n_val_per_class == 0 || n_test_per_class == 0 ||
      channels == 0 || height == 0 || width == 0) {
    throw ConfigError("dataset counts must all be >= 1");
  }
  if (!(separation >= 0.0) || !(noise >= 0.0)) {
    throw ConfigError("dataset separation and noise must be >= 0");
  }
}

Tensor4 Dataset::gather(std::span<const std::size_t> indices) const {
  Shape s = images.shape();
  const std::size_t stride = s.c * s.spatial();
  s.n = indices.size();
  std::vector<double> v;
  v.reserve(s.size());
  const auto src = images.values();
  for (std::size_t i : indices) {
    if (i >= size()) throw DimensionError("dataset index out of range");
    const auto first = src.begin() + static_cast<std::ptrdiff_t>(i * stride);
    v.insert(v.end(), first, first + static_cast<std::ptrdiff_t>(stride));
  }
  return Tensor4(s, std::move(v));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

SyntheticData make_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t cells = spec.channels * spec.height * spec.width;
  const std::size_t hw = spec.height * spec.width;

  // Class templates: per-channel offset plus per-cell texture.
  Rng template_rng(spec.seed, 1);
  std::vector<double> templates(spec.n_classes * cells);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      const double offset = template_rng.normal();
      for (std::size_t p = 0; p < hw; ++p) {
        templates[k * cells + c * hw + p] = spec.separation * (offset + template_rng.normal());
      }
    }
  }

  auto make_split = [&](std::size_t per_class, std::uint64_t stream) {
    Rng rng(spec.seed, stream);
    Dataset d;
    d.n_classes = spec.n_classes;
    std::vector<double> v;
    v.reserve(spec.n_classes * per_class * cells);
    for (std::size_t k = 0; k < spec.n_classes; ++k) {
      for (std::size_t j = 0; j < per_class; ++j) {
        for (std::size_t i = 0; i < cells; ++i) {
          v.push_back(templates[k * cells + i] + spec.noise * rng.normal());
        }
        d.labels.push_back(static_cast<int>(k));
      }
    }
    d.images = Tensor4(Shape{spec.n_classes * per_class, spec.channels, spec.height, spec.width},
                       std::move(v));
    return d;
  };
  return SyntheticData{make_split(spec.n_train_per_class, 2), make_split(spec.n_val_per_class, 3),
                       make_split(spec.n_test_per_class, 4)};
}

std::vector<Batch> iid_batches(std::size_t dataset_size, std::size_t batch_size,
                               std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0 || batch_size > dataset_size) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                      std::to_string(dataset_size) + "]");
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 1000 + epoch);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Batch> batches(dataset_size / batch_size);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(b * batch_size);
    batches[b].assign(first, first + static_cast<std::ptrdiff_t>(batch_size));
  }
  return batches;
}

std::vector<Batch> non_iid_batches(std::span<const int> labels, std::size_t n_classes,
                                   std::size_t batch_size, std::size_t classes_per_batch,
                                   std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0 || batch_size > labels.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                      std::to_string(labels.size()) + "]");
  }
  if (classes_per_batch == 0 || batch_size % classes_per_batch != 0) {
    throw ConfigError("classes_per_batch=" + std::to_string(classes_per_batch) +
                      " must divide B=" + std::to_string(batch_size));
  }
  if (classes_per_batch > n_classes) {
    throw SamplingError("classes_per_batch exceeds the number of classes");
  }
  const std::size_t per_class = batch_size / classes_per_batch;
  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    if (k >= n_classes) throw SamplingError("label out of range");
    pools[k].push_back(i);
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (pools[k].size() < per_class) {
      throw SamplingError("class " + std::to_string(k) + " has " + std::to_string(pools[k].size()) +
                          " examples, batches need " + std::to_string(per_class));
    }
  }

  Rng rng(seed, 2000 + epoch);
  std::vector<std::size_t> classes(n_classes);
  std::iota(classes.begin(), classes.end(), std::size_t{0});
  std::vector<Batch> batches(labels.size() / batch_size);
  for (Batch& batch : batches) {
    // Partial Fisher-Yates: the first classes_per_batch entries are a uniform draw.
    for (std::size_t j = 0; j < classes_per_batch; ++j) {
      std::swap(classes[j], classes[j + rng.below(n_classes - j)]);
    }
    batch.reserve(batch_size);
    for (std::size_t j = 0; j < classes_per_batch; ++j) {
      auto& pool = pools[classes[j]];
      for (std::size_t t = 0; t < per_class; ++t) {
        std::swap(pool[t], pool[t + rng.below(pool.size() - t)]);
        batch.push_back(pool[t]);
      }
    }
    rng.shuffle(std::span<std::size_t>(batch));
  }
  return batches;
}

}  // namespace normlab
