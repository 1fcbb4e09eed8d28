// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "normlab/training.hpp"

namespace normlab {

void TrainConfig::validate(const ModelSpec& model, std::size_t train_size,
                           std::size_t n_classes) const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (batch_size > train_size) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds training set size " +
                      std::to_string(train_size));
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (alpha_grid.empty()) throw ConfigError("alpha grid must be non-empty");
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= kMaxSweepAlpha)) {
      throw ConfigError("alpha grid values must lie in [0," + std::to_string(kMaxSweepAlpha) + "]");
    }
  }
  wd.validate();
  for (std::size_t width : model.widths) {
    scheme.validate(Shape{batch_size, width, 1, 1}, Mode::train);
  }
  if (sampler == SamplerKind::non_iid) {
    if (classes_per_batch == 0 || batch_size % classes_per_batch != 0) {
      throw ConfigError("classes_per_batch=" + std::to_string(classes_per_batch) +
                        " must divide B=" + std::to_string(batch_size));
    }
    if (classes_per_batch > n_classes) {
      throw ConfigError("classes_per_batch exceeds the number of classes");
    }
  }
}

EvalResult evaluate(const Network& model, const Dataset& data, double alpha, double max_alpha,
                    RangeTracker* tracker) {
  constexpr std::size_t kChunk = 64;
  const std::size_t classes = model.spec().n_classes;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < data.size(); first += kChunk) {
    const std::size_t count = std::min(kChunk, data.size() - first);
    const std::vector<double> logits =
        model.infer_logits(data.images.slice_examples(first, count), alpha, max_alpha, tracker);
    for (std::size_t e = 0; e < count; ++e) {
      const std::span<const double> row(logits.data() + e * classes, classes);
      const int label = data.labels[first + e];
      loss += softmax_xent(row, label).loss;
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best == label) ++correct;
    }
  }
  const auto n = static_cast<double>(data.size());
  return EvalResult{static_cast<double>(correct) / n, loss / n};
}

AlphaChoice select_alpha(const Network& model, const Dataset& val, const Dataset& test,
                         std::span<const double> grid, SelectionMetric metric, double max_alpha) {
  if (grid.empty()) throw ConfigError("alpha grid must be non-empty");
  AlphaChoice best;
  bool have = false;
  for (double a : grid) {
    const EvalResult r = evaluate(model, val, a, max_alpha);
    const bool better = !have || (metric == SelectionMetric::accuracy ? r.accuracy > best.val.accuracy
                                                                      : r.xent < best.val.xent);
    if (better) {
      best.alpha = a;
      best.val = r;
      have = true;
    }
  }
  best.test = evaluate(model, test, best.alpha, max_alpha);
  return best;
}

TrainResult train(const ModelSpec& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, RangeTracker* tracker) {
  cfg.validate(model, train_set.size(), train_set.n_classes);
  if (train_set.images.shape().c != model.in_channels) {
    throw ConfigError("dataset has " + std::to_string(train_set.images.shape().c) +
                      " channels, model expects " + std::to_string(model.in_channels));
  }

  TrainResult result;
  result.model = Network::init(model, cfg.scheme, cfg.seed);
  Network& net = result.model;
  if (tracker != nullptr) tracker->resize(model.widths.size());

  std::vector<std::vector<double>> velocity;
  for (auto p : net.parameters()) velocity.emplace_back(p.size(), 0.0);
  const std::vector<std::size_t> weight_ids = net.weight_indices();
  NetworkGrads grads;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int epoch_no = static_cast<int>(epoch + 1);
    const std::vector<Batch> batches =
        cfg.sampler == SamplerKind::iid
            ? iid_batches(train_set.size(), cfg.batch_size, cfg.seed, epoch)
            : non_iid_batches(train_set.labels, train_set.n_classes, cfg.batch_size,
                              cfg.classes_per_batch, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (const Batch& batch : batches) {
      LossResult r;
      try {
        r = net.train_step_grads(train_set.gather(batch), train_set.gather_labels(batch), grads,
                                 true, tracker);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(), epoch_no);
      }
      if (!std::isfinite(r.loss)) throw TrainingError("training loss is non-finite", epoch_no);
      loss_sum += r.loss * static_cast<double>(batch.size());
      correct += r.correct;
      seen += batch.size();

      auto params = net.parameters();
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t k = 0; k < params[t].size(); ++k) {
          velocity[t][k] = cfg.momentum * velocity[t][k] + grads.tensors[t][k];
          params[t][k] -= cfg.learning_rate * velocity[t][k];
        }
      }
      for (std::size_t t : weight_ids) decay_weights_in_place(params[t], cfg.wd);
      for (Block& b : net.blocks()) b.norm = decay_step(b.norm, cfg.wd);
    }
    const auto n = static_cast<double>(seen);
    result.history.push_back(HistoryRow{epoch + 1, "train", std::nullopt,
                                        static_cast<double>(correct) / n, loss_sum / n});

    const bool last = epoch + 1 == cfg.epochs;
    const bool due = cfg.eval_every != 0 && (epoch + 1) % cfg.eval_every == 0;
    if (last || due) {
      for (double a : cfg.alpha_grid) {
        const double max_alpha = std::max(1.0, a);
        EvalResult r;
        try {
          r = evaluate(net, val_set, a, max_alpha);
        } catch (const NumericError& e) {
          throw TrainingError(std::string("evaluation failed: ") + e.what(), epoch_no);
        }
        result.history.push_back(HistoryRow{epoch + 1, "val", a, r.accuracy, r.xent});
      }
    }
  }
  return result;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
  os << "epoch,split,alpha,accuracy,xent\n";
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, end - buf);
  };
  for (const HistoryRow& r : rows) {
    os << r.epoch << ',' << r.split << ',';
    if (r.alpha) put(*r.alpha);
    os << ',';
    put(r.accuracy);
    os << ',';
    put(r.xent);
    os << '\n';
  }
}

}  // namespace normlab
