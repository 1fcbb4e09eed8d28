// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace normlab {

namespace fs = std::filesystem;
using nlohmann::json;

Command parse_command(std::string_view name) {
  if (name == "sweep-alpha") return Command::sweep_alpha;
  if (name == "sweep-ghost") return Command::sweep_ghost;
  if (name == "compare") return Command::compare;
  if (name == "non-iid") return Command::non_iid;
  if (name == "bounds") return Command::bounds;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

std::string command_name(Command c) {
  switch (c) {
    case Command::sweep_alpha: return "sweep-alpha";
    case Command::sweep_ghost: return "sweep-ghost";
    case Command::compare: return "compare";
    case Command::non_iid: return "non-iid";
    case Command::bounds: return "bounds";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void parse_data(const json& j, SyntheticSpec& d) {
  reject_unknown(j, "data",
                 {"n_classes", "n_train_per_class", "n_val_per_class", "n_test_per_class",
                  "channels", "height", "width", "separation", "noise"});
  read(j, "n_classes", d.n_classes);
  read(j, "n_train_per_class", d.n_train_per_class);
  read(j, "n_val_per_class", d.n_val_per_class);
  read(j, "n_test_per_class", d.n_test_per_class);
  read(j, "channels", d.channels);
  read(j, "height", d.height);
  read(j, "width", d.width);
  read(j, "separation", d.separation);
  read(j, "noise", d.noise);
}

void parse_model(const json& j, ModelSpec& m) {
  reject_unknown(j, "model", {"widths", "epsilon", "rho"});
  read(j, "widths", m.widths);
  read(j, "epsilon", m.epsilon);
  read(j, "rho", m.rho);
}

void parse_train(const json& j, TrainConfig& t) {
  reject_unknown(j, "train",
                 {"batch_size", "learning_rate", "momentum", "epochs", "scheme", "alpha",
                  "alpha_grid", "sampler", "classes_per_batch", "eval_every", "wd"});
  read(j, "batch_size", t.batch_size);
  read(j, "learning_rate", t.learning_rate);
  read(j, "momentum", t.momentum);
  read(j, "epochs", t.epochs);
  read(j, "alpha_grid", t.alpha_grid);
  read(j, "classes_per_batch", t.classes_per_batch);
  read(j, "eval_every", t.eval_every);
  if (j.contains("scheme")) t.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("alpha")) t.scheme.alpha = j.at("alpha").get<double>();
  if (j.contains("sampler")) {
    const auto s = j.at("sampler").get<std::string>();
    if (s == "iid") {
      t.sampler = SamplerKind::iid;
    } else if (s == "non-iid") {
      t.sampler = SamplerKind::non_iid;
    } else {
      throw ConfigError("train.sampler must be 'iid' or 'non-iid'");
    }
  }
  if (j.contains("wd")) {
    const json& w = j.at("wd");
    reject_unknown(w, "train.wd", {"delta", "gamma_target", "norm_params", "weights"});
    read(w, "delta", t.wd.delta);
    read(w, "gamma_target", t.wd.gamma_target);
    read(w, "norm_params", t.wd.apply_to_norm_params);
    read(w, "weights", t.wd.apply_to_weights);
  }
}

void parse_sweep(const json& j, SweepGrids& g) {
  reject_unknown(j, "sweep", {"alpha", "ghost_sizes", "batch_sizes", "schemes"});
  read(j, "alpha", g.alpha);
  read(j, "ghost_sizes", g.ghost_sizes);
  read(j, "batch_sizes", g.batch_sizes);
  if (j.contains("schemes")) {
    g.schemes.clear();
    for (const auto& s : j.at("schemes")) g.schemes.push_back(parse_scheme(s.get<std::string>()));
  }
}

}  // namespace

ExperimentSpec parse_experiment(std::string_view json_text, Command command) {
  ExperimentSpec spec;
  spec.command = command;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j, "config",
                   {"seed", "data", "model", "train", "sweep", "selection_metric", "checkpoint",
                    "train_first", "repeats", "iid_control", "tightness"});
    if (j.contains("data")) parse_data(j.at("data"), spec.data);
    if (j.contains("model")) parse_model(j.at("model"), spec.model);
    if (j.contains("train")) parse_train(j.at("train"), spec.train);
    if (j.contains("sweep")) parse_sweep(j.at("sweep"), spec.grids);
    if (j.contains("selection_metric")) {
      const auto m = j.at("selection_metric").get<std::string>();
      if (m == "accuracy") {
        spec.selection = SelectionMetric::accuracy;
      } else if (m == "xent") {
        spec.selection = SelectionMetric::xent;
      } else {
        throw ConfigError("selection_metric must be 'accuracy' or 'xent'");
      }
    }
    if (j.contains("checkpoint")) spec.checkpoint = fs::path(j.at("checkpoint").get<std::string>());
    read(j, "train_first", spec.train_first);
    read(j, "repeats", spec.repeats);
    read(j, "iid_control", spec.iid_control);
    if (j.contains("tightness")) {
      const json& t = j.at("tightness");
      reject_unknown(t, "tightness", {"group_size", "epsilon", "a"});
      read(t, "group_size", spec.tightness.group_size);
      read(t, "epsilon", spec.tightness.epsilon);
      read(t, "a", spec.tightness.a);
    }
    std::uint64_t seed = spec.seed;
    read(j, "seed", seed);
    apply_seed(spec, seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  spec.model.in_channels = spec.data.channels;
  spec.model.n_classes = spec.data.n_classes;
  return spec;
}

void apply_seed(ExperimentSpec& spec, std::uint64_t seed) {
  spec.seed = seed;
  spec.data.seed = seed;
  spec.train.seed = seed;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

double max_alpha_of(std::span<const double> grid) {
  double m = 1.0;
  for (double a : grid) m = std::max(m, a);
  return m;
}

void validate_alpha_grid(std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("sweep.alpha must be non-empty");
  for (double a : grid) {
    if (!(a >= 0.0 && a <= kMaxSweepAlpha)) {
      throw ConfigError("sweep.alpha values must lie in [0," + std::to_string(kMaxSweepAlpha) + "]");
    }
  }
}

std::size_t train_size(const ExperimentSpec& spec) {
  return spec.data.n_classes * spec.data.n_train_per_class;
}

TrainConfig config_for(const ExperimentSpec& spec, const NormScheme& scheme,
                       std::size_t batch_size, SamplerKind sampler) {
  TrainConfig cfg = spec.train;
  cfg.scheme = scheme.with_alpha(spec.train.scheme.alpha);
  cfg.batch_size = batch_size;
  cfg.sampler = sampler;
  return cfg;
}

// Schemes whose example axis cannot tile B are left out of the compare grid;
// B = 1 keeps only per-example schemes.
bool admissible(const NormScheme& s, std::size_t batch_size) {
  switch (s.kind) {
    case SchemeKind::batch: return batch_size >= 2;
    case SchemeKind::ghost: return s.ghost_size >= 2 && batch_size % s.ghost_size == 0;
    case SchemeKind::group: return true;
    case SchemeKind::batch_group: return batch_size % s.example_group == 0;
  }
  return false;
}

struct CompareCell {
  std::size_t batch_size;
  NormScheme scheme;
};

std::vector<CompareCell> compare_grid(const ExperimentSpec& spec) {
  std::vector<CompareCell> cells;
  for (std::size_t b : spec.grids.batch_sizes) {
    for (const NormScheme& s : spec.grids.schemes) {
      if (admissible(s, b)) cells.push_back({b, s});
    }
  }
  return cells;
}

struct NonIidCell {
  std::string method;
  NormScheme scheme;
  std::size_t block;
  SamplerKind sampler;
};

std::string method_of(const NormScheme& s) {
  switch (s.kind) {
    case SchemeKind::batch: return "batch";
    case SchemeKind::ghost: return "ghost";
    case SchemeKind::group: return "group";
    case SchemeKind::batch_group: return "batch_group";
  }
  return "?";
}

std::vector<NonIidCell> non_iid_grid(const ExperimentSpec& spec) {
  const std::size_t b = spec.train.batch_size;
  std::vector<NonIidCell> cells;
  std::vector<NonIidCell> controls;
  auto add = [&](const NormScheme& s, std::size_t block, bool control) {
    cells.push_back({method_of(s), s, block, SamplerKind::non_iid});
    if (control && spec.iid_control) controls.push_back({method_of(s), s, block, SamplerKind::iid});
  };
  add(NormScheme::batch(), b, true);
  for (std::size_t g : spec.grids.ghost_sizes) {
    if (g < b) add(NormScheme::ghost(g), g, false);
  }
  for (const NormScheme& s : spec.grids.schemes) {
    const std::size_t block = s.kind == SchemeKind::batch_group ? s.example_group
                              : s.kind == SchemeKind::ghost     ? s.ghost_size
                              : s.kind == SchemeKind::batch     ? b
                                                                : 1;
    add(s, block, s.kind == SchemeKind::batch_group);
  }
  cells.insert(cells.end(), controls.begin(), controls.end());
  return cells;
}

}  // namespace

void validate(const ExperimentSpec& spec) {
  spec.data.validate();
  ModelSpec model = spec.model;
  model.in_channels = spec.data.channels;
  model.n_classes = spec.data.n_classes;
  model.validate();
  if (spec.repeats == 0) throw ConfigError("repeats must be >= 1");
  if (spec.jobs == 0) throw ConfigError("jobs must be >= 1");
  const std::size_t n_train = train_size(spec);
  const std::size_t n_classes = spec.data.n_classes;
  auto check = [&](const TrainConfig& cfg) { cfg.validate(model, n_train, n_classes); };

  switch (spec.command) {
    case Command::sweep_alpha: {
      validate_alpha_grid(spec.grids.alpha);
      if (spec.train_first) {
        check(spec.train);
        break;
      }
      if (!spec.checkpoint) throw InputError("sweep-alpha needs a checkpoint or train_first");
      const Network net = load_checkpoint(*spec.checkpoint);
      if (net.spec().in_channels != spec.data.channels || net.spec().n_classes != n_classes) {
        throw ConfigError("checkpoint input channels/classes do not match the dataset");
      }
      break;
    }
    case Command::sweep_ghost:
      validate_alpha_grid(spec.grids.alpha);
      if (spec.grids.ghost_sizes.empty()) throw ConfigError("sweep.ghost_sizes must be non-empty");
      for (std::size_t g : spec.grids.ghost_sizes) {
        check(config_for(spec, NormScheme::ghost(g), spec.train.batch_size, spec.train.sampler));
      }
      break;
    case Command::compare: {
      validate_alpha_grid(spec.grids.alpha);
      if (spec.grids.batch_sizes.empty() || spec.grids.schemes.empty()) {
        throw ConfigError("compare needs non-empty sweep.batch_sizes and sweep.schemes");
      }
      const auto cells = compare_grid(spec);
      if (cells.empty()) throw ConfigError("compare grid has no admissible (batch size, scheme) pair");
      for (const auto& cell : cells) {
        check(config_for(spec, cell.scheme, cell.batch_size, spec.train.sampler));
      }
      break;
    }
    case Command::non_iid:
      validate_alpha_grid(spec.grids.alpha);
      for (const auto& cell : non_iid_grid(spec)) {
        check(config_for(spec, cell.scheme, spec.train.batch_size, cell.sampler));
      }
      {
        const std::size_t per_class = spec.train.batch_size / spec.train.classes_per_batch;
        if (spec.data.n_train_per_class < per_class) {
          throw ConfigError("non-iid batches need " + std::to_string(per_class) +
                            " training examples per class");
        }
      }
      break;
    case Command::bounds:
      if (spec.grids.ghost_sizes.empty()) throw ConfigError("sweep.ghost_sizes must be non-empty");
      for (std::size_t g : spec.grids.ghost_sizes) {
        check(config_for(spec, NormScheme::ghost(g), spec.train.batch_size, spec.train.sampler));
      }
      if (spec.tightness.group_size < 2 || !(spec.tightness.epsilon > 0.0) ||
          spec.tightness.a.empty()) {
        throw ConfigError("tightness needs group_size >= 2, epsilon > 0 and a non-empty 'a' grid");
      }
      for (double a : spec.tightness.a) {
        if (!(a >= 0.0)) throw ConfigError("tightness 'a' values must be >= 0");
      }
      break;
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Row>
double median_of(const std::vector<Row>& rows, std::function<double(const Row&)> field) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const Row& r : rows) v.push_back(field(r));
  return median(v);
}

ModelSpec model_of(const ExperimentSpec& spec) {
  ModelSpec m = spec.model;
  m.in_channels = spec.data.channels;
  m.n_classes = spec.data.n_classes;
  return m;
}

Network train_point(const ExperimentSpec& spec, const SyntheticData& data, TrainConfig cfg,
                    std::size_t repeat, RangeTracker* tracker = nullptr) {
  cfg.seed = spec.train.seed + repeat;
  return train(model_of(spec), data.train, data.val, cfg, tracker).model;
}

struct Measured {
  AlphaChoice tuned;
  EvalResult alpha0;
};

Measured measure(const ExperimentSpec& spec, const SyntheticData& data, const Network& net) {
  const double max_alpha = max_alpha_of(spec.grids.alpha);
  return Measured{select_alpha(net, data.val, data.test, spec.grids.alpha, spec.selection, max_alpha),
                  evaluate(net, data.test, 0.0)};
}

}  // namespace

std::vector<AlphaRow> run_sweep_alpha(const ExperimentSpec& spec) {
  Network net;
  const SyntheticData data = make_dataset(spec.data);
  if (spec.train_first) {
    net = train(model_of(spec), data.train, data.val, spec.train).model;
  } else {
    net = load_checkpoint(spec.checkpoint.value());
  }
  const double max_alpha = max_alpha_of(spec.grids.alpha);
  return parallel_map<AlphaRow>(spec.grids.alpha.size(), spec.jobs, [&](std::size_t i) {
    const double a = spec.grids.alpha[i];
    return AlphaRow{a, evaluate(net, data.val, a, max_alpha), evaluate(net, data.test, a, max_alpha)};
  });
}

std::vector<GhostRow> run_sweep_ghost(const ExperimentSpec& spec) {
  const SyntheticData data = make_dataset(spec.data);
  const auto& sizes = spec.grids.ghost_sizes;
  const std::size_t reps = spec.repeats;
  auto runs = parallel_map<Measured>(sizes.size() * reps, spec.jobs, [&](std::size_t k) {
    const TrainConfig cfg = config_for(spec, NormScheme::ghost(sizes[k / reps]),
                                       spec.train.batch_size, spec.train.sampler);
    return measure(spec, data, train_point(spec, data, cfg, k % reps));
  });
  std::vector<GhostRow> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::vector<Measured> pts(runs.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                    runs.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
    GhostRow r;
    r.ghost_size = sizes[i];
    r.best_alpha = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.alpha; });
    r.best.accuracy = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.test.accuracy; });
    r.best.xent = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.test.xent; });
    r.alpha0.accuracy = median_of<Measured>(pts, [](const Measured& m) { return m.alpha0.accuracy; });
    r.alpha0.xent = median_of<Measured>(pts, [](const Measured& m) { return m.alpha0.xent; });
    rows.push_back(r);
  }
  return rows;
}

std::vector<CompareRow> run_compare(const ExperimentSpec& spec) {
  const SyntheticData data = make_dataset(spec.data);
  const auto cells = compare_grid(spec);
  const std::size_t reps = spec.repeats;
  auto runs = parallel_map<Measured>(cells.size() * reps, spec.jobs, [&](std::size_t k) {
    const CompareCell& cell = cells[k / reps];
    const TrainConfig cfg = config_for(spec, cell.scheme, cell.batch_size, spec.train.sampler);
    return measure(spec, data, train_point(spec, data, cfg, k % reps));
  });
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::vector<Measured> pts(runs.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                    runs.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
    CompareRow r;
    r.batch_size = cells[i].batch_size;
    r.scheme = cells[i].scheme.str();
    r.best_alpha = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.alpha; });
    r.test.accuracy = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.test.accuracy; });
    r.test.xent = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.test.xent; });
    rows.push_back(r);
  }
  return rows;
}

std::vector<NonIidRow> run_non_iid(const ExperimentSpec& spec) {
  const SyntheticData data = make_dataset(spec.data);
  const auto cells = non_iid_grid(spec);
  const std::size_t reps = spec.repeats;
  auto runs = parallel_map<Measured>(cells.size() * reps, spec.jobs, [&](std::size_t k) {
    const NonIidCell& cell = cells[k / reps];
    const TrainConfig cfg = config_for(spec, cell.scheme, spec.train.batch_size, cell.sampler);
    return measure(spec, data, train_point(spec, data, cfg, k % reps));
  });
  std::vector<NonIidRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::vector<Measured> pts(runs.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                    runs.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
    NonIidRow r;
    r.method = cells[i].method;
    r.scheme = cells[i].scheme.str();
    r.ghost_size = cells[i].block;
    r.sampler = cells[i].sampler == SamplerKind::iid ? "iid" : "non-iid";
    r.alpha0_accuracy = median_of<Measured>(pts, [](const Measured& m) { return m.alpha0.accuracy; });
    r.tuned_alpha = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.alpha; });
    r.tuned_accuracy = median_of<Measured>(pts, [](const Measured& m) { return m.tuned.test.accuracy; });
    rows.push_back(r);
  }
  return rows;
}

BoundsResult run_bounds(const ExperimentSpec& spec) {
  const SyntheticData data = make_dataset(spec.data);
  const auto& sizes = spec.grids.ghost_sizes;
  const std::size_t hw = spec.data.height * spec.data.width;
  auto per_size = parallel_map<std::vector<BoundsRow>>(sizes.size(), spec.jobs, [&](std::size_t i) {
    const std::size_t g = sizes[i];
    const std::size_t cells = g * hw;
    const TrainConfig cfg = config_for(spec, NormScheme::ghost(g), spec.train.batch_size,
                                       spec.train.sampler);
    RangeTracker tracker;
    const Network net = train_point(spec, data, cfg, 0, &tracker);
    evaluate(net, data.test, 0.0, 1.0, &tracker);

    std::vector<BoundsRow> rows;
    for (std::size_t layer = 0; layer < tracker.layers(); ++layer) {
      const ValueRange& tr = tracker.range(layer, Mode::train);
      const ValueRange& env = tracker.bound_envelope(layer);
      const bool has_bound = cells >= 2;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rows.push_back({g, cells,
                      RangeRow{layer, Mode::train, tr.min, tr.max, has_bound ? env.min : nan,
                               has_bound ? env.max : nan}});
      // Inference is checked against the bound implied by the final parameters.
      const NormParams& p = net.blocks()[layer].norm;
      double lo = nan;
      double hi = nan;
      if (has_bound) {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (std::size_t c = 0; c < p.channels(); ++c) {
          const OutputBound b = output_bound(p.gamma[c], p.beta[c], cells);
          lo = std::min(lo, b.lo);
          hi = std::max(hi, b.hi);
        }
      }
      const ValueRange& ir = tracker.range(layer, Mode::infer);
      rows.push_back({g, cells, RangeRow{layer, Mode::infer, ir.min, ir.max, lo, hi}});
    }
    return rows;
  });

  BoundsResult out;
  for (auto& rows : per_size) out.ranges.insert(out.ranges.end(), rows.begin(), rows.end());
  const auto& t = spec.tightness;
  for (double a : t.a) {
    out.tightness.push_back(TightnessRow{t.group_size, a, t.epsilon,
                                         tightness_value({t.group_size, a, t.epsilon}),
                                         -std::sqrt(static_cast<double>(t.group_size - 1))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& operator<<(double v) {
    sep();
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os_.write(buf, end - buf);
    return *this;
  }
  CsvWriter& operator<<(std::size_t v) {
    sep();
    os_ << v;
    return *this;
  }
  CsvWriter& operator<<(const std::string& v) {
    sep();
    os_ << v;
    return *this;
  }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
  if (!os) throw InputError("cannot write " + path.string());
}

}  // namespace

std::vector<fs::path> run_command(const ExperimentSpec& spec) {
  validate(spec);
  // Everything is computed before the first file is written.
  std::vector<std::pair<fs::path, std::string>> files;
  std::optional<Network> checkpoint_to_save;

  switch (spec.command) {
    case Command::sweep_alpha: {
      ExperimentSpec s = spec;
      if (spec.train_first) {
        const SyntheticData data = make_dataset(spec.data);
        TrainResult tr = train(model_of(spec), data.train, data.val, spec.train);
        std::ostringstream hist;
        write_history_csv(hist, tr.history);
        files.emplace_back("history.csv", hist.str());
        checkpoint_to_save = tr.model;
        save_checkpoint(spec.out / "checkpoint", tr.model);
        s.train_first = false;
        s.checkpoint = spec.out / "checkpoint";
      }
      std::ostringstream os;
      CsvWriter w(os);
      w << std::string("alpha") << std::string("val_accuracy") << std::string("val_xent")
        << std::string("test_accuracy") << std::string("test_xent");
      w.end_row();
      for (const AlphaRow& r : run_sweep_alpha(s)) {
        w << r.alpha << r.val.accuracy << r.val.xent << r.test.accuracy << r.test.xent;
        w.end_row();
      }
      files.emplace_back("alpha_sweep.csv", os.str());
      break;
    }
    case Command::sweep_ghost: {
      std::ostringstream os;
      CsvWriter w(os);
      w << std::string("ghost_size") << std::string("best_alpha") << std::string("best_accuracy")
        << std::string("best_xent") << std::string("alpha0_accuracy") << std::string("alpha0_xent");
      w.end_row();
      for (const GhostRow& r : run_sweep_ghost(spec)) {
        w << r.ghost_size << r.best_alpha << r.best.accuracy << r.best.xent << r.alpha0.accuracy
          << r.alpha0.xent;
        w.end_row();
      }
      files.emplace_back("ghost_sweep.csv", os.str());
      break;
    }
    case Command::compare: {
      std::ostringstream os;
      CsvWriter w(os);
      w << std::string("batch_size") << std::string("scheme") << std::string("best_alpha")
        << std::string("test_accuracy") << std::string("test_xent");
      w.end_row();
      for (const CompareRow& r : run_compare(spec)) {
        w << r.batch_size << r.scheme << r.best_alpha << r.test.accuracy << r.test.xent;
        w.end_row();
      }
      files.emplace_back("compare.csv", os.str());
      break;
    }
    case Command::non_iid: {
      std::ostringstream os;
      CsvWriter w(os);
      w << std::string("method") << std::string("scheme") << std::string("ghost_size")
        << std::string("sampler") << std::string("alpha0_accuracy") << std::string("tuned_alpha")
        << std::string("tuned_accuracy");
      w.end_row();
      for (const NonIidRow& r : run_non_iid(spec)) {
        w << r.method << r.scheme << r.ghost_size << r.sampler << r.alpha0_accuracy << r.tuned_alpha
          << r.tuned_accuracy;
        w.end_row();
      }
      files.emplace_back("non_iid.csv", os.str());
      break;
    }
    case Command::bounds: {
      const BoundsResult res = run_bounds(spec);
      std::ostringstream all;
      CsvWriter w(all);
      w << std::string("ghost_size") << std::string("group_cells") << std::string("layer")
        << std::string("mode") << std::string("min") << std::string("max")
        << std::string("bound_lo") << std::string("bound_hi");
      w.end_row();
      std::map<std::size_t, std::vector<RangeRow>> by_size;
      for (const BoundsRow& r : res.ranges) {
        w << r.ghost_size << r.group_cells << r.range.layer
          << std::string(r.range.mode == Mode::train ? "train" : "infer") << r.range.min
          << r.range.max << r.range.bound_lo << r.range.bound_hi;
        w.end_row();
        by_size[r.ghost_size].push_back(r.range);
      }
      files.emplace_back("ranges.csv", all.str());
      for (const auto& [g, rows] : by_size) {
        std::ostringstream os;
        write_range_csv(os, rows);
        files.emplace_back("ranges_ghost" + std::to_string(g) + ".csv", os.str());
      }
      std::ostringstream tight;
      CsvWriter t(tight);
      t << std::string("group_size") << std::string("a") << std::string("epsilon")
        << std::string("value") << std::string("limit");
      t.end_row();
      for (const TightnessRow& r : res.tightness) {
        t << r.group_size << r.a << r.epsilon << r.value << r.limit;
        t.end_row();
      }
      files.emplace_back("tightness.csv", tight.str());
      break;
    }
  }

  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec) throw InputError("cannot create output directory " + spec.out.string());
  std::vector<fs::path> written;
  for (const auto& [name, content] : files) {
    write_file(spec.out / name, content);
    written.push_back(spec.out / name);
  }
  if (checkpoint_to_save) written.push_back(spec.out / "checkpoint");
  return written;
}

}  // namespace normlab
