// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "normlab/errors.hpp"
#include "normlab/harness.hpp"

namespace normlab {
namespace {

namespace fs = std::filesystem;

const char* kBase = R"({
  "seed": 4,
  "data": {"n_classes": 4, "n_train_per_class": 16, "n_val_per_class": 8, "n_test_per_class": 8,
           "channels": 4, "height": 2, "width": 2},
  "model": {"widths": [4]},
  "train": {"batch_size": 8, "epochs": 2, "scheme": "batch", "classes_per_batch": 2},
  "sweep": {"alpha": [0.0, 0.5, 1.0], "ghost_sizes": [2, 4, 8], "batch_sizes": [1, 2, 4],
            "schemes": ["batch", "ghost:2", "group:2", "batchgroup:2:2", "batchgroup:1:4"]},
  "tightness": {"group_size": 32, "epsilon": 1e-5, "a": [0, 1, 1000000]}
})";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("normlab_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentSpec spec(Command c, const std::string& sub = "out") const {
    ExperimentSpec s = parse_experiment(kBase, c);
    s.out = root_ / sub;
    return s;
  }

  fs::path root_;
};

TEST(ParseCommand, Names) {
  for (const char* n : {"sweep-alpha", "sweep-ghost", "compare", "non-iid", "bounds"}) {
    EXPECT_EQ(command_name(parse_command(n)), n);
  }
  EXPECT_THROW(parse_command("sweep"), ConfigError);
}

TEST(ParseExperiment, ReadsEveryKnownSection) {
  const ExperimentSpec s = parse_experiment(kBase, Command::compare);
  EXPECT_EQ(s.seed, 4u);
  EXPECT_EQ(s.data.seed, 4u);
  EXPECT_EQ(s.train.seed, 4u);
  EXPECT_EQ(s.data.n_classes, 4u);
  EXPECT_EQ(s.model.in_channels, 4u);
  EXPECT_EQ(s.model.n_classes, 4u);
  EXPECT_EQ(s.model.widths, (std::vector<std::size_t>{4}));
  EXPECT_EQ(s.train.batch_size, 8u);
  EXPECT_EQ(s.grids.schemes.size(), 5u);
  EXPECT_EQ(s.grids.schemes[3].str(), "batchgroup:2:2");
  EXPECT_EQ(s.tightness.a.back(), 1e6);
}

TEST(ParseExperiment, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_experiment(R"({"sed": 1})", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"train": {"lr": 1}})", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"train": {"wd": {"decay": 1}}})", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"train": {"sampler": "stratified"}})", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"train": {"batch_size": "big"}})", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment("{", Command::compare), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"selection_metric": "f1"})", Command::compare), ConfigError);
}

TEST(ParseExperiment, SchemeAlphaAndWeightDecay) {
  const ExperimentSpec s = parse_experiment(
      R"({"train": {"scheme": "ghost:4,alpha=0.25", "wd": {"delta": 0.001, "gamma_target": 0,
          "norm_params": true, "weights": false}}})",
      Command::sweep_ghost);
  EXPECT_EQ(s.train.scheme.ghost_size, 4u);
  EXPECT_EQ(s.train.scheme.alpha, 0.25);
  EXPECT_EQ(s.train.wd.delta, 0.001);
  EXPECT_EQ(s.train.wd.gamma_target, 0);
  EXPECT_TRUE(s.train.wd.apply_to_norm_params);
  EXPECT_FALSE(s.train.wd.apply_to_weights);
}

TEST_F(HarnessTest, DivisibilityViolationFailsBeforeAnyOutput) {
  ExperimentSpec s = spec(Command::sweep_ghost);
  s.grids.ghost_sizes = {2, 3};
  EXPECT_THROW(run_command(s), ConfigError);
  EXPECT_FALSE(fs::exists(s.out));
  s = spec(Command::compare);
  s.grids.schemes.push_back(NormScheme::group(3));
  EXPECT_THROW(run_command(s), ConfigError);
  EXPECT_FALSE(fs::exists(s.out));
  s = spec(Command::non_iid);
  s.train.classes_per_batch = 3;
  EXPECT_THROW(run_command(s), ConfigError);
  EXPECT_FALSE(fs::exists(s.out));
}

TEST_F(HarnessTest, EmptyGridsAreConfigErrors) {
  ExperimentSpec s = spec(Command::sweep_ghost);
  s.grids.ghost_sizes.clear();
  EXPECT_THROW(validate(s), ConfigError);
  s = spec(Command::sweep_alpha);
  s.train_first = true;
  s.grids.alpha.clear();
  EXPECT_THROW(validate(s), ConfigError);
  s.grids.alpha = {0.0, 2.5};
  EXPECT_THROW(validate(s), ConfigError);
}

TEST_F(HarnessTest, SweepAlphaWithoutCheckpointIsInputError) {
  ExperimentSpec s = spec(Command::sweep_alpha);
  EXPECT_THROW(run_command(s), InputError);
  s.checkpoint = root_ / "nowhere";
  EXPECT_THROW(run_command(s), InputError);
}

TEST_F(HarnessTest, SweepAlphaOnCheckpointIsRetroactive) {
  const SyntheticData data = make_dataset(spec(Command::sweep_alpha).data);
  const ExperimentSpec base = spec(Command::sweep_alpha);
  TrainConfig cfg = base.train;
  const Network net = train(base.model, data.train, data.val, cfg).model;
  const fs::path ckpt = root_ / "ckpt";
  save_checkpoint(ckpt, net);
  std::map<std::string, std::string> before;
  for (const auto& e : fs::directory_iterator(ckpt)) before[e.path().filename()] = slurp(e.path());

  ExperimentSpec s = base;
  s.checkpoint = ckpt;
  s.grids.alpha = {0.0, 0.25, 0.5, 1.0, 1.5};
  run_command(s);
  const auto rows = lines_of(s.out / "alpha_sweep.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "alpha,val_accuracy,val_xent,test_accuracy,test_xent");
  EXPECT_EQ(split(rows[5])[0], "1.5");

  // The alpha = 0 row is plain moving-average inference of the stored model.
  const EvalResult plain = evaluate(net, data.test, 0.0);
  EXPECT_EQ(std::stod(split(rows[1])[3]), plain.accuracy);
  EXPECT_EQ(std::stod(split(rows[1])[4]), plain.xent);

  for (const auto& e : fs::directory_iterator(ckpt)) {
    EXPECT_EQ(slurp(e.path()), before[e.path().filename()]) << e.path();
  }
}

TEST_F(HarnessTest, SweepAlphaTrainFirstWritesHistoryAndCheckpoint) {
  ExperimentSpec s = spec(Command::sweep_alpha);
  s.train_first = true;
  run_command(s);
  EXPECT_EQ(lines_of(s.out / "alpha_sweep.csv").size(), 4u);
  EXPECT_EQ(lines_of(s.out / "history.csv")[0], "epoch,split,alpha,accuracy,xent");
  EXPECT_NO_THROW(load_checkpoint(s.out / "checkpoint"));
}

TEST_F(HarnessTest, SweepGhostFullSizeRowEqualsBatchRun) {
  ExperimentSpec s = spec(Command::sweep_ghost);
  const auto rows = run_sweep_ghost(s);
  ASSERT_EQ(rows.size(), 3u);
  ExperimentSpec b = s;
  b.train.scheme = NormScheme::batch();
  const SyntheticData data = make_dataset(b.data);
  const Network net = train(b.model, data.train, data.val, b.train).model;
  EXPECT_EQ(rows[2].ghost_size, 8u);
  EXPECT_EQ(rows[2].alpha0.accuracy, evaluate(net, data.test, 0.0).accuracy);
  EXPECT_EQ(rows[2].alpha0.xent, evaluate(net, data.test, 0.0).xent);
}

TEST_F(HarnessTest, CompareSkipsSchemesThatCannotTileTheBatch) {
  ExperimentSpec s = spec(Command::compare);
  run_command(s);
  const auto rows = lines_of(s.out / "compare.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "batch_size,scheme,best_alpha,test_accuracy,test_xent");
  std::map<std::string, std::vector<std::string>> by_b;
  for (std::size_t i = 1; i < rows.size(); ++i) by_b[split(rows[i])[0]].push_back(split(rows[i])[1]);
  EXPECT_EQ(by_b["1"], (std::vector<std::string>{"group:2", "batchgroup:1:4"}));
  EXPECT_EQ(by_b["2"], (std::vector<std::string>{"batch", "ghost:2", "group:2", "batchgroup:2:2",
                                                 "batchgroup:1:4"}));
  EXPECT_EQ(by_b["4"].size(), 5u);
  EXPECT_EQ(rows.size(), 1u + 2u + 5u + 5u);
}

TEST_F(HarnessTest, NonIidRowStructure) {
  ExperimentSpec s = spec(Command::non_iid);
  s.grids.schemes = {NormScheme::batch_group(2, 2)};
  const auto rows = run_non_iid(s);
  std::vector<std::string> got;
  for (const auto& r : rows) got.push_back(r.method + "/" + r.scheme + "/" + r.sampler);
  EXPECT_EQ(got, (std::vector<std::string>{"batch/batch/non-iid", "ghost/ghost:2/non-iid",
                                           "ghost/ghost:4/non-iid", "batch_group/batchgroup:2:2/non-iid",
                                           "batch/batch/iid", "batch_group/batchgroup:2:2/iid"}));
  EXPECT_EQ(rows[0].ghost_size, 8u);
  EXPECT_EQ(rows[1].ghost_size, 2u);
  for (const auto& r : rows) {
    EXPECT_GE(r.tuned_accuracy, 0.0);
    EXPECT_LE(r.tuned_accuracy, 1.0);
  }
}

TEST_F(HarnessTest, BoundsRowsRespectTheBound) {
  ExperimentSpec s = spec(Command::bounds);
  run_command(s);
  const auto ranges = lines_of(s.out / "ranges.csv");
  EXPECT_EQ(ranges[0], "ghost_size,group_cells,layer,mode,min,max,bound_lo,bound_hi");
  EXPECT_EQ(ranges.size(), 1u + 3u * 2u);
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    const auto f = split(ranges[i]);
    EXPECT_EQ(std::stoul(f[1]), std::stoul(f[0]) * 4u);
    if (f[3] == "train") {
      EXPECT_GE(std::stod(f[4]), std::stod(f[6]));
      EXPECT_LE(std::stod(f[5]), std::stod(f[7]));
    }
  }
  EXPECT_EQ(lines_of(s.out / "ranges_ghost2.csv")[0], "layer,mode,min,max,bound_lo,bound_hi");
  const auto tight = lines_of(s.out / "tightness.csv");
  ASSERT_EQ(tight.size(), 4u);
  const auto last = split(tight.back());
  EXPECT_NEAR(std::stod(last[3]), std::stod(last[4]), 1e-3);
  EXPECT_NEAR(std::stod(last[3]), -5.5678, 1e-3);
}

TEST_F(HarnessTest, OutputsAreByteIdenticalAcrossRunsAndJobCounts) {
  for (Command c : {Command::sweep_ghost, Command::compare, Command::non_iid, Command::bounds}) {
    ExperimentSpec a = spec(c, "a");
    ExperimentSpec b = spec(c, "b");
    b.jobs = 3;
    const auto pa = run_command(a);
    const auto pb = run_command(b);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i].filename(), pb[i].filename());
      EXPECT_EQ(slurp(pa[i]), slurp(pb[i])) << command_name(c) << " " << pa[i];
    }
    fs::remove_all(a.out);
    fs::remove_all(b.out);
  }
}

TEST_F(HarnessTest, RepeatsReportTheMedian) {
  ExperimentSpec s = spec(Command::sweep_ghost);
  s.grids.ghost_sizes = {4};
  s.repeats = 3;
  const auto rows = run_sweep_ghost(s);
  std::vector<double> acc;
  for (std::size_t r = 0; r < 3; ++r) {
    ExperimentSpec one = s;
    one.repeats = 1;
    one.train.seed = s.train.seed + r;
    acc.push_back(run_sweep_ghost(one)[0].alpha0.accuracy);
  }
  std::sort(acc.begin(), acc.end());
  EXPECT_EQ(rows[0].alpha0.accuracy, acc[1]);
}

TEST(ParallelMap, PreservesIndexOrderAndPropagatesErrors) {
  const auto v = parallel_map<std::size_t>(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_map<int>(10, 3,
                                 [](std::size_t i) -> int {
                                   if (i == 7) throw ConfigError("boom");
                                   return 0;
                                 }),
               ConfigError);
  EXPECT_TRUE(parallel_map<int>(0, 2, [](std::size_t) { return 1; }).empty());
}

TEST(ShippedConfigs, ParseAndValidate) {
  std::size_t seen = 0;
  for (const auto& e : fs::directory_iterator(NORMLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const std::string name = e.path().stem().string();
    const std::string cmd = name.substr(0, name.find('.'));
    ExperimentSpec s = parse_experiment(slurp(e.path()), parse_command(cmd));
    if (s.command != Command::sweep_alpha || s.train_first) EXPECT_NO_THROW(validate(s)) << name;
    ++seen;
  }
  EXPECT_GE(seen, 5u);
}

// CLI exit codes and seed precedence.
class CliTest : public HarnessTest {
 protected:
  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " " + NORMLAB_CLI_PATH + " " + args + " > " +
                            (root_ / "stdout.txt").string() + " 2> " + (root_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }
  fs::path write_config(const std::string& name, const std::string& text) const {
    const fs::path p = root_ / name;
    std::ofstream(p) << text;
    return p;
  }
};

TEST_F(CliTest, ExitCodes) {
  const fs::path good = write_config("good.json", kBase);
  EXPECT_EQ(run("compare --config " + good.string() + " --out " + (root_ / "o").string()), 0);
  EXPECT_TRUE(fs::exists(root_ / "o" / "compare.csv"));

  const fs::path unknown = write_config("unknown.json", R"({"bogus": 1})");
  EXPECT_EQ(run("compare --config " + unknown.string() + " --out " + (root_ / "u").string()), 2);
  EXPECT_EQ(run("compare --config " + (root_ / "missing.json").string() + " --out x"), 2);
  EXPECT_EQ(run("frobnicate --config " + good.string() + " --out x"), 2);
  EXPECT_EQ(run("compare --out x"), 2);
  EXPECT_EQ(run("sweep-alpha --config " + good.string() + " --out " + (root_ / "s").string()), 2);
  EXPECT_EQ(run("compare --config " + good.string() + " --out x --seed abc"), 2);

  const fs::path diverge = write_config(
      "diverge.json", R"({"data": {"n_classes": 2, "n_train_per_class": 8, "height": 1, "width": 1},
                          "model": {"widths": [4]},
                          "train": {"batch_size": 4, "epochs": 3, "learning_rate": 1e200},
                          "sweep": {"ghost_sizes": [2]}})");
  EXPECT_EQ(run("sweep-ghost --config " + diverge.string() + " --out " + (root_ / "d").string()), 3);
  EXPECT_NE(slurp(root_ / "stderr.txt").find("epoch"), std::string::npos);
  EXPECT_FALSE(fs::exists(root_ / "d"));
}

TEST_F(CliTest, SeedPrecedence) {
  const fs::path cfg = write_config("cfg.json", kBase);
  auto out = [&](const char* d) { return (root_ / d).string(); };
  const std::string base = "sweep-ghost --config " + cfg.string() + " --out ";
  ASSERT_EQ(run(base + out("config_seed")), 0);
  ASSERT_EQ(run(base + out("env_seed"), "NORMLAB_SEED=9"), 0);
  ASSERT_EQ(run(base + out("flag_seed") + " --seed 9", "NORMLAB_SEED=4"), 0);
  ASSERT_EQ(run(base + out("flag_over_env") + " --seed 4", "NORMLAB_SEED=9"), 0);
  auto csv = [&](const char* d) { return slurp(root_ / d / "ghost_sweep.csv"); };
  EXPECT_EQ(csv("env_seed"), csv("flag_seed"));
  EXPECT_EQ(csv("config_seed"), csv("flag_over_env"));
  EXPECT_NE(csv("config_seed"), csv("env_seed"));
}

}  // namespace
}  // namespace normlab
