// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

// normlab <command> --config <path.json> --out <dir> [--seed N] [--jobs N]
//
// Exit codes: 0 success, 2 bad config/input/sampling, 3 numeric or training
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "normlab/errors.hpp"
#include "normlab/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw normlab::InputError("cannot read config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::uint64_t parse_seed(const std::string& text, const char* origin) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw normlab::ConfigError(std::string(origin) + " must be a non-negative integer");
  }
  return v;
}

int run(const std::string& command, const std::string& config, const std::string& out,
        const std::string& seed_flag, std::size_t jobs) {
  normlab::ExperimentSpec spec =
      normlab::parse_experiment(slurp(config), normlab::parse_command(command));
  if (!seed_flag.empty()) {
    normlab::apply_seed(spec, parse_seed(seed_flag, "--seed"));
  } else if (const char* env = std::getenv("NORMLAB_SEED"); env != nullptr && *env != '\0') {
    normlab::apply_seed(spec, parse_seed(env, "NORMLAB_SEED"));
  }
  spec.out = out;
  spec.jobs = jobs;
  for (const auto& path : normlab::run_command(spec)) std::cout << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normlab: normalization-scheme experiments on synthetic data"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string seed;
  std::size_t jobs = 1;
  for (const char* name : {"sweep-alpha", "sweep-ghost", "compare", "non-iid", "bounds"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment JSON")->required();
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", seed, "overrides NORMLAB_SEED and the config seed");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, config, out, seed, jobs);
  } catch (const normlab::NumericError& e) {
    std::cerr << "normlab: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const normlab::TrainingError& e) {
    std::cerr << "normlab: training failed at epoch " << e.epoch() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const normlab::Error& e) {
    std::cerr << "normlab: " << e.what() << '\n';
    return kExitConfig;
  }
}
