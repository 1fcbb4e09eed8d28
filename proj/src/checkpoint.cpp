// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "normlab/training.hpp"

namespace normlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "normlab-checkpoint-1";

void put(std::ostream& os, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, end - buf);
}

double parse_double(const std::string& s, const fs::path& file) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError(file.string() + ": bad number '" + s + "'");
  }
  return v;
}

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open checkpoint file " + file.string());
  return in;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream row(line);
  std::string field;
  while (std::getline(row, field, ',')) out.push_back(field);
  return out;
}

void write_norm(const fs::path& file, const NormParams& p) {
  std::ofstream os(file);
  os << "epsilon,";
  put(os, p.epsilon);
  os << "\nchannel,gamma,beta\n";
  for (std::size_t c = 0; c < p.channels(); ++c) {
    os << c << ',';
    put(os, p.gamma[c]);
    os << ',';
    put(os, p.beta[c]);
    os << '\n';
  }
  if (!os) throw InputError("cannot write " + file.string());
}

NormParams read_norm(const fs::path& file) {
  std::ifstream in = open_input(file);
  std::string line;
  NormParams p;
  if (!std::getline(in, line) || line.rfind("epsilon,", 0) != 0) {
    throw InputError(file.string() + ": expected 'epsilon,<value>' first line");
  }
  p.epsilon = parse_double(line.substr(8), file);
  if (!std::getline(in, line) || line != "channel,gamma,beta") {
    throw InputError(file.string() + ": expected 'channel,gamma,beta' header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_row(line);
    if (f.size() != 3) throw InputError(file.string() + ": malformed row '" + line + "'");
    p.gamma.push_back(parse_double(f[1], file));
    p.beta.push_back(parse_double(f[2], file));
  }
  return p;
}

}  // namespace

MovingMoments read_moving_file(const fs::path& file);

void save_checkpoint(const fs::path& dir, const Network& model) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create checkpoint directory " + dir.string());

  const ModelSpec& spec = model.spec();
  json manifest;
  manifest["format"] = kFormat;
  manifest["scheme"] = model.scheme().str();
  manifest["alpha"] = model.scheme().alpha;
  manifest["in_channels"] = spec.in_channels;
  manifest["widths"] = spec.widths;
  manifest["n_classes"] = spec.n_classes;
  manifest["epsilon"] = spec.epsilon;
  manifest["rho"] = spec.rho;
  manifest["weights"] = "weights.csv";
  json layers = json::array();
  json shapes = json::object();

  std::ofstream weights(dir / "weights.csv");
  weights << "name,index,value\n";
  auto dump = [&](const std::string& name, const std::vector<double>& v,
                  std::vector<std::size_t> shape) {
    shapes[name] = shape;
    for (std::size_t i = 0; i < v.size(); ++i) {
      weights << name << ',' << i << ',';
      put(weights, v[i]);
      weights << '\n';
    }
  };
  for (std::size_t i = 0; i < model.blocks().size(); ++i) {
    const Block& b = model.blocks()[i];
    const std::string tag = "block" + std::to_string(i);
    dump(tag + ".weight", b.weight, {b.out, b.in});
    dump(tag + ".bias", b.bias, {b.out});
    const std::string norm_file = "norm_" + std::to_string(i) + ".csv";
    const std::string moving_file = "moving_" + std::to_string(i) + ".csv";
    write_norm(dir / norm_file, b.norm);
    std::ofstream mv(dir / moving_file);
    write_csv(mv, b.moving);
    if (!mv) throw InputError("cannot write " + (dir / moving_file).string());
    layers.push_back({{"in", b.in}, {"out", b.out}, {"norm", norm_file}, {"moving", moving_file}});
  }
  dump("classifier.weight", model.classifier_weight(), {spec.n_classes, model.blocks().back().out});
  dump("classifier.bias", model.classifier_bias(), {spec.n_classes});
  if (!weights) throw InputError("cannot write " + (dir / "weights.csv").string());
  manifest["layers"] = layers;
  manifest["shapes"] = shapes;

  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw InputError("cannot write " + (dir / "manifest.json").string());
}

Network load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("checkpoint directory not found: " + dir.string());
  json manifest;
  try {
    std::ifstream in = open_input(dir / "manifest.json");
    manifest = json::parse(in);
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw InputError("unsupported checkpoint format in " + dir.string());
    }
    ModelSpec spec;
    spec.in_channels = manifest.at("in_channels").get<std::size_t>();
    spec.widths = manifest.at("widths").get<std::vector<std::size_t>>();
    spec.n_classes = manifest.at("n_classes").get<std::size_t>();
    spec.epsilon = manifest.at("epsilon").get<double>();
    spec.rho = manifest.at("rho").get<double>();
    NormScheme scheme = parse_scheme(manifest.at("scheme").get<std::string>());
    scheme.alpha = manifest.value("alpha", 0.0);

    std::map<std::string, std::vector<double>> tensors;
    {
      const fs::path file = dir / manifest.value("weights", std::string("weights.csv"));
      std::ifstream w = open_input(file);
      std::string line;
      if (!std::getline(w, line) || line != "name,index,value") {
        throw InputError(file.string() + ": expected 'name,index,value' header");
      }
      while (std::getline(w, line)) {
        if (line.empty()) continue;
        const auto f = split_row(line);
        if (f.size() != 3) throw InputError(file.string() + ": malformed row '" + line + "'");
        auto& t = tensors[f[0]];
        if (static_cast<std::size_t>(parse_double(f[1], file)) != t.size()) {
          throw InputError(file.string() + ": indices out of order for " + f[0]);
        }
        t.push_back(parse_double(f[2], file));
      }
    }
    auto take = [&](const std::string& name) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw InputError("checkpoint is missing tensor " + name);
      return std::move(it->second);
    };

    const json& layers = manifest.at("layers");
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const json& l = layers[i];
      Block b;
      b.in = l.at("in").get<std::size_t>();
      b.out = l.at("out").get<std::size_t>();
      const std::string tag = "block" + std::to_string(i);
      b.weight = take(tag + ".weight");
      b.bias = take(tag + ".bias");
      b.norm = read_norm(dir / l.at("norm").get<std::string>());
      b.moving = read_moving_file(dir / l.at("moving").get<std::string>());
      blocks.push_back(std::move(b));
    }
    return Network::from_parts(spec, scheme, std::move(blocks), take("classifier.weight"),
                               take("classifier.bias"));
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw InputError("inconsistent checkpoint in " + dir.string() + ": " + e.what());
  }
}

MovingMoments read_moving_file(const fs::path& file) {
  std::ifstream in = open_input(file);
  try {
    return read_moving_csv(in);
  } catch (const InputError& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

}  // namespace normlab
