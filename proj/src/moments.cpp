// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "normlab/moments.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

namespace normlab {

MovingMoments MovingMoments::init(std::size_t channels, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("moving-average decay must lie in (0,1)");
  return MovingMoments{std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), rho};
}

Moments compute_moments(const Tensor4& x, const StatPartition& p) {
  const GroupSums sums = group_sums(x, p);
  const std::size_t g = sums.sum.size();
  Moments m;
  m.mean.resize(g);
  m.second.resize(g);
  m.var.resize(g);
  m.count = sums.count;
  for (std::size_t k = 0; k < g; ++k) {
    const auto n = static_cast<double>(sums.count[k]);
    m.mean[k] = sums.sum[k] / n;
    m.second[k] = sums.sum_sq[k] / n;
  }
  // Variance from centered squares; E[x^2] - E[x]^2 cancels badly when the
  // spread is small next to the mean.
  std::vector<double> centered(g, 0.0);
  const auto v = x.values();
  const auto& ids = p.group_of_cell();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - m.mean[ids[i]];
    centered[ids[i]] += d * d;
  }
  for (std::size_t k = 0; k < g; ++k) m.var[k] = centered[k] / static_cast<double>(sums.count[k]);
  return m;
}

MovingMoments update_moving(const MovingMoments& m, const Tensor4& x) {
  const Shape& s = x.shape();
  if (m.channels() != s.c) {
    throw DimensionError("update_moving: " + std::to_string(m.channels()) +
                         " moving channels vs tensor " + s.str());
  }
  std::vector<double> sum(s.c, 0.0);
  std::vector<double> sum_sq(s.c, 0.0);
  const auto v = x.values();
  const std::size_t hw = s.spatial();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t c = (i / hw) % s.c;
    sum[c] += v[i];
    sum_sq[c] += v[i] * v[i];
  }
  const auto per_channel = static_cast<double>(s.n * hw);
  MovingMoments out = m;
  for (std::size_t c = 0; c < s.c; ++c) {
    out.m_x[c] = m.rho * m.m_x[c] + (1.0 - m.rho) * (sum[c] / per_channel);
    out.m_x2[c] = m.rho * m.m_x2[c] + (1.0 - m.rho) * (sum_sq[c] / per_channel);
  }
  return out;
}

MovingMoments from_mean_var(std::span<const double> mean, std::span<const double> var, double rho) {
  if (mean.size() != var.size()) throw DimensionError("from_mean_var: length mismatch");
  MovingMoments m = MovingMoments::init(mean.size(), rho);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    if (!(var[c] >= 0.0)) {
      throw DomainError("from_mean_var: negative variance at channel " + std::to_string(c));
    }
    m.m_x[c] = mean[c];
    m.m_x2[c] = var[c] + mean[c] * mean[c];
  }
  return m;
}

Moments blend(const Moments& example, const StatPartition& p, const MovingMoments& moving,
              double alpha, double max_alpha) {
  if (!(alpha >= 0.0 && alpha <= max_alpha)) {
    throw ConfigError("blend: alpha " + std::to_string(alpha) + " outside [0," +
                      std::to_string(max_alpha) + "]");
  }
  if (example.size() != p.n_groups()) throw DimensionError("blend: moments/partition mismatch");
  if (moving.channels() != p.shape().c) throw DimensionError("blend: moving channel mismatch");

  Moments out;
  const std::size_t g = example.size();
  out.mean.resize(g);
  out.second.resize(g);
  out.var.resize(g);
  out.count = example.count;
  for (std::size_t k = 0; k < g; ++k) {
    const auto& channels = p.channels_of(k);
    double mx = 0.0;
    double mx2 = 0.0;
    for (std::size_t c : channels) {
      mx += moving.m_x[c];
      mx2 += moving.m_x2[c];
    }
    mx /= static_cast<double>(channels.size());
    mx2 /= static_cast<double>(channels.size());
    out.mean[k] = alpha * example.mean[k] + (1.0 - alpha) * mx;
    out.second[k] = alpha * example.second[k] + (1.0 - alpha) * mx2;
    // second - mean^2 regrouped so each endpoint returns its source variance.
    const double gap = example.mean[k] - mx;
    const double var = alpha * example.var[k] + (1.0 - alpha) * (mx2 - mx * mx) +
                       alpha * (1.0 - alpha) * gap * gap;
    out.var[k] = std::max(var, 0.0);
  }
  return out;
}

void write_csv(std::ostream& os, const MovingMoments& m) {
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, end - buf);
  };
  os << "rho,";
  put(m.rho);
  os << "\nchannel,m_x,m_x2\n";
  for (std::size_t c = 0; c < m.channels(); ++c) {
    os << c << ',';
    put(m.m_x[c]);
    os << ',';
    put(m.m_x2[c]);
    os << '\n';
  }
}

namespace {

double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError(std::string(what) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

MovingMoments read_moving_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("rho,", 0) != 0) {
    throw InputError("moving csv: expected 'rho,<value>' first line");
  }
  const double rho = parse_double(std::string_view(line).substr(4), "moving csv rho");
  if (!std::getline(is, line)) throw InputError("moving csv: missing column header");
  // `channel,mean,var` is a conventional checkpoint; it is converted to raw moments.
  const bool conventional = line == "channel,mean,var";
  if (!conventional && line != "channel,m_x,m_x2") {
    throw InputError("moving csv: expected 'channel,m_x,m_x2' or 'channel,mean,var' header");
  }
  std::vector<double> first;
  std::vector<double> second;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[3];
    for (auto& field : f) {
      if (!std::getline(row, field, ',')) throw InputError("moving csv: short row '" + line + "'");
    }
    if (static_cast<std::size_t>(parse_double(f[0], "moving csv channel")) != first.size()) {
      throw InputError("moving csv: channels out of order");
    }
    first.push_back(parse_double(f[1], "moving csv value"));
    second.push_back(parse_double(f[2], "moving csv value"));
  }
  if (!(rho > 0.0 && rho < 1.0)) throw InputError("moving csv: rho must lie in (0,1)");
  if (conventional) {
    try {
      return from_mean_var(first, second, rho);
    } catch (const DomainError& e) {
      throw InputError(std::string("moving csv: ") + e.what());
    }
  }
  return MovingMoments{std::move(first), std::move(second), rho};
}

}  // namespace normlab
