// Copyright 2026 The normlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>

#include "normlab/bounds.hpp"
#include "normlab/errors.hpp"
#include "normlab/harness.hpp"
#include "normlab/layers.hpp"
#include "normlab/moments.hpp"
#include "normlab/partition.hpp"
#include "normlab/regularize.hpp"
#include "normlab/tensor.hpp"

namespace py = pybind11;
using namespace normlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor4 to_tensor(const Array& a) {
  if (a.ndim() != 4) throw DimensionError("expected a 4-d array (N, C, H, W)");
  const Shape s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor4(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor4& t) {
  const Shape& s = t.shape();
  Array out({s.n, s.c, s.h, s.w});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Partition-based normalization layers and experiment harness";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<SamplingError>(m, "SamplingError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  py::enum_<Mode>(m, "Mode").value("train", Mode::train).value("infer", Mode::infer);

  py::class_<NormScheme>(m, "NormScheme")
      .def_static("batch", &NormScheme::batch)
      .def_static("ghost", &NormScheme::ghost, py::arg("ghost_size"))
      .def_static("group", &NormScheme::group, py::arg("groups"))
      .def_static("batch_group", &NormScheme::batch_group, py::arg("example_group"),
                  py::arg("groups"))
      .def_static("parse", &parse_scheme, py::arg("text"))
      .def("with_alpha", &NormScheme::with_alpha, py::arg("alpha"))
      .def_readonly("alpha", &NormScheme::alpha)
      .def("__str__", &NormScheme::str)
      .def("__repr__", [](const NormScheme& s) { return "NormScheme('" + s.str() + "')"; });

  m.def(
      "group_assignment",
      [](const NormScheme& s, std::vector<std::size_t> shape, Mode mode) {
        if (shape.size() != 4) throw DimensionError("shape must have 4 extents");
        const StatPartition p = partition_of(s, Shape{shape[0], shape[1], shape[2], shape[3]}, mode);
        std::vector<std::uint32_t> ids;
        for (std::size_t n = 0; n < shape[0]; ++n) {
          for (std::size_t c = 0; c < shape[1]; ++c) {
            ids.push_back(p.group_of((n * shape[1] + c) * shape[2] * shape[3]));
          }
        }
        return py::make_tuple(p.n_groups(), ids);
      },
      py::arg("scheme"), py::arg("shape"), py::arg("mode") = Mode::train,
      "Number of groups and the group id of every (example, channel) pair.");

  py::class_<MovingMoments>(m, "MovingMoments")
      .def_static("init", &MovingMoments::init, py::arg("channels"), py::arg("rho") = kDefaultRho)
      .def_static(
          "from_mean_var",
          [](const std::vector<double>& mean, const std::vector<double>& var, double rho) {
            return from_mean_var(mean, var, rho);
          },
          py::arg("mean"), py::arg("var"), py::arg("rho") = kDefaultRho)
      .def_readwrite("m_x", &MovingMoments::m_x)
      .def_readwrite("m_x2", &MovingMoments::m_x2)
      .def_readwrite("rho", &MovingMoments::rho)
      .def("implied_variance", &MovingMoments::implied_variance, py::arg("channel"));

  py::class_<NormParams>(m, "NormParams")
      .def(py::init([](std::vector<double> g, std::vector<double> b, double eps) {
             NormParams p{std::move(g), std::move(b), eps};
             p.validate(p.gamma.size());
             return p;
           }),
           py::arg("gamma"), py::arg("beta"), py::arg("epsilon") = kDefaultEpsilon)
      .def_static("identity", &NormParams::identity, py::arg("channels"),
                  py::arg("epsilon") = kDefaultEpsilon)
      .def_readwrite("gamma", &NormParams::gamma)
      .def_readwrite("beta", &NormParams::beta)
      .def_readwrite("epsilon", &NormParams::epsilon);

  m.def(
      "forward_train",
      [](const Array& x, const NormParams& p, const NormScheme& s, const MovingMoments& mv) {
        TrainForward f = forward_train(to_tensor(x), p, s, mv);
        return py::make_tuple(to_array(f.y), f.moving);
      },
      py::arg("x"), py::arg("params"), py::arg("scheme"), py::arg("moving"),
      "Returns (y, updated moving moments).");

  m.def(
      "forward_infer",
      [](const Array& x, const NormParams& p, const NormScheme& s, const MovingMoments& mv,
         std::optional<double> alpha, double max_alpha) {
        return to_array(forward_infer(to_tensor(x), p, s, mv, alpha, max_alpha));
      },
      py::arg("x"), py::arg("params"), py::arg("scheme"), py::arg("moving"),
      py::arg("alpha") = py::none(), py::arg("max_alpha") = 1.0);

  m.def(
      "forward_backward",
      [](const Array& x, const NormParams& p, const NormScheme& s, const Array& dy) {
        const TrainForward f = forward_train(to_tensor(x), p, s, MovingMoments::init(p.channels()));
        const GradientBundle g = backward(f.cache, to_tensor(dy));
        return py::make_tuple(to_array(f.y), to_array(g.d_input), g.d_gamma, g.d_beta);
      },
      py::arg("x"), py::arg("params"), py::arg("scheme"), py::arg("dy"),
      "Returns (y, dx, dgamma, dbeta).");

  m.def(
      "finite_diff_check",
      [](const Array& x, const NormParams& p, const NormScheme& s, const Array& dy, double step,
         double floor) { return finite_diff_check(to_tensor(x), p, s, to_tensor(dy), step, floor); },
      py::arg("x"), py::arg("params"), py::arg("scheme"), py::arg("dy"), py::arg("step") = 1e-5,
      py::arg("floor") = 1e-6);

  m.def(
      "output_bound",
      [](double gamma, double beta, std::size_t cells) {
        const OutputBound b = output_bound(gamma, beta, cells);
        return py::make_tuple(b.lo, b.hi);
      },
      py::arg("gamma"), py::arg("beta"), py::arg("group_cells"));

  m.def(
      "tightness_value",
      [](std::size_t group_size, double a, double eps) {
        return tightness_value({group_size, a, eps});
      },
      py::arg("group_size"), py::arg("a"), py::arg("epsilon") = kDefaultEpsilon);

  m.def(
      "decay_step",
      [](const NormParams& p, double delta, int gamma_target) {
        WeightDecayConfig cfg;
        cfg.delta = delta;
        cfg.gamma_target = gamma_target;
        cfg.apply_to_norm_params = true;
        return decay_step(p, cfg);
      },
      py::arg("params"), py::arg("delta"), py::arg("gamma_target") = 1);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_json,
         const std::filesystem::path& out, std::optional<std::uint64_t> seed, std::size_t jobs) {
        ExperimentSpec spec = parse_experiment(config_json, parse_command(command));
        if (seed) apply_seed(spec, *seed);
        spec.out = out;
        spec.jobs = jobs;
        py::gil_scoped_release release;
        return run_command(spec);
      },
      py::arg("command"), py::arg("config_json"), py::arg("out"), py::arg("seed") = py::none(),
      py::arg("jobs") = 1, "Runs a harness command and returns the written paths.");
}
