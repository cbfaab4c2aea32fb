#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fignn/cli.hpp"
#include "fignn/error.hpp"
#include "fignn/evaluation.hpp"
#include "fignn/io.hpp"
#include "fignn/model.hpp"

namespace py = pybind11;
using namespace fignn;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

std::vector<graph::Point> points_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw DimensionError("coords must have shape [N, 2]");
  std::vector<graph::Point> p(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {r(i, 0), r(i, 1)};
  return p;
}

ad::Tensor tensor_from(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("state must be a 2-D array [N, F]");
  const auto n = static_cast<std::size_t>(a.shape(0)), f = static_cast<std::size_t>(a.shape(1));
  return ad::Tensor::from({n, f}, std::vector<double>(a.data(), a.data() + n * f));
}

Array array_from(const ad::Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

/// Graph plus its coarsening hierarchy, built for a fixed number of levels.
struct PyGraph {
  model::GraphContext ctx;
};

struct PyModel {
  model::FignnModel model;
};

}  // namespace

PYBIND11_MODULE(_fignn, m) {
  m.doc() = "Feature-specific interpretable graph network surrogate";

  py::register_exception<Error>(m, "FignnError", PyExc_RuntimeError);

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI invocation in process; returns (exit_code, stdout, stderr).");

  py::class_<PyGraph>(m, "Graph")
      .def_static(
          "knn",
          [](const Array& coords, std::size_t k, std::size_t levels, double period_x) {
            return PyGraph{model::GraphContext::build(graph::build_knn_graph(points_from(coords), k, period_x), levels)};
          },
          py::arg("coords"), py::arg("k") = 10, py::arg("levels") = 2, py::arg("period_x") = 0.0)
      .def_property_readonly("num_nodes", [](const PyGraph& g) { return g.ctx.graph.num_nodes(); })
      .def_property_readonly("num_edges", [](const PyGraph& g) { return g.ctx.graph.num_edges(); })
      .def_property_readonly("levels", [](const PyGraph& g) { return g.ctx.hierarchy.levels.size(); })
      .def("edges", [](const PyGraph& g) {
        const auto& gr = g.ctx.graph;
        py::array_t<std::int64_t> out({gr.num_edges(), std::size_t{2}});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t e = 0; e < gr.num_edges(); ++e) {
          w(e, 0) = static_cast<std::int64_t>(gr.src()[e]);
          w(e, 1) = static_cast<std::int64_t>(gr.dst()[e]);
        }
        return out;
      });

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::string& config_json) {
             return PyModel{model::FignnModel(io::model_config_from_json(io::json::parse(config_json)))};
           }),
           py::arg("config_json") = "{}")
      .def_static(
          "load", [](const std::string& dir) { return PyModel{io::load_checkpoint(dir).model}; }, py::arg("path"))
      .def_property_readonly("config_json", [](const PyModel& p) { return io::to_json(p.model.config()).dump(); })
      .def("parameter_count", [](PyModel& p) { return model::count_parameters(p.model).total(); })
      .def(
          "forward",
          [](const PyModel& p, const Array& x, const PyGraph& g) {
            const auto r = model::fignn_forward(tensor_from(x), g.ctx, p.model);
            std::vector<std::vector<std::size_t>> keep;
            for (const auto& mk : r.masks) keep.push_back(mk.keep);
            return py::make_tuple(array_from(r.x_next), keep);
          },
          py::arg("x"), py::arg("graph"), "One step; returns (x_next, per-feature kept node indices).")
      .def(
          "baseline_forward",
          [](const PyModel& p, const Array& x, const PyGraph& g) {
            return array_from(model::baseline_forward(tensor_from(x), g.ctx, p.model));
          },
          py::arg("x"), py::arg("graph"))
      .def(
          "rollout",
          [](const PyModel& p, const Array& x0, const PyGraph& g, std::size_t steps) {
            const auto r = eval::rollout(p.model, tensor_from(x0), g.ctx, steps);
            py::list states;
            for (const auto& s : r.states) states.append(array_from(s));
            return py::make_tuple(states, r.truncated);
          },
          py::arg("x0"), py::arg("graph"), py::arg("steps"));

  m.def("mask_size", &model::mask_size, py::arg("n"), py::arg("rf"));
  m.def(
      "topk",
      [](const std::vector<double>& scores, std::size_t rf) { return model::topk_select(scores, rf).keep; },
      py::arg("scores"), py::arg("rf"));
}
