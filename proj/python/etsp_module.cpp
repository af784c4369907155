#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etsp/error.hpp"
#include "etsp/instance.hpp"
#include "etsp/report.hpp"
#include "etsp/separator.hpp"
#include "etsp/solver.hpp"

namespace py = pybind11;

namespace {

etsp::PointSet to_points(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw etsp::PreconditionError("need at least one point");
  etsp::PointSet pts(rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != pts.dim()) throw etsp::PreconditionError("points differ in dimension");
    pts.push_back(r);
  }
  return pts;
}

std::vector<std::vector<double>> from_points(const etsp::PointSet& pts) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < pts.size(); ++i) out.emplace_back(pts[i].begin(), pts[i].end());
  return out;
}

etsp::SolverConfig make_config(std::vector<std::size_t> caps, double gamma, std::size_t base,
                               std::size_t workers, double time_limit_s) {
  if (caps.size() != 3) throw etsp::PreconditionError("caps must have three entries");
  etsp::SolverConfig cfg;
  cfg.caps = {caps[0], caps[1], caps[2]};
  cfg.gamma = gamma;
  cfg.base_threshold = base;
  cfg.workers = workers;
  cfg.time_limit_ms = time_limit_s * 1000.0;
  return cfg;
}

std::vector<std::vector<double>> matrix_rows(const etsp::DistanceMatrix& d) {
  std::vector<std::vector<double>> out(d.size(), std::vector<double>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) out[i][j] = d(i, j);
  }
  return out;
}

etsp::DistanceMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  etsp::DistanceMatrix d(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw etsp::PreconditionError("matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) d(i, j) = rows[i][j];
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(etsp, m) {
  m.doc() = "Exact Euclidean TSP by separators and representative sets";

  py::register_exception<etsp::PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<etsp::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<etsp::TimeLimitError>(m, "TimeLimitError", PyExc_TimeoutError);

  py::class_<etsp::Instance>(m, "Instance")
      .def_property_readonly("points", [](const etsp::Instance& i) { return from_points(i.points); })
      .def_property_readonly("model", [](const etsp::Instance& i) { return std::string(to_string(i.model)); })
      .def_property_readonly("matrix", [](const etsp::Instance& i) { return matrix_rows(i.weights()); })
      .def_readwrite("name", &etsp::Instance::name)
      .def_property_readonly("n", &etsp::Instance::size)
      .def_property_readonly("d", &etsp::Instance::dim)
      .def("weight", &etsp::Instance::weight)
      .def("__len__", &etsp::Instance::size);

  m.def("euclidean_instance",
        [](const std::vector<std::vector<double>>& pts, std::string name) {
          return etsp::euclidean_instance(to_points(pts), std::move(name));
        },
        py::arg("points"), py::arg("name") = "");
  m.def("matrix_instance",
        [](const std::vector<std::vector<double>>& pts, const std::vector<std::vector<double>>& d,
           std::string name) { return etsp::matrix_instance(to_points(pts), matrix_from_rows(d), std::move(name)); },
        py::arg("points"), py::arg("matrix"), py::arg("name") = "");
  m.def("gen",
        [](const std::string& kind, std::size_t n, std::size_t d, std::uint64_t seed) {
          return etsp::gen(etsp::parse_gen_kind(kind), n, d, seed);
        },
        py::arg("kind"), py::arg("n"), py::arg("d") = 2, py::arg("seed") = 1);
  m.def("perturb_matrix",
        [](const etsp::Instance& inst, std::uint64_t seed, double epsilon) {
          return matrix_rows(etsp::perturb_matrix(inst.points, seed, epsilon));
        },
        py::arg("instance"), py::arg("seed"), py::arg("epsilon"));
  m.def("validate_order_preserving",
        [](const etsp::Instance& inst, const std::vector<std::vector<double>>& d) {
          return etsp::validate_order_preserving(inst.points, matrix_from_rows(d));
        },
        py::arg("instance"), py::arg("matrix"));
  m.def("read_instance", &etsp::read_instance_file, py::arg("path"));
  m.def("write_instance", [](const etsp::Instance& inst, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw etsp::PreconditionError("cannot write '" + path + "'");
    etsp::write_instance(f, inst);
  }, py::arg("instance"), py::arg("path"));

  m.def("tour_length", [](const etsp::Instance& inst, const std::vector<etsp::Index>& order) {
    return etsp::tour_length(inst, order);
  }, py::arg("instance"), py::arg("tour"));
  m.def("held_karp", [](const etsp::Instance& inst) {
    const etsp::Tour t = etsp::held_karp(inst);
    return py::make_tuple(t.length, t.order);
  }, py::arg("instance"));

  m.def("solve",
        [](const etsp::Instance& inst, std::vector<std::size_t> caps, double gamma, std::size_t base,
           std::size_t workers, double time_limit_s, bool oracle) {
          const etsp::SolverConfig cfg = make_config(std::move(caps), gamma, base, workers, time_limit_s);
          etsp::RunResult r;
          {
            py::gil_scoped_release release;
            r = etsp::run_solve(inst, cfg);
            if (oracle) etsp::attach_oracle(r, inst);
          }
          return etsp::to_json(r);
        },
        py::arg("instance"), py::arg("caps") = std::vector<std::size_t>{12, 4, 6}, py::arg("gamma") = 8.0,
        py::arg("base") = 0, py::arg("workers") = 1, py::arg("time_limit_s") = 0.0, py::arg("oracle") = false,
        "Solve and return the JSON result text");

  m.def("quantile_cube", [](const etsp::Instance& inst) {
    const auto idx = [&] {
      std::vector<etsp::Index> v(inst.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<etsp::Index>(i);
      return v;
    }();
    const etsp::Separator s = etsp::smallest_quantile_cube(inst.points, idx);
    return py::make_tuple(s.center, s.size);
  }, py::arg("instance"));
  m.def("separator", [](const etsp::Instance& inst) {
    std::vector<etsp::Index> v(inst.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<etsp::Index>(i);
    const etsp::SeparatorChoice c = etsp::build_separator(inst.points, v);
    py::dict out;
    out["center"] = c.sigma.center;
    out["size"] = c.sigma.size;
    out["t_bar"] = c.t_bar;
    out["inside"] = c.balance_counts.first;
    out["outside"] = c.balance_counts.second;
    return out;
  }, py::arg("instance"));

  m.def("render_svg", [](const etsp::Instance& inst, const std::string& result_json) {
    const etsp::RunResult r = etsp::result_from_json(result_json);
    return etsp::render_svg(inst, r.tour, r.top_separator);
  }, py::arg("instance"), py::arg("result"));
}
