#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "epifed/config.hpp"
#include "epifed/error.hpp"
#include "epifed/fedlearn.hpp"
#include "epifed/graph.hpp"
#include "epifed/metrics.hpp"
#include "epifed/partition.hpp"
#include "epifed/pipeline.hpp"

namespace py = pybind11;
using namespace epifed;

namespace {

std::vector<std::uint8_t> to_codes(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

ModelSpec spec_from(const std::string& model, const std::map<std::string, double>& params) {
  std::vector<std::pair<std::string, double>> kv(params.begin(), params.end());
  auto spec = ModelSpec::from_parameters(parse_variant(model), kv);
  spec.validate();
  return spec;
}

ParamSet paramset_from(const std::vector<std::pair<std::string, py::array_t<double>>>& items) {
  ParamSet p;
  for (const auto& [name, arr] : items) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
    std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
    if (shape.empty()) shape = {1};
    p.add(name, Tensor(shape, std::vector<double>(a.data(), a.data() + a.size())));
  }
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Epidemic simulation, partitioning and federated epidemic prediction";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::size_t n, const std::vector<Edge>& edges) { return Graph::from_edges(n, edges); }),
           py::arg("n_nodes"), py::arg("edges"))
      .def_property_readonly("n_nodes", &Graph::n_nodes)
      .def_property_readonly("n_edges", &Graph::n_edges)
      .def_property_readonly("edges", &Graph::edges)
      .def("degree", &Graph::degree)
      .def("neighbors", [](const Graph& g, NodeId i) {
        auto s = g.neighbors(i);
        return std::vector<NodeId>(s.begin(), s.end());
      })
      .def("hash", &Graph::hash)
      .def("__repr__", [](const Graph& g) {
        return "<Graph n_nodes=" + std::to_string(g.n_nodes()) + " n_edges=" + std::to_string(g.n_edges()) + ">";
      });

  m.def("generate_synthetic",
        [](const std::string& kind, std::size_t n, std::size_t ba_m, double p, std::uint64_t seed) {
          SyntheticParams sp;
          sp.n = n;
          sp.m = ba_m;
          sp.p = p;
          return generate_synthetic(parse_synthetic_kind(kind), sp, seed);
        },
        py::arg("kind"), py::arg("n"), py::arg("m") = 1, py::arg("p") = 0.0, py::arg("seed") = 0);
  m.def("load_edge_list", [](const std::string& path) { return load_edge_list_file(path).graph; });
  m.def("spectral_radius", [](const Graph& g) { return spectral_radius(g); });
  m.def("epidemic_threshold", [](const Graph& g) { return epidemic_threshold(g); });
  m.def("top_k_by_degree", &top_k_by_degree);

  m.def("simulate",
        [](const Graph& g, const std::string& model, const std::map<std::string, double>& params,
           double dt, double t_max, std::uint64_t seed, double init_fraction,
           std::optional<std::vector<NodeId>> infected) {
          const auto spec = spec_from(model, params);
          const InitSpec init = infected ? InitSpec::nodes(*infected) : InitSpec::fraction(init_fraction);
          Trajectory tr;
          {
            py::gil_scoped_release release;
            tr = simulate(g, spec, init, {dt, t_max, seed});
          }
          py::array_t<std::uint8_t> out({tr.n_samples(), tr.n_nodes()});
          std::copy(tr.states().begin(), tr.states().end(), out.mutable_data());
          return out;
        },
        py::arg("graph"), py::arg("model"), py::arg("params"), py::arg("dt") = 1.0,
        py::arg("t_max") = 100.0, py::arg("seed") = 0, py::arg("init_fraction") = 0.05,
        py::arg("infected") = py::none(),
        "Simulate and return the sampled states as a (samples, nodes) uint8 array.");
  m.def("exact_markov_sis", &exact_markov_sis, py::arg("graph"), py::arg("beta"), py::arg("delta"),
        py::arg("infected"), py::arg("t"));

  m.def("partition",
        [](const Graph& g, const std::string& method, std::size_t clients, std::uint64_t seed) {
          return make_partition(g, parse_partition_method(method), clients, seed).client;
        },
        py::arg("graph"), py::arg("method"), py::arg("clients"), py::arg("seed") = 0);
  m.def("edge_cut", [](const Graph& g, const std::vector<std::int32_t>& assignment) {
    PartitionAssignment p;
    p.client = assignment;
    p.n_clients = assignment.empty() ? 0 : static_cast<std::size_t>(*std::max_element(assignment.begin(), assignment.end()) + 1);
    p.validate(g.n_nodes());
    return edge_cut(g, p);
  });

  m.def("accuracy", [](py::array_t<std::uint8_t> pred, py::array_t<std::uint8_t> truth) {
    return accuracy(to_codes(pred), to_codes(truth));
  });
  m.def("macro_f1", [](py::array_t<std::uint8_t> pred, py::array_t<std::uint8_t> truth) {
    return macro_f1(to_codes(pred), to_codes(truth));
  });
  m.def("prevalence_errors",
        [](py::array_t<std::uint8_t> pred, py::array_t<std::uint8_t> truth, std::size_t n_nodes,
           std::size_t t_future, std::uint8_t infected) {
          const auto e = prevalence_errors(to_codes(pred), to_codes(truth), n_nodes, t_future, infected);
          return py::make_tuple(e.rmse, e.mae);
        },
        py::arg("pred"), py::arg("truth"), py::arg("n_nodes"), py::arg("t_future"),
        py::arg("infected") = 1);
  m.def("efficacy_energy",
        [](const std::vector<double>& alpha, bool typeset) {
          return efficacy_energy(alpha, typeset ? EtaNormalization::Typeset : EtaNormalization::TermCount);
        },
        py::arg("alpha_bar"), py::arg("typeset") = false);
  m.def("aggregate",
        [](const std::vector<std::vector<std::pair<std::string, py::array_t<double>>>>& locals,
           const std::vector<double>& weights) {
          std::vector<ParamSet> sets;
          for (const auto& l : locals) sets.push_back(paramset_from(l));
          std::vector<const ParamSet*> ptrs;
          for (const auto& s : sets) ptrs.push_back(&s);
          const ParamSet out = aggregate(ptrs, weights);
          py::dict d;
          for (std::size_t k = 0; k < out.size(); ++k) {
            const auto& t = out.at(k);
            py::array_t<double> a(t.shape());
            std::copy(t.data().begin(), t.data().end(), a.mutable_data());
            d[py::str(out.name(k))] = a;
          }
          return d;
        },
        py::arg("locals"), py::arg("weights"),
        "Weighted mean of parameter sets given as lists of (name, array) pairs.");

  m.def("resolve_config", [](const std::string& json, const std::vector<std::string>& overrides) {
    return config_to_json(parse_config(json, overrides));
  }, py::arg("json") = "{}", py::arg("overrides") = std::vector<std::string>{});
  m.def("run_simulate", [](const std::string& json, const std::string& out) {
    const auto cfg = parse_config(json);
    py::gil_scoped_release release;
    return cmd_simulate(cfg, out);
  });
  m.def("run_train", [](const std::string& json) {
    const auto cfg = parse_config(json);
    py::gil_scoped_release release;
    return cmd_train(cfg);
  }, "Train per the JSON config; outputs go to its output_dir. Returns the report.");
  m.def("run_sweep", [](const std::string& json) {
    const auto cfg = parse_config(json);
    py::gil_scoped_release release;
    return cmd_sweep(cfg);
  });
  m.def("graph_info", [](const std::string& json) { return cmd_graph_info(parse_config(json)); });
}
