#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hitl/env.hpp"
#include "hitl/experiment.hpp"
#include "hitl/function_class.hpp"
#include "hitl/mdp.hpp"

namespace py = pybind11;
using namespace hitl;

namespace {

std::string gen_env_json(std::size_t states, std::vector<std::size_t> actions, std::size_t dim,
                         double margin, int levels, const std::string& kind, std::uint64_t seed) {
  EnvConfig c;
  c.num_states = states;
  c.actions = std::move(actions);
  c.dim = dim;
  c.margin = margin;
  c.levels = levels;
  c.kind = model_kind_from_string(kind);
  json j;
  to_json(j, gen_env(c, seed));
  return j.dump();
}

double optimal_value(const std::string& env) {
  const auto bundle = env_bundle_from_json(json::parse(env));
  return dp_evaluate(bundle.mdp, dp_optimal(bundle.mdp).policy);
}

py::list fig1(const std::string& panel, std::size_t trials, std::uint64_t seed,
              std::optional<std::size_t> episodes, std::optional<std::vector<std::size_t>> budgets,
              std::size_t jobs) {
  Fig1Config c;
  if (panel == "left") c = fig1_left_defaults();
  else if (panel == "right") c = fig1_right_defaults();
  else throw py::value_error("panel must be 'left' or 'right'");
  c.trials = trials;
  c.seed = seed;
  c.jobs = jobs;
  if (episodes) c.episodes = *episodes;
  if (budgets) c.budgets = *budgets;
  std::vector<Fig1Row> rows;
  {
    py::gil_scoped_release release;
    rows = run_fig1(c);
  }
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["method"] = r.method;
    d["delta"] = r.margin;
    d["n_queries"] = r.n_queries;
    d["k"] = r.episodes;
    d["trial"] = r.trial;
    d["error"] = r.error;
    d["env_steps"] = r.env_steps;
    d["oracle_calls"] = r.oracle_calls;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_hitl, m) {
  m.doc() = "Reward learning with sparse human feedback on tabular MDPs";
  m.def("gen_env", &gen_env_json, py::arg("states") = 20,
        py::arg("actions") = std::vector<std::size_t>{10, 3}, py::arg("dim") = 5,
        py::arg("margin") = 0.05, py::arg("levels") = 1, py::arg("kind") = "linear",
        py::arg("seed") = 0, "Random environment bundle as a JSON string.");
  m.def("dp_optimal_value", &optimal_value, py::arg("env"),
        "Optimal value from the initial state of a JSON environment bundle.");
  m.def("query_budget", &query_budget, py::arg("dim"), py::arg("margin"), py::arg("delta"),
        py::arg("c1") = 1.0, py::arg("pool_size") = 0);
  m.def("run_fig1", &fig1, py::arg("panel") = "left", py::arg("trials") = 100,
        py::arg("seed") = 0, py::arg("episodes") = py::none(), py::arg("budgets") = py::none(),
        py::arg("jobs") = 1);
}
