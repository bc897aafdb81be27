#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "bljust/config.hpp"
#include "bljust/errors.hpp"
#include "bljust/experiment.hpp"
#include "bljust/objectives.hpp"
#include "bljust/pbgd.hpp"
#include "bljust/rng.hpp"
#include "bljust/trace.hpp"
#include "bljust/verify.hpp"

namespace py = pybind11;
using namespace bljust;

namespace {

ExperimentConfig with_seed(ExperimentConfig c, std::optional<std::uint64_t> seed) {
  if (seed) c.strategy.base.seed = *seed;
  return c;
}

nlohmann::json epochs_json(const RunTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : trace.epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"phase", e.phase},
                    {"gamma", e.gamma},
                    {"f", e.f},
                    {"g", e.g},
                    {"p_hat", e.p_hat},
                    {"gnorm_f", e.gnorm_f},
                    {"gnorm_g", e.gnorm_g},
                    {"gnorm_F", e.gnorm_F}});
  }
  return rows;
}

nlohmann::json cells_json(const std::vector<Cell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : cells) {
    out.push_back({{"label", c.label},
                   {"seed", c.seed},
                   {"ok", c.ok},
                   {"error", c.error},
                   {"final_f", c.metrics.f},
                   {"final_g", c.metrics.g},
                   {"gnorm_f", c.metrics.gnorm_f},
                   {"gnorm_g", c.metrics.gnorm_g}});
  }
  return out;
}

std::string run_json(const std::string& text, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = with_seed(parse_config(text), seed);
  auto problem = build_problem(c);
  RunOutcome o = run_experiment(*problem, c.strategy);
  nlohmann::json j = summary_json(c, o);
  j["trace"] = epochs_json(o.result.trace);
  j["params"]["values"] = std::vector<double>(o.result.params.values().begin(),
                                              o.result.params.values().end());
  return j.dump();
}

std::vector<ExperimentConfig> parse_all(const std::vector<std::string>& texts,
                                        std::optional<std::uint64_t> seed) {
  std::vector<ExperimentConfig> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(with_seed(parse_config(texts[i], "config" + std::to_string(i)), seed));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "BL-JUST bilevel training core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("config_json", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); },
        py::arg("text"));
  m.def("run_json", &run_json, py::arg("text"), py::arg("seed") = py::none(),
        py::call_guard<py::gil_scoped_release>());
  m.def("compare_json",
        [](const std::vector<std::string>& texts, int seeds, int jobs,
           std::optional<std::uint64_t> seed) {
          return cells_json(run_compare(parse_all(texts, seed), seeds, jobs)).dump();
        },
        py::arg("texts"), py::arg("seeds") = 1, py::arg("jobs") = 1, py::arg("seed") = py::none(),
        py::call_guard<py::gil_scoped_release>());
  m.def("ablate_json",
        [](const std::string& text, int seeds, int jobs, std::optional<std::uint64_t> seed) {
          return cells_json(run_ablate(with_seed(parse_config(text), seed), seeds, jobs)).dump();
        },
        py::arg("text"), py::arg("seeds") = 1, py::arg("jobs") = 1, py::arg("seed") = py::none(),
        py::call_guard<py::gil_scoped_release>());
  m.def("verify_json", [](const std::string& suite) { return to_json(run_verify_suite(suite)).dump(); },
        py::arg("suite") = "all", py::call_guard<py::gil_scoped_release>());
  m.def("generate_json",
        [](const std::string& text, std::optional<std::uint64_t> seed) {
          ExperimentConfig c = parse_config(text);
          Dataset d = make_dataset(c, seed);
          auto rows = [](const Matrix& x) {
            std::vector<std::vector<double>> out(x.rows);
            for (std::size_t i = 0; i < x.rows; ++i) {
              auto r = x.row(i);
              out[i].assign(r.begin(), r.end());
            }
            return out;
          };
          nlohmann::json j = {{"labeled_x", rows(d.labeled_x)},
                              {"labeled_y", d.labeled_y},
                              {"unlabeled_x", rows(d.unlabeled_x)},
                              {"unlabeled_truth", d.unlabeled_truth}};
          return j.dump();
        },
        py::arg("text"), py::arg("seed") = py::none());

  m.def("penalty_at",
        [](double gamma_max, int epochs, int k, bool ramp_to_max) {
          return penalty_at(PenaltySchedule::linear(gamma_max, epochs, ramp_to_max), k);
        },
        py::arg("gamma_max"), py::arg("epochs"), py::arg("k"), py::arg("ramp_to_max") = false);
  m.def("quad_penalized_argmin",
        [](double a, double b, double c, double d, double gamma) {
          return quad_penalized_argmin(QuadraticBilevel{a, b, c, d}, gamma);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("gamma"));
  m.def("derive_seed", [](std::uint64_t seed, const std::string& tag) { return derive_seed(seed, tag); },
        py::arg("seed"), py::arg("tag"));
  m.def("splitmix64", [](std::uint64_t seed, int n) {
    Rng rng(seed);
    std::vector<std::uint64_t> out;
    for (int i = 0; i < n; ++i) out.push_back(rng.next_u64());
    return out;
  }, py::arg("seed"), py::arg("n"));
}
