#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gumbelcf/categorical.hpp"
#include "gumbelcf/discrete_scm.hpp"
#include "gumbelcf/gumbel.hpp"
#include "gumbelcf/io.hpp"
#include "gumbelcf/pipeline.hpp"
#include "gumbelcf/service.hpp"

namespace py = pybind11;
using namespace gumbelcf;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ExperimentConfig make_config(const py::object& overrides) {
  ExperimentConfig c;
  if (!overrides.is_none()) c.merge_json(from_python(overrides));
  c.validate();
  return c;
}

PosteriorMethod method_from_name(const std::string& name) {
  if (name == "topdown") return PosteriorMethod::TopDown;
  if (name == "rejection") return PosteriorMethod::Rejection;
  throw py::value_error("method must be 'topdown' or 'rejection'");
}

std::vector<std::uint64_t> counterfactual_counts(const std::vector<double>& p_obs,
                                                 const std::vector<double>& p_cf,
                                                 std::size_t observed, std::uint64_t n,
                                                 std::uint64_t seed, const std::string& method) {
  const CounterfactualQuery q(CategoricalParams(p_obs), CategoricalParams(p_cf), observed);
  const PosteriorMethod m = method_from_name(method);
  Rng rng(seed);
  std::vector<std::uint64_t> counts(p_cf.size(), 0);
  {
    py::gil_scoped_release release;
    for (std::uint64_t i = 0; i < n; ++i) ++counts[counterfactual_step(q, rng, m)];
  }
  return counts;
}

std::vector<std::vector<double>> posterior_noise(const std::vector<double>& p_obs,
                                                 std::size_t observed, std::uint64_t n,
                                                 std::uint64_t seed, const std::string& method) {
  const CategoricalParams p(p_obs);
  const CounterfactualQuery q(p, p, observed);
  const PosteriorMethod m = method_from_name(method);
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(posterior_sample(q, rng, m).values);
  return out;
}

py::dict run_pipeline(const py::object& overrides) {
  const ExperimentConfig config = make_config(overrides);
  EvaluationResult result;
  {
    py::gil_scoped_release release;
    const PolicyTable behavior = build_behavior_policy(config);
    const auto train = simulate_observed(config, behavior, config.n_train_episodes, "train");
    const LearnedModel model = learn_model(config, train);
    result = evaluate(config, train, model, behavior);
  }
  py::dict out;
  out["summary"] = to_python(result.summary_json(config));
  out["decomposition"] = to_python(result.decomposition.to_json());
  return out;
}

py::list simulate_episodes(const py::object& overrides, std::size_t n) {
  const ExperimentConfig config = make_config(overrides);
  const PolicyTable behavior = build_behavior_policy(config);
  const auto episodes =
      simulate_observed(config, behavior, n == 0 ? config.n_train_episodes : n, "train");
  py::list out;
  for (const auto& t : episodes) out.append(to_python(to_json(t)));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gumbel-Max counterfactual inference and off-policy evaluation";

  py::register_exception<SamplingFailure>(m, "SamplingFailure", PyExc_RuntimeError);
  py::register_exception<ObservationImpossible>(m, "ObservationImpossible", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ServiceError>(m, "ServiceError", PyExc_RuntimeError);

  m.def("gumbel_from_uniform", &gumbel_from_uniform, py::arg("u"));
  m.def(
      "gumbel_argmax",
      [](const std::vector<double>& probs, const std::vector<double>& noise) {
        return gumbel_argmax(probs, noise);
      },
      py::arg("probs"), py::arg("noise"));
  m.def(
      "sample_gumbel",
      [](std::size_t k, std::uint64_t seed) {
        Rng rng(seed);
        return sample_gumbel_noise(k, rng).values;
      },
      py::arg("k"), py::arg("seed"));
  m.def(
      "truncated_gumbel",
      [](double location, double bound, std::uint64_t seed) {
        Rng rng(seed);
        return truncated_gumbel(location, bound, rng);
      },
      py::arg("location"), py::arg("bound"), py::arg("seed"));
  m.def("posterior_noise", &posterior_noise, py::arg("p_obs"), py::arg("observed"), py::arg("n"),
        py::arg("seed"), py::arg("method") = "topdown",
        "Posterior Gumbel noise vectors given that `observed` was drawn from p_obs.");
  m.def("counterfactual_counts", &counterfactual_counts, py::arg("p_obs"), py::arg("p_cf"),
        py::arg("observed"), py::arg("n"), py::arg("seed"), py::arg("method") = "topdown",
        "Histogram of n counterfactual outcomes under p_cf.");
  m.def(
      "counterfactual_distribution_ordered",
      [](const std::vector<double>& p, const std::vector<double>& p_cf, std::size_t observed,
         const std::vector<std::size_t>& order) {
        const OrderedInverseCdfScm scm(order);
        return scm.counterfactual_distribution(CategoricalParams(p), CategoricalParams(p_cf),
                                               observed);
      },
      py::arg("p"), py::arg("p_cf"), py::arg("observed"), py::arg("order"));
  m.def(
      "stability_admissible",
      [](const std::vector<double>& p, const std::vector<double>& p_cf, std::size_t i,
         std::size_t j) {
        return stability_admissible(CategoricalParams(p), CategoricalParams(p_cf), i, j);
      },
      py::arg("p"), py::arg("p_cf"), py::arg("i"), py::arg("j"));
  m.def(
      "monotonicity_check",
      [](double p_t1, double p_t0, std::uint64_t n, std::uint64_t seed) {
        Rng rng(seed);
        const auto r = monotonicity_check({p_t1, p_t0}, n, rng);
        py::dict d;
        d["n_samples"] = r.n_samples;
        d["forbidden"] = r.forbidden;
        d["joint"] = r.joint;
        return d;
      },
      py::arg("p_t1"), py::arg("p_t0"), py::arg("n"), py::arg("seed"));
  m.def(
      "nonid_demo",
      [](std::uint64_t samples, std::uint64_t seed) {
        Rng rng(seed);
        return to_python(nonid_demo(samples, rng).to_json());
      },
      py::arg("samples") = 100000, py::arg("seed") = 0);
  m.def("derive_seed", [](std::uint64_t seed, const std::string& label) {
    return derive_seed(seed, label);
  });

  m.def(
      "default_config", [] { return to_python(ExperimentConfig{}.to_json()); },
      "Experiment settings with their default values.");
  m.def("simulate", &simulate_episodes, py::arg("config") = py::none(), py::arg("n") = 0,
        "Observed episodes under the behavior policy, as JSON-like dicts.");
  m.def("run_pipeline", &run_pipeline, py::arg("config") = py::none(),
        "Simulate, learn and evaluate; returns the summary and the decomposition.");

  py::class_<ExplorerService>(m, "Explorer")
      .def(py::init([](const std::string& dir) { return ExplorerService::load(dir); }),
           py::arg("artifacts_dir"))
      .def("summary", [](const ExplorerService& s) { return to_python(s.summary().body); })
      .def("decomposition",
           [](const ExplorerService& s) { return to_python(s.decomposition().body); })
      .def(
          "trajectory_ids",
          [](const ExplorerService& s, std::optional<std::string> cell) {
            return to_python(s.trajectories(cell).body.at("ids"));
          },
          py::arg("cell") = py::none())
      .def("trajectory",
           [](const ExplorerService& s, const std::string& id) {
             const auto r = s.trajectory(id);
             if (r.status != 200) throw py::key_error(r.body.at("error").get<std::string>());
             return to_python(r.body);
           })
      .def("counterfactual", [](const ExplorerService& s, const py::object& request) {
        const auto r = s.counterfactual(from_python(request));
        if (r.status != 200) throw py::value_error(r.body.at("error").get<std::string>());
        return to_python(r.body);
      });
}
