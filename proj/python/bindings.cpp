// Python access to the planning engine. Structured values cross the boundary
// as JSON text; the pure-Python package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prospector/gp.hpp"
#include "prospector/harness.hpp"
#include "prospector/serialize.hpp"
#include "prospector/service.hpp"

namespace py = pybind11;
using namespace prospector;

namespace {

gp::MaternOrder parse_order(const std::string& s) {
  if (s == "1/2") return gp::MaternOrder::Half;
  if (s == "3/2") return gp::MaternOrder::ThreeHalves;
  if (s == "5/2") return gp::MaternOrder::FiveHalves;
  throw std::invalid_argument("order must be one of 1/2, 3/2, 5/2");
}

gp::KernelParams kernel(double marginal_std, double correlation_length, const std::string& order) {
  gp::KernelParams k;
  k.marginal_std = marginal_std;
  k.correlation_length = correlation_length;
  k.order = parse_order(order);
  return k;
}

std::vector<gp::Point> points(const std::vector<std::pair<double, double>>& xy) {
  std::vector<gp::Point> out;
  out.reserve(xy.size());
  for (const auto& [x, y] : xy) out.push_back({x, y});
  return out;
}

// Sessions held by Python own their lifetime; no store, no files.
class PySession {
 public:
  PySession(const std::string& config, const std::string& id)
      : s_(std::make_unique<service::Session>(id, service::config_from_json(Json::parse(config)))) {}
  static PySession replay(const std::vector<std::string>& events, const std::string& id) {
    std::vector<Json> ev;
    for (const auto& e : events) ev.push_back(Json::parse(e));
    return PySession(service::Session::replay(id, ev));
  }
  std::string add_observation(const std::string& obs) {
    py::gil_scoped_release nogil;
    return s_->add_observation(Json::parse(obs)).dump();
  }
  std::string recommendation() {
    py::gil_scoped_release nogil;
    return s_->recommendation().dump();
  }
  std::string record_decision(const std::string& d) { return s_->record_decision(d).dump(); }
  std::string summary() const { return s_->summary().dump(); }
  std::string belief() const { return s_->belief_summary().dump(); }
  std::string falsification() const { return s_->falsification().dump(); }
  std::vector<std::string> events() const {
    std::vector<std::string> out;
    for (const auto& e : s_->events()) out.push_back(e.dump());
    return out;
  }
  bool terminal() const { return s_->terminal(); }

 private:
  explicit PySession(std::unique_ptr<service::Session> s) : s_(std::move(s)) {}

  std::unique_ptr<service::Session> s_;
};

std::string run_experiment(const std::string& kind, int trials, std::uint64_t seed, const std::string& trial_config,
                           const std::string& out_dir) {
  harness::ExperimentConfig cfg;
  Json::parse(trial_config).get_to(cfg.trial);
  cfg.n_trials = trials;
  cfg.seed = seed;
  harness::ExperimentReport rep;
  {
    py::gil_scoped_release nogil;
    if (kind == "aleatoric")
      rep = harness::experiment_aleatoric(cfg);
    else if (kind == "falsify")
      rep = harness::experiment_falsification(cfg);
    else
      throw std::invalid_argument("kind must be 'aleatoric' or 'falsify'");
  }
  if (!out_dir.empty()) harness::emit_report(rep, out_dir);
  Json summary = Json::array();
  for (const auto& s : rep.summary)
    summary.push_back(Json{{"policy", harness::to_string(s.policy)},
                           {"trials", s.trials},
                           {"accuracy", s.accuracy},
                           {"accuracy_std", s.accuracy_std},
                           {"holes", s.holes},
                           {"holes_std", s.holes_std}});
  Json fals = Json::array();
  for (const auto& f : rep.falsification)
    fals.push_back(Json{{"policy", harness::to_string(f.policy)},
                        {"holes_to_falsify", f.holes_to_falsify},
                        {"holes_to_falsify_std", f.holes_to_falsify_std},
                        {"failed_fraction", f.failed_fraction}});
  return Json{{"kind", rep.kind}, {"summary", summary}, {"falsification", fals}}.dump();
}

}  // namespace

PYBIND11_MODULE(_prospector, m) {
  m.doc() = "Sequential drill planning under multiple geological hypotheses";

  py::register_exception<service::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<service::Conflict>(m, "Conflict", PyExc_RuntimeError);
  py::register_exception<service::NotFound>(m, "NotFound", PyExc_KeyError);

  m.def(
      "matern_cov",
      [](double d, double marginal_std, double correlation_length, const std::string& order) {
        return gp::matern_cov(d, kernel(marginal_std, correlation_length, order));
      },
      py::arg("d"), py::arg("marginal_std") = 0.1, py::arg("correlation_length") = 3.0, py::arg("order") = "3/2");

  m.def(
      "krige_predict",
      [](const std::vector<std::pair<double, double>>& locations, const std::vector<double>& values,
         const std::vector<std::pair<double, double>>& query, double mean, double noise_std, double marginal_std,
         double correlation_length, const std::string& order) {
        gp::ObservationSet obs{points(locations), values, noise_std};
        const auto q = points(query);
        const auto p = gp::krige_predict(obs, q, [mean](const gp::Point&) { return mean; },
                                         kernel(marginal_std, correlation_length, order));
        return std::make_pair(p.mean, p.variance);
      },
      py::arg("locations"), py::arg("values"), py::arg("query"), py::arg("mean") = 0.0, py::arg("noise_std") = 0.001,
      py::arg("marginal_std") = 0.1, py::arg("correlation_length") = 3.0, py::arg("order") = "3/2",
      "Kriging mean and variance at query points under a constant prior mean.");

  m.def(
      "log_marginal",
      [](const std::vector<std::pair<double, double>>& locations, const std::vector<double>& values, double mean,
         double noise_std, double marginal_std, double correlation_length, const std::string& order) {
        gp::ObservationSet obs{points(locations), values, noise_std};
        return gp::log_marginal(obs, [mean](const gp::Point&) { return mean; },
                                kernel(marginal_std, correlation_length, order));
      },
      py::arg("locations"), py::arg("values"), py::arg("mean") = 0.0, py::arg("noise_std") = 0.001,
      py::arg("marginal_std") = 0.1, py::arg("correlation_length") = 3.0, py::arg("order") = "3/2");

  m.def("validate_config", [](const std::string& config) {
    return service::to_json(service::config_from_json(Json::parse(config))).dump();
  });

  py::class_<PySession>(m, "Session")
      .def(py::init<const std::string&, const std::string&>(), py::arg("config") = "{}", py::arg("id") = "py")
      .def_static("replay", &PySession::replay, py::arg("events"), py::arg("id") = "py")
      .def("add_observation", &PySession::add_observation)
      .def("recommendation", &PySession::recommendation)
      .def("record_decision", &PySession::record_decision)
      .def("summary", &PySession::summary)
      .def("belief", &PySession::belief)
      .def("falsification", &PySession::falsification)
      .def("events", &PySession::events)
      .def_property_readonly("terminal", &PySession::terminal);

  m.def("run_experiment", &run_experiment, py::arg("kind"), py::arg("trials"), py::arg("seed") = 1,
        py::arg("trial_config") = "{}", py::arg("out_dir") = "");
}
