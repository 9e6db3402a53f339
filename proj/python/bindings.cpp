#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparseqc/errors.hpp"
#include "sparseqc/experiments.hpp"
#include "sparseqc/io.hpp"

namespace py = pybind11;
using namespace sparseqc;

namespace {

// Configs cross the boundary as JSON text; the Python side wraps json.loads/dumps.
ScenarioConfig parse_config(const std::string& text) { return config_from_json(nlohmann::json::parse(text)); }

py::dict breakdown_dict(const ObjectiveBreakdown& b) {
  py::dict d;
  d["total"] = b.total;
  d["terminal_term"] = b.terminal_term;
  d["cost_term"] = b.cost_term;
  d["alpha"] = b.alpha;
  d["achievement"] = b.achievement;
  return d;
}

py::dict report_dict(const OptimalityReport& r) {
  py::dict d;
  d["alpha"] = r.alpha;
  d["theta"] = r.theta;
  d["max_dual"] = r.max_dual;
  d["dual_norms"] = r.dual_norms;
  d["atom_norms"] = r.atom_norms;
  d["support"] = r.support;
  d["max_alignment"] = r.max_alignment;
  d["complementarity_gap"] = r.complementarity_gap;
  d["support_violations"] = r.support_violations;
  d["bound_violations"] = r.bound_violations;
  d["kkt_ok"] = r.dual_bound_ok() && r.alignment_ok() && r.relaxed_support_ok();
  return d;
}

// A built problem plus the config it came from.
class Scenario {
 public:
  explicit Scenario(const std::string& config_json) : cfg_(parse_config(config_json)), p_(build_problem(cfg_)) {}

  std::string config() const { return to_json(cfg_).dump(); }
  py::tuple shape() const { return py::make_tuple(p_.space().n_nodes(), p_.op->grid().size()); }
  std::vector<double> omegas() const {
    std::vector<double> w;
    for (Eigen::Index k = 0; k < p_.op->grid().size(); ++k) w.push_back(p_.op->grid().omega(k));
    return w;
  }
  Eigen::VectorXd times() const { return p_.grid().midpoints(); }
  Eigen::Index real_dof() const { return p_.op->real_dof(); }

  Eigen::MatrixXcd initial(std::uint64_t seed) const {
    return initial_control(p_, base_envelope(cfg_, p_.space()), seed).atoms;
  }
  Eigen::VectorXd synthesize(const Eigen::MatrixXcd& atoms) const { return p_.op->synthesize(measure(atoms)).values.col(0); }
  Eigen::MatrixXcd adjoint(const Eigen::VectorXd& field) const {
    if (field.size() != p_.grid().n_steps()) throw InputError("field: expected one value per time step");
    return p_.op->adjoint_synthesize(SampledField(Eigen::MatrixXd(field))).atoms;
  }
  py::dict evaluate(const Eigen::MatrixXcd& atoms) const { return breakdown_dict(sparseqc::evaluate(p_, measure(atoms)).breakdown); }
  py::tuple value_and_gradient(const Eigen::MatrixXcd& atoms) const {
    GradientResult g;
    {
      py::gil_scoped_release release;
      g = evaluate_with_gradient(p_, measure(atoms));
    }
    return py::make_tuple(breakdown_dict(g.breakdown), g.gradient.atoms);
  }
  double inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) const {
    return measure_inner(measure(a), measure(b), p_.space());
  }
  Eigen::VectorXd atom_norms(const Eigen::MatrixXcd& atoms) const { return sparseqc::atom_norms(measure(atoms), p_.space()); }
  py::dict report(const Eigen::MatrixXcd& atoms) const { return report_dict(optimality_report(p_, measure(atoms))); }
  Eigen::MatrixXcd trajectory(const Eigen::MatrixXcd& atoms) const {
    const SampledField f = p_.op->synthesize(measure(atoms));
    return propagate(*p_.model.system, f, p_.model.psi0, p_.grid()).states;
  }

  py::dict minimize(const Eigen::MatrixXcd& atoms0) const {
    RunResult r;
    {
      py::gil_scoped_release release;
      r = sparseqc::minimize(p_, measure(atoms0), cfg_.optimizer);
    }
    return run_dict(r);
  }

  static py::dict run_dict(const RunResult& r) {
    py::dict d;
    d["atoms"] = r.control.atoms;
    d["breakdown"] = breakdown_dict(r.breakdown);
    d["report"] = report_dict(r.report);
    d["termination"] = to_string(r.termination);
    d["iterations"] = r.log.empty() ? 0 : r.log.back().iter;
    d["evaluations"] = r.evaluations;
    d["support_size"] = r.support_size;
    d["seed"] = r.seed;
    d["wall_seconds"] = r.wall_seconds;
    std::vector<double> obj;
    for (const auto& it : r.log) obj.push_back(it.objective);
    d["objective_history"] = obj;
    return d;
  }

 private:
  ControlMeasure measure(const Eigen::MatrixXcd& atoms) const {
    ControlMeasure u{p_.op->grid(), atoms};
    if (atoms.rows() != p_.space().n_nodes() || atoms.cols() != p_.op->grid().size())
      throw InputError("atoms: expected shape (" + std::to_string(p_.space().n_nodes()) + ", " +
                       std::to_string(p_.op->grid().size()) + ")");
    return u;
  }

  ScenarioConfig cfg_;
  Problem p_;
};

py::dict run(const std::string& config_json, bool write_artifacts, int jobs) {
  const ScenarioConfig cfg = parse_config(config_json);
  ScenarioOutcome o;
  {
    py::gil_scoped_release release;
    o = run_scenario(cfg, jobs, write_artifacts);
  }
  py::dict d = Scenario::run_dict(o.run);
  d["band_mass"] = o.metrics.band_mass;
  d["low_frequency_fraction"] = o.metrics.low_frequency_fraction;
  std::vector<std::string> files;
  for (const auto& f : o.files) files.push_back(f.string());
  d["files"] = files;
  return d;
}

py::list sweep(const std::string& config_json, const std::vector<double>& alphas, bool write_artifacts) {
  const ScenarioConfig cfg = parse_config(config_json);
  std::vector<SweepStage> stages;
  {
    py::gil_scoped_release release;
    stages = run_sweep(cfg, alphas, write_artifacts);
  }
  py::list out;
  for (const auto& s : stages) {
    py::dict d = Scenario::run_dict(s.result);
    d["alpha"] = s.alpha;
    d["warm_started"] = s.warm_started;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse time-frequency quantum optimal control (C++ core)";
  io::tune_allocator();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("reference_names", [] {
    std::vector<std::string> names;
    for (const auto& c : reference_configs()) names.push_back(c.name);
    return names;
  });
  m.def("reference_config_json", [](const std::string& name) { return to_json(reference_config(name)).dump(); });
  m.def("reduce_config_json", [](const std::string& text) { return to_json(reduce(parse_config(text))).dump(); });
  m.def("validate_config_json", [](const std::string& text) { parse_config(text).validate(); });
  m.def("real_dof", [](const std::string& text) { return real_dof(parse_config(text)); });

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def("config_json", &Scenario::config)
      .def_property_readonly("shape", &Scenario::shape)
      .def_property_readonly("omegas", &Scenario::omegas)
      .def_property_readonly("times", &Scenario::times)
      .def_property_readonly("real_dof", &Scenario::real_dof)
      .def("initial", &Scenario::initial, py::arg("seed") = 0)
      .def("synthesize", &Scenario::synthesize, py::arg("atoms"))
      .def("adjoint", &Scenario::adjoint, py::arg("field"))
      .def("evaluate", &Scenario::evaluate, py::arg("atoms"))
      .def("value_and_gradient", &Scenario::value_and_gradient, py::arg("atoms"))
      .def("inner", &Scenario::inner, py::arg("a"), py::arg("b"))
      .def("atom_norms", &Scenario::atom_norms, py::arg("atoms"))
      .def("report", &Scenario::report, py::arg("atoms"))
      .def("trajectory", &Scenario::trajectory, py::arg("atoms"))
      .def("minimize", &Scenario::minimize, py::arg("atoms0"));

  m.def("run", &run, py::arg("config_json"), py::arg("write_artifacts") = false, py::arg("jobs") = 1);
  m.def("sweep", &sweep, py::arg("config_json"), py::arg("alphas"), py::arg("write_artifacts") = false);
  m.def(
      "gradient_check",
      [](int directions, std::uint64_t seed) {
        py::list out;
        for (const auto& e : gradient_check_matrix(directions, seed, true)) {
          py::dict d;
          d["model"] = e.model;
          d["kind"] = to_string(e.kind);
          d["max_rel_error"] = e.max_rel_error;
          d["seconds"] = e.seconds;
          out.append(d);
        }
        return out;
      },
      py::arg("directions") = 2, py::arg("seed") = 0);
}
