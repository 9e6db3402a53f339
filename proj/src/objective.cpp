#include "sparseqc/objective.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

void Problem::validate() const {
  if (!model.system || !op) throw ConfigError("problem needs a system and an operator");
  if (model.system->n_couplings() != 1)
    throw ConfigError("synthesized fields drive a single coupling; the system has " +
                      std::to_string(model.system->n_couplings()));
  if (model.psi0.size() != model.system->dimension()) throw ConfigError("initial state dimension mismatch");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and nonnegative");
  if (cost == CostKind::measure_huber) huber.validate();
}

namespace {

double terminal_value(const Problem& p, const Eigen::VectorXcd& psi_T, Eigen::VectorXcd* phi_T) {
  Eigen::VectorXcd o = p.model.system->observable_apply(psi_T);
  const double value = 0.5 * psi_T.dot(o).real();
  if (phi_T) *phi_T = std::move(o);
  return value;
}

double cost_value(const Problem& p, const ControlMeasure& u) {
  if (p.cost == CostKind::squared_norm) {
    return p.alpha * measure_inner(u, u, p.space());
  }
  return p.alpha * huber_value(u, p.space(), p.huber);
}

ObjectiveBreakdown make_breakdown(const Problem& p, double terminal, double cost) {
  ObjectiveBreakdown b;
  b.terminal_term = terminal;
  b.cost_term = cost;
  b.total = terminal + cost;
  b.alpha = p.alpha;
  b.achievement = 1.0 - 2.0 * terminal;
  if (!std::isfinite(b.total)) throw NumericalError("objective is not finite");
  return b;
}

}  // namespace

Evaluation evaluate(const Problem& problem, const ControlMeasure& u, bool with_cache, bool with_trajectories) {
  problem.validate();
  const QuantumSystem& sys = *problem.model.system;
  SampledField field = problem.op->synthesize(u);
  Evaluation out;
  if (!with_cache && !with_trajectories) {
    const Eigen::VectorXcd psi_T = propagate_terminal(sys, field, problem.model.psi0, problem.grid());
    out.breakdown = make_breakdown(problem, terminal_value(problem, psi_T, nullptr), cost_value(problem, u));
    return out;
  }
  AdjointCache cache;
  const SensitivitySweep sweep =
      sensitivity_sweep(sys, field, problem.model.psi0, problem.grid(),
                        [&](const Eigen::VectorXcd& psi_T) { return sys.observable_apply(psi_T); });
  cache.psi_T = sweep.psi_T;
  const double terminal = terminal_value(problem, cache.psi_T, &cache.phi_T);
  cache.pairing = sweep.pairing;
  if (with_trajectories) {
    cache.psi = propagate(sys, field, problem.model.psi0, problem.grid());
    cache.phi = propagate_adjoint(sys, field, cache.phi_T, problem.grid());
  }
  cache.field = std::move(field);
  out.breakdown = make_breakdown(problem, terminal, cost_value(problem, u));
  out.cache = std::move(cache);
  return out;
}

GradientResult evaluate_with_gradient(const Problem& problem, const ControlMeasure& u) {
  Evaluation ev = evaluate(problem, u, true, false);
  GradientResult out;
  out.breakdown = ev.breakdown;
  out.cache = std::move(*ev.cache);
  out.dual = problem.op->adjoint_synthesize(SampledField(out.cache.pairing));
  out.gradient = out.dual;
  const Eigen::VectorXd norms =
      problem.cost == CostKind::measure_huber ? atom_norms(u, problem.space()) : Eigen::VectorXd();
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) {
    double scale = 2.0 * problem.alpha;
    if (problem.cost == CostKind::measure_huber) scale = problem.alpha * huber_scale(norms[k], problem.huber);
    out.gradient.atoms.col(k) += scale * u.atoms.col(k);
  }
  return out;
}

ControlMeasure gradient(const Problem& problem, const ControlMeasure& u) {
  return evaluate_with_gradient(problem, u).gradient;
}

double directional_derivative(const ControlMeasure& grad, const ControlMeasure& direction, const EnvelopeSpace& space) {
  return measure_inner(grad, direction, space);
}

OptimalityReport optimality_report(const Problem& problem, const ControlMeasure& u, double tol) {
  const GradientResult gr = evaluate_with_gradient(problem, u);
  const EnvelopeSpace& space = problem.space();
  OptimalityReport r;
  r.alpha = problem.alpha;
  r.theta = problem.huber.theta;
  r.tol = tol;
  r.dual_norms = atom_norms(gr.dual, space);
  r.atom_norms = atom_norms(u, space);
  r.max_dual = r.dual_norms.size() ? r.dual_norms.maxCoeff() : 0.0;
  r.measure_norm = r.atom_norms.sum();
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) {
    r.omegas.push_back(u.grid.omega(k));
    if (u.grid.is_tensor()) r.centers.push_back(u.grid.center(k));
  }
  const double paired = measure_inner(gr.dual, u, space);
  double supported_mass = 0.0;
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) {
    const double d = r.dual_norms[k];
    const double n = r.atom_norms[k];
    if (d > r.alpha * (1.0 + tol)) r.bound_violations.push_back(k);
    if (n > r.theta) {
      r.support.push_back(k);
      supported_mass += n;
      const Envelope resid = r.alpha * u.atoms.col(k) / n + gr.dual.atoms.col(k);
      r.alignment.push_back(space.norm(resid));
      r.max_alignment = std::max(r.max_alignment, r.alignment.back());
      if (d < r.alpha * (1.0 - tol)) r.support_violations.push_back(k);
    }
  }
  r.complementarity_gap = std::abs(r.alpha * supported_mass + paired);
  return r;
}

void write_optimality_json(const std::filesystem::path& path, const OptimalityReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["theta"] = r.theta;
  j["tol"] = r.tol;
  j["omega"] = r.omegas;
  if (!r.centers.empty()) j["t_center"] = r.centers;
  j["dual_norm"] = std::vector<double>(r.dual_norms.data(), r.dual_norms.data() + r.dual_norms.size());
  j["atom_norm"] = std::vector<double>(r.atom_norms.data(), r.atom_norms.data() + r.atom_norms.size());
  j["max_dual"] = r.max_dual;
  j["support"] = r.support;
  j["alignment"] = r.alignment;
  j["max_alignment"] = r.max_alignment;
  j["complementarity_gap"] = r.complementarity_gap;
  j["measure_norm"] = r.measure_norm;
  j["bound_violations"] = r.bound_violations;
  j["support_violations"] = r.support_violations;
  io::write_atomic(path, j.dump(2) + "\n");
}

FdResult fd_gradient_oracle(const std::function<double(const ControlMeasure&)>& j, const ControlMeasure& u,
                            const ControlMeasure& direction, const std::vector<double>& steps) {
  if (steps.empty()) throw ConfigError("fd_gradient_oracle needs at least one step");
  if (direction.atoms.rows() != u.atoms.rows() || direction.atoms.cols() != u.atoms.cols())
    throw ConfigError("fd_gradient_oracle: direction does not conform");
  FdResult r;
  ControlMeasure probe = u;
  for (double h : steps) {
    probe.atoms = u.atoms + h * direction.atoms;
    const double plus = j(probe);
    probe.atoms = u.atoms - h * direction.atoms;
    const double minus = j(probe);
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericalError("non-finite objective in FD oracle");
    r.steps.push_back(h);
    r.derivatives.push_back((plus - minus) / (2.0 * h));
  }
  if (r.derivatives.size() >= 2) {
    // Richardson for the pair (h0, h1) assuming h1 = h0 / 2.
    const double ratio = r.steps[0] / r.steps[1];
    const double p2 = ratio * ratio;
    r.richardson = (p2 * r.derivatives[1] - r.derivatives[0]) / (p2 - 1.0);
    const double scale = std::max({std::abs(r.derivatives[0]), std::abs(r.derivatives[1]), 1e-300});
    r.spread = std::abs(r.derivatives[1] - r.derivatives[0]) / scale;
  } else {
    r.richardson = r.derivatives.front();
  }
  return r;
}

}  // namespace sparseqc
