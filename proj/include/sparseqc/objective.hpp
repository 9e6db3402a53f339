#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sparseqc/control.hpp"
#include "sparseqc/dynamics.hpp"
#include "sparseqc/models.hpp"
#include "sparseqc/synthesis.hpp"

namespace sparseqc {

enum class CostKind {
  measure_huber,  ///< α Σ_ω h(u_ω)
  squared_norm,   ///< α Σ_ω ||u_ω||_U^2  (L2 / H1_0 field baselines)
};

/// Reduced problem  j(u) = ½<ψ(T), O ψ(T)> + α cost(u)  with ψ driven by Bu.
struct Problem {
  Model model;
  std::shared_ptr<const SynthesisOperator> op;
  double alpha = 0.1;
  HuberParams huber;
  CostKind cost = CostKind::measure_huber;

  const TimeGrid& grid() const { return op->time_grid(); }
  const EnvelopeSpace& space() const { return op->space(); }
  /// Throws ConfigError for inconsistent pieces.
  void validate() const;
};

struct ObjectiveBreakdown {
  double total = 0.0;
  double terminal_term = 0.0;
  double cost_term = 0.0;
  double alpha = 0.0;
  /// 1 - 2 terminal_term; the target probability for projector observables.
  double achievement = 0.0;
};

struct AdjointCache {
  SampledField field;
  Eigen::VectorXcd psi_T;
  Eigen::VectorXcd phi_T;
  /// Midpoint pairing density (rows = steps), the exact discrete derivative of
  /// the terminal term with respect to the field divided by dt.
  Eigen::MatrixXd pairing;
  std::optional<StateTrajectory> psi;
  std::optional<StateTrajectory> phi;
};

struct Evaluation {
  ObjectiveBreakdown breakdown;
  std::optional<AdjointCache> cache;
};

/// Cost breakdown; with `with_cache` also runs the adjoint sweep, and with
/// `with_trajectories` stores full node trajectories ψ and φ.
Evaluation evaluate(const Problem& problem, const ControlMeasure& u, bool with_cache = false,
                    bool with_trajectories = false);

struct GradientResult {
  ObjectiveBreakdown breakdown;
  /// Riesz representative of ∇j in the atom-wise U geometry.
  ControlMeasure gradient;
  /// B* applied to the pairing: the smooth part of the gradient.
  ControlMeasure dual;
  AdjointCache cache;
};

GradientResult evaluate_with_gradient(const Problem& problem, const ControlMeasure& u);

ControlMeasure gradient(const Problem& problem, const ControlMeasure& u);

/// Σ_ω <g_ω, d_ω>_U.
double directional_derivative(const ControlMeasure& grad, const ControlMeasure& direction, const EnvelopeSpace& space);

struct OptimalityReport {
  double alpha = 0.0;
  double theta = 0.0;
  double tol = 0.0;
  std::vector<double> omegas;
  std::vector<double> centers;
  /// d(ω) = ||(B* g)(ω)||_U
  Eigen::VectorXd dual_norms;
  Eigen::VectorXd atom_norms;
  double max_dual = 0.0;
  std::vector<Eigen::Index> support;
  /// ||α u_ω/||u_ω|| + (B* g)(ω)||_U for each support atom (same order).
  std::vector<double> alignment;
  double max_alignment = 0.0;
  /// |α Σ_supp ||u_ω|| + Σ_ω <(B*g)_ω, u_ω>_U|
  double complementarity_gap = 0.0;
  double measure_norm = 0.0;
  /// Atoms with d(ω) > α (1 + tol).
  std::vector<Eigen::Index> bound_violations;
  /// Atoms with d(ω) < α (1 - tol) but ||u_ω|| > θ.
  std::vector<Eigen::Index> support_violations;

  bool dual_bound_ok() const { return bound_violations.empty(); }
  bool relaxed_support_ok() const { return support_violations.empty(); }
  bool alignment_ok() const { return max_alignment <= tol * alpha; }
  bool complementarity_ok() const { return complementarity_gap <= tol * alpha * measure_norm + 1e-15; }
};

OptimalityReport optimality_report(const Problem& problem, const ControlMeasure& u, double tol = 0.05);

void write_optimality_json(const std::filesystem::path& path, const OptimalityReport& report);

struct FdResult {
  std::vector<double> steps;
  std::vector<double> derivatives;
  /// (4 D(h/2) - D(h)) / 3 using the first two steps.
  double richardson = 0.0;
  /// |D(h/2) - D(h)| relative to max(|D|, floor): the Richardson consistency check.
  double spread = 0.0;
};

/// Central differences (j(u+hδ) - j(u-hδ)) / (2h) for each h in `steps`.
FdResult fd_gradient_oracle(const std::function<double(const ControlMeasure&)>& j, const ControlMeasure& u,
                            const ControlMeasure& direction, const std::vector<double>& steps);

}  // namespace sparseqc
