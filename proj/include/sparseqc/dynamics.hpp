#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "sparseqc/quantum_system.hpp"
#include "sparseqc/time_grid.hpp"

namespace sparseqc {

/// Real field samples at the step midpoints t_{j+1/2}: one row per step, one
/// column per coupling operator.
struct SampledField {
  Eigen::MatrixXd values;

  SampledField() = default;
  explicit SampledField(Eigen::MatrixXd v) : values(std::move(v)) {}
  static SampledField zeros(Eigen::Index n_steps, int components) {
    return SampledField(Eigen::MatrixXd::Zero(n_steps, components));
  }

  Eigen::Index n_steps() const { return values.rows(); }
  int components() const { return static_cast<int>(values.cols()); }
};

/// States at every time node, one column per node.
struct StateTrajectory {
  Eigen::MatrixXcd states;

  Eigen::Index n_nodes() const { return states.cols(); }
  Eigen::VectorXcd at(Eigen::Index j) const { return states.col(j); }
  Eigen::VectorXcd back() const { return states.col(states.cols() - 1); }
};

/// Normalized copy of `psi`; throws InputError for the zero vector.
Eigen::VectorXcd normalized_state(const Eigen::VectorXcd& psi);

/// One Strang step  exp(-iH0 dt/2) exp(-i dt Σ v_l H_l) exp(-iH0 dt/2).
void strang_step(const QuantumSystem& system, std::span<const double> v, double dt, Eigen::VectorXcd& psi);

/// Exact adjoint (inverse) of strang_step with the same v and dt.
void strang_step_adjoint(const QuantumSystem& system, std::span<const double> v, double dt,
                         Eigen::VectorXcd& psi);

/// Forward propagation from a unit-norm psi0 over the grid.
StateTrajectory propagate(const QuantumSystem& system, const SampledField& field, const Eigen::VectorXcd& psi0,
                          const TimeGrid& grid);

/// Backward sweep from phi_T applying the adjoint of each forward step.
StateTrajectory propagate_adjoint(const QuantumSystem& system, const SampledField& field,
                                  const Eigen::VectorXcd& phi_T, const TimeGrid& grid);

/// g_l(t_j) = Re<phi(t_j), -i H_l psi(t_j)> at every node (rows = nodes).
Eigen::MatrixXd coupling_pairing(const QuantumSystem& system, const StateTrajectory& psi,
                                 const StateTrajectory& phi);

/// Result of the gradient sweep used by the objective.
struct SensitivitySweep {
  Eigen::VectorXcd psi_T;
  Eigen::VectorXcd phi_0;
  /// d/dv_{j,l} of Re<phi_T, psi_T> with phi_T held fixed, divided by dt: the
  /// midpoint pairing density.  Rows = steps, columns = couplings.
  Eigen::MatrixXd pairing;
};

/// Terminal state only (no trajectory storage beyond one vector).
Eigen::VectorXcd propagate_terminal(const QuantumSystem& system, const SampledField& field,
                                    const Eigen::VectorXcd& psi0, const TimeGrid& grid);

/// Forward sweep storing the post-coupling midpoint states, followed by the
/// exactly adjoint backward sweep from phi_T = make_terminal(psi_T).
/// Consecutive half drift steps are merged.
template <typename TerminalFn>
SensitivitySweep sensitivity_sweep(const QuantumSystem& system, const SampledField& field,
                                   const Eigen::VectorXcd& psi0, const TimeGrid& grid, TerminalFn&& make_terminal);

void check_field(const QuantumSystem& system, const SampledField& field, const TimeGrid& grid);

/// CSV: time, then Re/Im of every amplitude.  Written atomically.
void write_trajectory_csv(const std::filesystem::path& path, const StateTrajectory& trajectory,
                          const TimeGrid& grid);

// ---------------------------------------------------------------------------

namespace detail {
Eigen::MatrixXcd forward_midpoints(const QuantumSystem& system, const SampledField& field,
                                   const Eigen::VectorXcd& psi0, const TimeGrid& grid, Eigen::VectorXcd& psi_T);
void backward_sensitivities(const QuantumSystem& system, const SampledField& field, const Eigen::MatrixXcd& mids,
                            const Eigen::VectorXcd& phi_T, const TimeGrid& grid, SensitivitySweep& out);
}  // namespace detail

template <typename TerminalFn>
SensitivitySweep sensitivity_sweep(const QuantumSystem& system, const SampledField& field,
                                   const Eigen::VectorXcd& psi0, const TimeGrid& grid, TerminalFn&& make_terminal) {
  SensitivitySweep out;
  const Eigen::MatrixXcd mids = detail::forward_midpoints(system, field, psi0, grid, out.psi_T);
  const Eigen::VectorXcd phi_T = make_terminal(out.psi_T);
  detail::backward_sensitivities(system, field, mids, phi_T, grid, out);
  return out;
}

}  // namespace sparseqc
