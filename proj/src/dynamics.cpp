#include "sparseqc/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

namespace {

void check_unit(const Eigen::VectorXcd& psi0) {
  if (!psi0.allFinite()) throw InputError("initial state has non-finite amplitudes");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw InputError("initial state is not normalized");
}

// Row j of the field copied into `buf`.
std::span<const double> row(const SampledField& field, Eigen::Index j, std::vector<double>& buf) {
  for (int l = 0; l < field.components(); ++l) buf[static_cast<std::size_t>(l)] = field.values(j, l);
  return buf;
}

}  // namespace

Eigen::VectorXcd normalized_state(const Eigen::VectorXcd& psi) {
  const double n = psi.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InputError("cannot normalize a zero or non-finite state");
  return psi / n;
}

void check_field(const QuantumSystem& system, const SampledField& field, const TimeGrid& grid) {
  if (field.n_steps() != grid.n_steps())
    throw ConfigError("field has " + std::to_string(field.n_steps()) + " samples but the grid has " +
                      std::to_string(grid.n_steps()) + " steps");
  if (field.components() != system.n_couplings())
    throw ConfigError("field has " + std::to_string(field.components()) + " components but the system has " +
                      std::to_string(system.n_couplings()) + " couplings");
  if (!field.values.allFinite()) throw InputError("field contains non-finite values");
}

void strang_step(const QuantumSystem& system, std::span<const double> v, double dt, Eigen::VectorXcd& psi) {
  system.drift_step(0.5 * dt, psi);
  system.coupling_step(v, dt, psi);
  system.drift_step(0.5 * dt, psi);
}

void strang_step_adjoint(const QuantumSystem& system, std::span<const double> v, double dt,
                         Eigen::VectorXcd& psi) {
  system.drift_step(-0.5 * dt, psi);
  system.coupling_step(v, -dt, psi);
  system.drift_step(-0.5 * dt, psi);
}

StateTrajectory propagate(const QuantumSystem& system, const SampledField& field, const Eigen::VectorXcd& psi0,
                          const TimeGrid& grid) {
  check_field(system, field, grid);
  if (psi0.size() != system.dimension()) throw ConfigError("initial state dimension mismatch");
  check_unit(psi0);

  const double dt = grid.step();
  std::vector<double> buf(static_cast<std::size_t>(field.components()));
  StateTrajectory out;
  out.states.resize(system.dimension(), grid.n_nodes());
  Eigen::VectorXcd psi = psi0;
  out.states.col(0) = psi;
  for (Eigen::Index j = 0; j < grid.n_steps(); ++j) {
    strang_step(system, row(field, j, buf), dt, psi);
    out.states.col(j + 1) = psi;
  }
  return out;
}

StateTrajectory propagate_adjoint(const QuantumSystem& system, const SampledField& field,
                                  const Eigen::VectorXcd& phi_T, const TimeGrid& grid) {
  check_field(system, field, grid);
  if (phi_T.size() != system.dimension()) throw ConfigError("terminal adjoint dimension mismatch");
  if (!phi_T.allFinite()) throw InputError("terminal adjoint has non-finite amplitudes");

  const double dt = grid.step();
  std::vector<double> buf(static_cast<std::size_t>(field.components()));
  StateTrajectory out;
  out.states.resize(system.dimension(), grid.n_nodes());
  Eigen::VectorXcd phi = phi_T;
  out.states.col(grid.n_steps()) = phi;
  for (Eigen::Index j = grid.n_steps() - 1; j >= 0; --j) {
    strang_step_adjoint(system, row(field, j, buf), dt, phi);
    out.states.col(j) = phi;
  }
  return out;
}

Eigen::MatrixXd coupling_pairing(const QuantumSystem& system, const StateTrajectory& psi,
                                 const StateTrajectory& phi) {
  if (psi.states.rows() != phi.states.rows() || psi.n_nodes() != phi.n_nodes())
    throw ConfigError("coupling_pairing: trajectories are on different grids");
  if (psi.states.rows() != system.dimension()) throw ConfigError("coupling_pairing: dimension mismatch");
  Eigen::MatrixXd g(psi.n_nodes(), system.n_couplings());
  for (Eigen::Index j = 0; j < psi.n_nodes(); ++j) {
    const Eigen::VectorXcd p = psi.states.col(j);
    const Eigen::VectorXcd f = phi.states.col(j);
    for (int l = 0; l < system.n_couplings(); ++l) g(j, l) = f.dot(system.apply_coupling(l, p)).imag();
  }
  return g;
}

Eigen::VectorXcd propagate_terminal(const QuantumSystem& system, const SampledField& field,
                                    const Eigen::VectorXcd& psi0, const TimeGrid& grid) {
  check_field(system, field, grid);
  if (psi0.size() != system.dimension()) throw ConfigError("initial state dimension mismatch");
  check_unit(psi0);
  const double dt = grid.step();
  const Eigen::Index n = grid.n_steps();
  std::vector<double> buf(static_cast<std::size_t>(field.components()));
  Eigen::VectorXcd psi = psi0;
  system.drift_step(0.5 * dt, psi);
  for (Eigen::Index j = 0; j < n; ++j) {
    system.coupling_step(row(field, j, buf), dt, psi);
    system.drift_step(j + 1 < n ? dt : 0.5 * dt, psi);
  }
  return psi;
}

namespace detail {

Eigen::MatrixXcd forward_midpoints(const QuantumSystem& system, const SampledField& field,
                                   const Eigen::VectorXcd& psi0, const TimeGrid& grid, Eigen::VectorXcd& psi_T) {
  check_field(system, field, grid);
  if (psi0.size() != system.dimension()) throw ConfigError("initial state dimension mismatch");
  check_unit(psi0);
  const double dt = grid.step();
  const Eigen::Index n = grid.n_steps();
  std::vector<double> buf(static_cast<std::size_t>(field.components()));
  Eigen::MatrixXcd mids(system.dimension(), n);
  Eigen::VectorXcd psi = psi0;
  system.drift_step(0.5 * dt, psi);
  for (Eigen::Index j = 0; j < n; ++j) {
    system.coupling_step(row(field, j, buf), dt, psi);
    mids.col(j) = psi;
    system.drift_step(j + 1 < n ? dt : 0.5 * dt, psi);
  }
  psi_T = std::move(psi);
  return mids;
}

void backward_sensitivities(const QuantumSystem& system, const SampledField& field, const Eigen::MatrixXcd& mids,
                            const Eigen::VectorXcd& phi_T, const TimeGrid& grid, SensitivitySweep& out) {
  const double dt = grid.step();
  const Eigen::Index n = grid.n_steps();
  const int n_c = field.components();
  std::vector<double> buf(static_cast<std::size_t>(n_c));
  std::vector<double> sens(static_cast<std::size_t>(n_c));
  out.pairing.resize(n, n_c);

  Eigen::VectorXcd chi = phi_T;
  system.drift_step(-0.5 * dt, chi);
  Eigen::VectorXcd after(system.dimension());
  Eigen::VectorXcd xi(system.dimension());
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const auto v = row(field, j, buf);
    after = mids.col(j);
    xi = after;
    system.coupling_step(v, -dt, xi);
    system.coupling_sensitivity(v, dt, xi, after, chi, sens);
    for (int l = 0; l < n_c; ++l) out.pairing(j, l) = sens[static_cast<std::size_t>(l)] / dt;
    system.coupling_step(v, -dt, chi);
    system.drift_step(j > 0 ? -dt : -0.5 * dt, chi);
  }
  out.phi_0 = std::move(chi);
}

}  // namespace detail

void write_trajectory_csv(const std::filesystem::path& path, const StateTrajectory& trajectory,
                          const TimeGrid& grid) {
  if (trajectory.n_nodes() != grid.n_nodes()) throw ConfigError("trajectory does not match the time grid");
  std::ostringstream out;
  out << "t";
  for (Eigen::Index k = 0; k < trajectory.states.rows(); ++k) out << ",re" << k << ",im" << k;
  out << "\n";
  for (Eigen::Index j = 0; j < trajectory.n_nodes(); ++j) {
    out << io::fmt(grid.node(j));
    for (Eigen::Index k = 0; k < trajectory.states.rows(); ++k) {
      const cplx a = trajectory.states(k, j);
      out << ',' << io::fmt(a.real()) << ',' << io::fmt(a.imag());
    }
    out << '\n';
  }
  io::write_atomic(path, out.str());
}

}  // namespace sparseqc
