#pragma once

#include <array>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparseqc/quantum_system.hpp"

namespace sparseqc {

/// A system together with its initial state.
struct Model {
  std::string name;
  std::shared_ptr<const QuantumSystem> system;
  Eigen::VectorXcd psi0;
};

/// Three levels with energies (-2, -1, 2); the coupling connects 1<->3 and
/// 2<->3 only.  psi0 = e1, observable diag(1, 1, 0).
Model build_three_level();

/// Two-level system with complex control v = v_re + i v_im entering
/// off-diagonally: H = diag(e1, e2) + v_re σx + v_im σy.  Two real field
/// components.  psi0 = e1, observable = projector onto e1.
Model build_two_level(double e1, double e2);

/// One nuclear coordinate on two potential energy surfaces.
///
///   E1(x) = lower_a (x^2 - lower_b^2)^2 + lower_tilt x     (asymmetric double well)
///   E2(x) = upper_offset + upper_curvature/2 (x - upper_center)^2
///
/// When `calibrate` is set, lower_tilt and upper_offset are solved for so that
/// E2 - E1 at the two refined minima of E1 equals (gap_left, gap_right).
struct TwoPesSpec {
  double x_min = -4.0;
  double x_max = 4.0;
  Eigen::Index n_x = 256;
  double mass = 2000.0;

  double lower_a = 0.015 / 5.0625;
  double lower_b = 1.5;
  double lower_tilt = 0.008;
  double upper_offset = 0.05;
  double upper_curvature = 0.03;
  double upper_center = 0.0;

  bool calibrate = true;
  double gap_left = 0.074;
  double gap_right = 0.048;

  /// Constant transition dipole μ12; μ11 = μ22 = 0.
  double dipole = 1.0;

  /// Gaussian initial state exp(-(x-c)^2 / (2 w^2)) on the lower surface.
  /// center NaN -> left minimum of E1; width <= 0 -> harmonic ground-state width.
  double psi0_center = std::numeric_limits<double>::quiet_NaN();
  double psi0_width = 0.0;

  /// Optional two-column CSV files (x, E) replacing the analytic surfaces.
  std::string lower_csv;
  std::string upper_csv;

  Eigen::VectorXd grid() const;
  double spacing() const { return (x_max - x_min) / static_cast<double>(n_x - 1); }
};

/// Surfaces sampled on the spec grid (after CSV interpolation, if any).
struct TwoPesSurfaces {
  Eigen::VectorXd x;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd dipole;
};

/// Sub-grid minimum from the parabola through (i-1, i, i+1), with the
/// quadratic interpolation weights at that point.
struct RefinedMinimum {
  Eigen::Index index = 0;
  double x = 0.0;
  std::array<double, 3> weights{};
  double interpolate(const Eigen::VectorXd& values) const;
};

RefinedMinimum refine_minimum(const Eigen::VectorXd& x, const Eigen::VectorXd& e, Eigen::Index i);

/// Spec with lower_tilt/upper_offset solved for the target gaps (no-op when
/// calibrate is false or CSV surfaces are used).
TwoPesSpec calibrate_two_pes(TwoPesSpec spec);

TwoPesSurfaces sample_surfaces(const TwoPesSpec& spec);

/// Indices of strict interior local minima of `e`, ascending.
std::vector<Eigen::Index> local_minima(const Eigen::VectorXd& e);

/// Index of the largest value of the lower surface between its first two
/// local minima.
Eigen::Index barrier_index(const Eigen::VectorXd& lower);

/// Three-point finite-difference Laplacian with homogeneous Dirichlet ends.
Eigen::MatrixXd dirichlet_laplacian(Eigen::Index n, double h);

class TwoPesSystem : public QuantumSystem {
 public:
  TwoPesSystem(const TwoPesSurfaces& surfaces, double mass, Eigen::VectorXd observable_mask);

  Eigen::Index dimension() const override { return 2 * n_x_; }
  int n_couplings() const override { return 1; }

  Eigen::VectorXcd apply_h0(const Eigen::VectorXcd& psi) const override;
  Eigen::VectorXcd apply_coupling(int l, const Eigen::VectorXcd& psi) const override;
  Eigen::VectorXcd observable_apply(const Eigen::VectorXcd& psi) const override;
  bool observable_is_projector() const override { return true; }

  void drift_step(double dt, Eigen::VectorXcd& psi) const override;
  void coupling_step(std::span<const double> v, double dt, Eigen::VectorXcd& psi) const override;

  Eigen::Index n_x() const { return n_x_; }
  const Eigen::VectorXd& observable_mask() const { return mask_; }
  /// Dense surface Hamiltonian (kinetic + potential) for surface 0 or 1.
  Eigen::MatrixXd surface_hamiltonian(int surface) const;

 private:
  void apply_surface_exp(int surface, double dt, Eigen::Ref<Eigen::VectorXcd> phi) const;

  Eigen::Index n_x_;
  double kinetic_diag_;
  double kinetic_off_;
  Eigen::VectorXd potential_[2];
  Eigen::MatrixXd vectors_[2];
  Eigen::MatrixXd vectors_t_[2];
  Eigen::VectorXd values_[2];
  Eigen::VectorXd dipole_;
  Eigen::VectorXd mask_;
};

/// Builds the system, the observable (projector onto the complement of the
/// lower-surface region right of the barrier) and the Gaussian psi0.
Model build_two_pes(const TwoPesSpec& spec);

/// Pairwise |E_i - E_j| of the drift eigenvalues, labelled "i-j" (1-based).
std::vector<std::pair<std::string, double>> eigen_gaps(const DenseSystem& system);

/// E2 - E1 at every local minimum of E1 (parabola-refined), labelled by position.
std::vector<std::pair<std::string, double>> eigen_gaps(const TwoPesSpec& spec);

}  // namespace sparseqc
