#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sparseqc {

using cplx = std::complex<double>;

// Bilinear Schrödinger dynamics  i dψ/dt = (H0 + Σ_l v_l(t) H_l) ψ.
//
// Implementations are immutable after construction and may be shared
// read-only across threads.  All exponentials are applied in place.
class QuantumSystem {
 public:
  virtual ~QuantumSystem() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual int n_couplings() const = 0;

  virtual Eigen::VectorXcd apply_h0(const Eigen::VectorXcd& psi) const = 0;
  virtual Eigen::VectorXcd apply_coupling(int l, const Eigen::VectorXcd& psi) const = 0;
  virtual Eigen::VectorXcd observable_apply(const Eigen::VectorXcd& psi) const = 0;
  virtual bool observable_is_projector() const { return false; }

  /// psi <- exp(-i H0 dt) psi.  Negative dt gives the adjoint step.
  virtual void drift_step(double dt, Eigen::VectorXcd& psi) const = 0;

  /// psi <- exp(-i dt Σ_l v_l H_l) psi.  Negative dt gives the adjoint step.
  virtual void coupling_step(std::span<const double> v, double dt, Eigen::VectorXcd& psi) const = 0;

  /// Partial derivatives  d/dv_l Re<chi, exp(-i dt Σ v H) xi>, written to out[l].
  ///
  /// `after` must equal exp(-i dt Σ v H) xi.  The default is exact whenever the
  /// generator commutes with each H_l (in particular for a single coupling):
  /// out[l] = dt * Re<chi, -i H_l after>.
  virtual void coupling_sensitivity(std::span<const double> v, double dt, const Eigen::VectorXcd& xi,
                                    const Eigen::VectorXcd& after, const Eigen::VectorXcd& chi,
                                    std::span<double> out) const;
};

/// Finite-level system given by dense Hermitian matrices.
///
/// The drift exponential uses a precomputed eigendecomposition of H0.  With a
/// single coupling the coupling exponential uses a precomputed eigenbasis of
/// H1; otherwise the generator Σ v_l H_l is diagonalized per step and the
/// sensitivities use the exact Fréchet derivative of the exponential.
class DenseSystem : public QuantumSystem {
 public:
  DenseSystem(Eigen::MatrixXcd h0, std::vector<Eigen::MatrixXcd> couplings, Eigen::MatrixXcd observable);

  Eigen::Index dimension() const override { return h0_.rows(); }
  int n_couplings() const override { return static_cast<int>(couplings_.size()); }

  Eigen::VectorXcd apply_h0(const Eigen::VectorXcd& psi) const override { return h0_ * psi; }
  Eigen::VectorXcd apply_coupling(int l, const Eigen::VectorXcd& psi) const override;
  Eigen::VectorXcd observable_apply(const Eigen::VectorXcd& psi) const override { return observable_ * psi; }
  bool observable_is_projector() const override { return projector_; }

  void drift_step(double dt, Eigen::VectorXcd& psi) const override;
  void coupling_step(std::span<const double> v, double dt, Eigen::VectorXcd& psi) const override;
  void coupling_sensitivity(std::span<const double> v, double dt, const Eigen::VectorXcd& xi,
                            const Eigen::VectorXcd& after, const Eigen::VectorXcd& chi,
                            std::span<double> out) const override;

  const Eigen::MatrixXcd& h0() const { return h0_; }
  const Eigen::MatrixXcd& coupling(int l) const { return couplings_.at(static_cast<std::size_t>(l)); }
  const Eigen::MatrixXcd& observable() const { return observable_; }
  const Eigen::VectorXd& h0_eigenvalues() const { return h0_values_; }

 private:
  Eigen::MatrixXcd h0_;
  std::vector<Eigen::MatrixXcd> couplings_;
  Eigen::MatrixXcd observable_;
  bool projector_ = false;

  Eigen::VectorXd h0_values_;
  Eigen::MatrixXcd h0_vectors_;
  Eigen::VectorXd h1_values_;
  Eigen::MatrixXcd h1_vectors_;
};

/// Largest deviation from self-adjointness |<a, A b> - <A a, b>| over random
/// unit vectors, for H0, every coupling and the observable.
double self_adjointness_defect(const QuantumSystem& system, int trials, unsigned seed);

/// Largest | ||exp(-i H0 dt) a|| - ||a|| | over random vectors.
double drift_unitarity_defect(const QuantumSystem& system, double dt, int trials, unsigned seed);

}  // namespace sparseqc
