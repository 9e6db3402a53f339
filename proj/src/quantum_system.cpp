#include "sparseqc/quantum_system.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "sparseqc/errors.hpp"

namespace sparseqc {

namespace {

constexpr cplx kI{0.0, 1.0};

void check_hermitian(const Eigen::MatrixXcd& m, Eigen::Index dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) throw ConfigError(std::string(what) + ": dimension mismatch");
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError(std::string(what) + ": matrix is not Hermitian");
}

// (f(a) - f(b)) / (a - b) for f(x) = exp(-i dt x), stable for a ~ b.
cplx exp_divided_difference(double a, double b, double dt) {
  const double half = 0.5 * dt * (a - b);
  const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  return -kI * dt * std::exp(-kI * (0.5 * dt * (a + b))) * sinc;
}

Eigen::VectorXcd random_unit(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = cplx(normal(rng), normal(rng));
  return x / x.norm();
}

}  // namespace

void QuantumSystem::coupling_sensitivity(std::span<const double> /*v*/, double dt,
                                         const Eigen::VectorXcd& /*xi*/, const Eigen::VectorXcd& after,
                                         const Eigen::VectorXcd& chi, std::span<double> out) const {
  for (int l = 0; l < n_couplings(); ++l) {
    // Re<chi, -i H after> = Im<chi, H after>
    out[static_cast<std::size_t>(l)] = dt * chi.dot(apply_coupling(l, after)).imag();
  }
}

DenseSystem::DenseSystem(Eigen::MatrixXcd h0, std::vector<Eigen::MatrixXcd> couplings,
                         Eigen::MatrixXcd observable)
    : h0_(std::move(h0)), couplings_(std::move(couplings)), observable_(std::move(observable)) {
  const Eigen::Index n = h0_.rows();
  if (n < 1) throw ConfigError("DenseSystem: empty Hamiltonian");
  check_hermitian(h0_, n, "DenseSystem H0");
  for (const auto& h : couplings_) check_hermitian(h, n, "DenseSystem coupling");
  check_hermitian(observable_, n, "DenseSystem observable");
  if (couplings_.empty()) throw ConfigError("DenseSystem: at least one coupling operator is required");

  projector_ = ((observable_ * observable_) - observable_).cwiseAbs().maxCoeff() < 1e-12;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> drift(h0_);
  h0_values_ = drift.eigenvalues();
  h0_vectors_ = drift.eigenvectors();
  if (couplings_.size() == 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> coupling(couplings_.front());
    h1_values_ = coupling.eigenvalues();
    h1_vectors_ = coupling.eigenvectors();
  }
}

Eigen::VectorXcd DenseSystem::apply_coupling(int l, const Eigen::VectorXcd& psi) const {
  return couplings_.at(static_cast<std::size_t>(l)) * psi;
}

void DenseSystem::drift_step(double dt, Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd c = h0_vectors_.adjoint() * psi;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * (h0_values_[k] * dt));
  psi = h0_vectors_ * c;
}

void DenseSystem::coupling_step(std::span<const double> v, double dt, Eigen::VectorXcd& psi) const {
  if (couplings_.size() == 1) {
    Eigen::VectorXcd c = h1_vectors_.adjoint() * psi;
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * (v[0] * h1_values_[k] * dt));
    psi = h1_vectors_ * c;
    return;
  }
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(h0_.rows(), h0_.cols());
  for (std::size_t l = 0; l < couplings_.size(); ++l) gen += v[l] * couplings_[l];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gen);
  Eigen::VectorXcd c = eig.eigenvectors().adjoint() * psi;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * (eig.eigenvalues()[k] * dt));
  psi = eig.eigenvectors() * c;
}

void DenseSystem::coupling_sensitivity(std::span<const double> v, double dt, const Eigen::VectorXcd& xi,
                                       const Eigen::VectorXcd& after, const Eigen::VectorXcd& chi,
                                       std::span<double> out) const {
  if (couplings_.size() == 1) {
    QuantumSystem::coupling_sensitivity(v, dt, xi, after, chi, out);
    return;
  }
  // Daleckii-Krein: d exp(-i dt A)[E] = V (Γ ∘ V^H E V) V^H.
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(h0_.rows(), h0_.cols());
  for (std::size_t l = 0; l < couplings_.size(); ++l) gen += v[l] * couplings_[l];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gen);
  const Eigen::MatrixXcd& vecs = eig.eigenvectors();
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const Eigen::Index n = lam.size();
  Eigen::MatrixXcd gamma(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) gamma(i, j) = exp_divided_difference(lam[i], lam[j], dt);
  const Eigen::VectorXcd chi_e = vecs.adjoint() * chi;
  const Eigen::VectorXcd xi_e = vecs.adjoint() * xi;
  for (std::size_t l = 0; l < couplings_.size(); ++l) {
    const Eigen::MatrixXcd e = vecs.adjoint() * couplings_[l] * vecs;
    const Eigen::MatrixXcd d = gamma.cwiseProduct(e);
    out[l] = chi_e.dot(d * xi_e).real();
  }
}

double self_adjointness_defect(const QuantumSystem& system, int trials, unsigned seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const Eigen::Index n = system.dimension();
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXcd a = random_unit(n, rng);
    const Eigen::VectorXcd b = random_unit(n, rng);
    auto defect = [&](auto&& apply) {
      return std::abs(a.dot(apply(b)) - apply(a).dot(b));
    };
    worst = std::max(worst, defect([&](const Eigen::VectorXcd& x) { return system.apply_h0(x); }));
    worst = std::max(worst, defect([&](const Eigen::VectorXcd& x) { return system.observable_apply(x); }));
    for (int l = 0; l < system.n_couplings(); ++l)
      worst = std::max(worst, defect([&](const Eigen::VectorXcd& x) { return system.apply_coupling(l, x); }));
  }
  return worst;
}

double drift_unitarity_defect(const QuantumSystem& system, double dt, int trials, unsigned seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXcd a = random_unit(system.dimension(), rng);
    system.drift_step(dt, a);
    worst = std::max(worst, std::abs(a.norm() - 1.0));
  }
  return worst;
}

}  // namespace sparseqc
