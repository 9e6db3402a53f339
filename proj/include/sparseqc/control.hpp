#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sparseqc/time_grid.hpp"

namespace sparseqc {

/// Atom locations.  A 1-D grid of angular frequencies, or a tensor grid of
/// frequencies x time centers (atom index = i_omega * n_centers + i_center).
struct FrequencyGrid {
  std::vector<double> omegas;
  std::vector<double> centers;

  static FrequencyGrid uniform(double lo, double hi, std::size_t n);
  static FrequencyGrid tensor(double lo, double hi, std::size_t n, double t_lo, double t_hi, std::size_t n_t);

  bool is_tensor() const { return !centers.empty(); }
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(omegas.size() * (centers.empty() ? 1 : centers.size()));
  }
  double omega(Eigen::Index k) const {
    return omegas[static_cast<std::size_t>(is_tensor() ? k / static_cast<Eigen::Index>(centers.size()) : k)];
  }
  double center(Eigen::Index k) const {
    return is_tensor() ? centers[static_cast<std::size_t>(k % static_cast<Eigen::Index>(centers.size()))] : 0.0;
  }
  /// Throws ConfigError unless both axes are strictly increasing and nonnegative.
  void validate() const;

  bool operator==(const FrequencyGrid&) const = default;
};

enum class EnvelopeKind { h1_0, l2, scalar, kernel_weighted };

std::string to_string(EnvelopeKind kind);
EnvelopeKind envelope_kind_from_string(const std::string& name);

using Envelope = Eigen::VectorXcd;

/// Hilbert space U of atom envelopes with a real inner product.
///
/// Time-dependent kinds store piecewise-linear nodal values on the time grid.
///   h1_0:            Re Σ (a_{j+1}-a_j) conj(b_{j+1}-b_j) / dt, endpoints pinned to 0
///   l2:              Re a^H M b, M the piecewise-linear mass matrix
///   scalar:          Re a conj(b), a single complex number
///   kernel_weighted: Re a^H K^{-1} b, K symmetric positive definite
class EnvelopeSpace {
 public:
  static EnvelopeSpace h1_0(const TimeGrid& grid);
  static EnvelopeSpace l2(const TimeGrid& grid);
  static EnvelopeSpace scalar();
  static EnvelopeSpace kernel_weighted(const TimeGrid& grid, Eigen::MatrixXd kernel);

  EnvelopeKind kind() const { return kind_; }
  Eigen::Index n_nodes() const { return n_nodes_; }
  double dt() const { return dt_; }
  bool is_time_dependent() const { return kind_ != EnvelopeKind::scalar; }
  const Eigen::MatrixXd& kernel() const;

  double inner(Eigen::Ref<const Envelope> a, Eigen::Ref<const Envelope> b) const;
  double norm(Eigen::Ref<const Envelope> a) const;

  /// Solves G r = c in place, G the Gram matrix of the inner product, so that
  /// inner(r, d) = Re(c^H d) for every admissible d.  For h1_0 the endpoint
  /// entries of c are ignored and r vanishes there.
  void riesz_in_place(Eigen::Ref<Envelope> c) const;

  /// inner(a.col(k), b.col(k)) for every k; kernel spaces solve all columns at once.
  Eigen::VectorXd inner_columns(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) const;
  /// riesz_in_place on every column.
  void riesz_columns(Eigen::MatrixXcd& c) const;
  /// Cholesky factor L of the kernel (K = L L^T); kernel spaces only.
  const Eigen::LLT<Eigen::MatrixXd>& kernel_factor() const;

  /// Throws ConfigError if `a` does not conform (size, pinned endpoints).
  void check(Eigen::Ref<const Envelope> a) const;

 private:
  struct KernelData {
    Eigen::MatrixXd kernel;
    Eigen::LLT<Eigen::MatrixXd> factor;
  };

  EnvelopeKind kind_ = EnvelopeKind::scalar;
  Eigen::Index n_nodes_ = 1;
  double dt_ = 1.0;
  std::shared_ptr<const KernelData> kernel_;
};

/// Dense atom storage: one column per grid point.
struct ControlMeasure {
  FrequencyGrid grid;
  Eigen::MatrixXcd atoms;

  static ControlMeasure zeros(const FrequencyGrid& grid, const EnvelopeSpace& space) {
    return ControlMeasure{grid, Eigen::MatrixXcd::Zero(space.n_nodes(), grid.size())};
  }
  Eigen::Index n_atoms() const { return atoms.cols(); }
  void check(const EnvelopeSpace& space) const;
};

struct HuberParams {
  double theta = 1e-5;
  void validate() const;
};

double envelope_inner(const EnvelopeSpace& space, const Envelope& a, const Envelope& b);

/// Per-atom U norms.
Eigen::VectorXd atom_norms(const ControlMeasure& u, const EnvelopeSpace& space);

/// Σ_ω ||u_ω||_U.
double measure_norm(const ControlMeasure& u, const EnvelopeSpace& space);

/// Σ_ω <a_ω, b_ω>_U, the geometry used by the optimizer.
double measure_inner(const ControlMeasure& a, const ControlMeasure& b, const EnvelopeSpace& space);

/// h(z) = |z| - θ/2 for |z| > θ, |z|^2/(2θ) otherwise.
double huber(double norm, const HuberParams& p);

/// Gradient multiplier s with ∇h(z) = s z:  1/|z| above θ, 1/θ below.
double huber_scale(double norm, const HuberParams& p);

double huber_value(const ControlMeasure& u, const EnvelopeSpace& space, const HuberParams& p);

/// Atom indices with ||u_ω||_U > θ.
std::vector<Eigen::Index> support(const ControlMeasure& u, const EnvelopeSpace& space, const HuberParams& p);

/// u_ω = exp(i θ_ω) base with θ_ω ~ U[0, 2π), reproducible per seed.
ControlMeasure random_initial_control(const FrequencyGrid& grid, const EnvelopeSpace& space, const Envelope& base,
                                      std::uint64_t seed);

/// Half-sine bump with U norm `norm` (kernel_weighted: K applied to the bump
/// before scaling; scalar: the constant `norm`).
Envelope half_sine_envelope(const EnvelopeSpace& space, double norm);

/// CSV rows (omega[, t_center], node, re, im).  Written atomically.
void write_measure_csv(const std::filesystem::path& path, const ControlMeasure& u);
ControlMeasure read_measure_csv(const std::filesystem::path& path);

/// CSV rows (omega[, t_center], norm).
void write_measure_summary_csv(const std::filesystem::path& path, const ControlMeasure& u,
                               const EnvelopeSpace& space);

}  // namespace sparseqc
