#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseqc/control.hpp"
#include "sparseqc/dynamics.hpp"
#include "sparseqc/time_grid.hpp"

namespace sparseqc {

enum class SynthesisKind { two_scale, dual_gabor, kernel_space, fourier, gabor_tf, identity };

std::string to_string(SynthesisKind kind);
SynthesisKind synthesis_kind_from_string(const std::string& name);

/// The envelope space each kind is paired with (identity also accepts h1_0).
EnvelopeKind default_envelope_kind(SynthesisKind kind);
bool is_sanctioned_pairing(SynthesisKind kind, EnvelopeKind space);

/// Gaussian window k(t, s) = b(t) b(s) exp(-(t-s)^2 / (2 σ^2)) with
/// b(t) = sin(π t / T) when tapered and b = 1 otherwise.
struct GaborWindow {
  double sigma = 1.0;
  double t_final = 1.0;
  bool tapered = false;
  /// k sampled on the time-grid nodes.
  Eigen::MatrixXd matrix;

  double operator()(double t, double s) const;
};

GaborWindow build_window(const TimeGrid& grid, double sigma, bool taper = false);

/// Kernel matrix for the kernel_weighted envelope space: the untapered window
/// on the nodes plus `nugget` on the diagonal.
Eigen::MatrixXd kernel_space_matrix(const TimeGrid& grid, double sigma, double nugget = 1e-3);

/// The envelope space `kind` is paired with on `time`.  `identity_space`
/// selects l2 or h1_0 for the identity baseline; sigma as for the operator.
EnvelopeSpace make_envelope_space(SynthesisKind kind, const TimeGrid& time, double sigma = 0.0,
                                  EnvelopeKind identity_space = EnvelopeKind::l2);

/// Linear map B from measures to real midpoint-sampled fields (one component),
/// with its exact discrete adjoint under the pairings
///   fields:   Σ_j f_j v_j dt
///   measures: Σ_ω <a_ω, b_ω>_U.
class SynthesisOperator {
 public:
  /// `sigma` is the Gaussian width for dual_gabor, gabor_tf and kernel_space
  /// (non-positive selects T/20).  For kernel_space the envelope space must be
  /// built from kernel_space_matrix with the same sigma.
  SynthesisOperator(SynthesisKind kind, FrequencyGrid grid, const TimeGrid& time, EnvelopeSpace space,
                    double sigma = 0.0);

  SynthesisKind kind() const { return kind_; }
  const FrequencyGrid& grid() const { return grid_; }
  const TimeGrid& time_grid() const { return time_; }
  const EnvelopeSpace& space() const { return space_; }
  double sigma() const { return sigma_; }

  SampledField synthesize(const ControlMeasure& u) const;

  /// Coefficients c with Σ_j f_j (B δu)_j dt = Re Σ_ω c_ω^H δu_ω.
  ControlMeasure adjoint_coefficients(const SampledField& f) const;

  /// B* f: the Riesz representatives of adjoint_coefficients.
  ControlMeasure adjoint_synthesize(const SampledField& f) const;

  ControlMeasure zero_measure() const { return ControlMeasure::zeros(grid_, space_); }

  /// Number of real degrees of freedom (identity: real nodal values only).
  Eigen::Index real_dof() const;

 private:
  SynthesisKind kind_;
  FrequencyGrid grid_;
  TimeGrid time_;
  EnvelopeSpace space_;
  double sigma_;

  Eigen::MatrixXcd phases_;     // N x n_omega, exp(i ω t_mid)
  Eigen::MatrixXcd basis_;      // N x n_atoms for scalar kinds
  Eigen::MatrixXd smoothing_;   // N x n_nodes, dual_gabor window with quadrature weights
};

/// Σ_j f_j v_j dt.
double field_pairing(const SampledField& f, const SampledField& v, const TimeGrid& grid);

/// |Σ_j v_j exp(-i ω t_j) dt| at each requested frequency (first component).
Eigen::VectorXd fourier_magnitudes(const SampledField& v, const TimeGrid& grid, const std::vector<double>& omegas);

/// |(B* v)(ω, s)| for the gabor_tf operator on the given tensor grid.
Eigen::MatrixXd spectrogram(const SampledField& v, const TimeGrid& grid, const FrequencyGrid& tensor_grid,
                            double sigma);

/// CSV: header "omega,<t centers...>", one row per frequency.
void write_spectrogram_csv(const std::filesystem::path& path, const Eigen::MatrixXd& magnitudes,
                           const FrequencyGrid& tensor_grid);

/// CSV: t_mid, v per component.
void write_field_csv(const std::filesystem::path& path, const SampledField& v, const TimeGrid& grid);

/// CSV: omega, |F(omega)|.
void write_spectrum_csv(const std::filesystem::path& path, const std::vector<double>& omegas,
                        const Eigen::VectorXd& magnitudes);

}  // namespace sparseqc
