#include "sparseqc/synthesis.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

namespace {

constexpr cplx kI{0.0, 1.0};

double gaussian(double d, double sigma) { return std::exp(-0.5 * (d * d) / (sigma * sigma)); }

}  // namespace

std::string to_string(SynthesisKind kind) {
  switch (kind) {
    case SynthesisKind::two_scale: return "two_scale";
    case SynthesisKind::dual_gabor: return "dual_gabor";
    case SynthesisKind::kernel_space: return "kernel_space";
    case SynthesisKind::fourier: return "fourier";
    case SynthesisKind::gabor_tf: return "gabor_tf";
    case SynthesisKind::identity: return "identity";
  }
  return "?";
}

SynthesisKind synthesis_kind_from_string(const std::string& name) {
  if (name == "two_scale") return SynthesisKind::two_scale;
  if (name == "dual_gabor") return SynthesisKind::dual_gabor;
  if (name == "kernel_space") return SynthesisKind::kernel_space;
  if (name == "fourier") return SynthesisKind::fourier;
  if (name == "gabor_tf") return SynthesisKind::gabor_tf;
  if (name == "identity") return SynthesisKind::identity;
  throw ConfigError("unknown operator kind '" + name + "'");
}

EnvelopeKind default_envelope_kind(SynthesisKind kind) {
  switch (kind) {
    case SynthesisKind::two_scale: return EnvelopeKind::h1_0;
    case SynthesisKind::dual_gabor: return EnvelopeKind::l2;
    case SynthesisKind::kernel_space: return EnvelopeKind::kernel_weighted;
    case SynthesisKind::fourier:
    case SynthesisKind::gabor_tf: return EnvelopeKind::scalar;
    case SynthesisKind::identity: return EnvelopeKind::l2;
  }
  return EnvelopeKind::scalar;
}

bool is_sanctioned_pairing(SynthesisKind kind, EnvelopeKind space) {
  if (kind == SynthesisKind::identity) return space == EnvelopeKind::l2 || space == EnvelopeKind::h1_0;
  return default_envelope_kind(kind) == space;
}

double GaborWindow::operator()(double t, double s) const {
  double k = gaussian(t - s, sigma);
  if (tapered) k *= std::sin(std::numbers::pi * t / t_final) * std::sin(std::numbers::pi * s / t_final);
  return k;
}

GaborWindow build_window(const TimeGrid& grid, double sigma, bool taper) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("window sigma must be positive");
  GaborWindow w;
  w.sigma = sigma;
  w.t_final = grid.t_final();
  w.tapered = taper;
  const Eigen::Index n = grid.n_nodes();
  w.matrix.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w.matrix(i, i) = w(grid.node(i), grid.node(i));
    for (Eigen::Index j = 0; j < i; ++j) w.matrix(i, j) = w.matrix(j, i) = w(grid.node(i), grid.node(j));
  }
  return w;
}

Eigen::MatrixXd kernel_space_matrix(const TimeGrid& grid, double sigma, double nugget) {
  if (!(sigma > 0.0)) sigma = grid.t_final() / 20.0;
  Eigen::MatrixXd k = build_window(grid, sigma, false).matrix;
  k.diagonal().array() += nugget;
  return k;
}

EnvelopeSpace make_envelope_space(SynthesisKind kind, const TimeGrid& time, double sigma,
                                  EnvelopeKind identity_space) {
  const EnvelopeKind env = kind == SynthesisKind::identity ? identity_space : default_envelope_kind(kind);
  if (!is_sanctioned_pairing(kind, env))
    throw ConfigError("operator '" + to_string(kind) + "' cannot be paired with envelope space '" + to_string(env) + "'");
  switch (env) {
    case EnvelopeKind::h1_0: return EnvelopeSpace::h1_0(time);
    case EnvelopeKind::l2: return EnvelopeSpace::l2(time);
    case EnvelopeKind::scalar: return EnvelopeSpace::scalar();
    case EnvelopeKind::kernel_weighted: return EnvelopeSpace::kernel_weighted(time, kernel_space_matrix(time, sigma));
  }
  return EnvelopeSpace::scalar();
}

SynthesisOperator::SynthesisOperator(SynthesisKind kind, FrequencyGrid grid, const TimeGrid& time,
                                     EnvelopeSpace space, double sigma)
    : kind_(kind), grid_(std::move(grid)), time_(time), space_(std::move(space)), sigma_(sigma) {
  grid_.validate();
  if (!is_sanctioned_pairing(kind_, space_.kind()))
    throw ConfigError("operator '" + to_string(kind_) + "' cannot be paired with envelope space '" +
                      to_string(space_.kind()) + "'");
  if (space_.is_time_dependent() && space_.n_nodes() != time_.n_nodes())
    throw ConfigError("envelope space and time grid disagree on the number of nodes");
  if ((kind_ == SynthesisKind::gabor_tf) != grid_.is_tensor())
    throw ConfigError("gabor_tf requires a frequency x time tensor grid (and only gabor_tf accepts one)");
  if (kind_ == SynthesisKind::identity && grid_.size() != 1)
    throw ConfigError("identity operator expects a single-point frequency grid");
  if (!(sigma_ > 0.0)) sigma_ = time_.t_final() / 20.0;

  const Eigen::Index n = time_.n_steps();
  const Eigen::VectorXd tm = time_.midpoints();
  switch (kind_) {
    case SynthesisKind::two_scale:
    case SynthesisKind::kernel_space:
    case SynthesisKind::dual_gabor: {
      phases_.resize(n, static_cast<Eigen::Index>(grid_.omegas.size()));
      for (Eigen::Index k = 0; k < phases_.cols(); ++k)
        for (Eigen::Index j = 0; j < n; ++j) phases_(j, k) = std::exp(kI * (grid_.omegas[static_cast<std::size_t>(k)] * tm[j]));
      if (kind_ == SynthesisKind::dual_gabor) {
        GaborWindow w;
        w.sigma = sigma_;
        w.t_final = time_.t_final();
        w.tapered = true;
        const double dt = time_.step();
        smoothing_.resize(n, time_.n_nodes());
        for (Eigen::Index i = 0; i < time_.n_nodes(); ++i) {
          const double weight = (i == 0 || i == time_.n_steps()) ? 0.5 * dt : dt;
          for (Eigen::Index j = 0; j < n; ++j) smoothing_(j, i) = w(tm[j], time_.node(i)) * weight;
        }
      }
      break;
    }
    case SynthesisKind::fourier:
    case SynthesisKind::gabor_tf: {
      basis_.resize(n, grid_.size());
      for (Eigen::Index k = 0; k < grid_.size(); ++k) {
        const double om = grid_.omega(k);
        const double s = grid_.center(k);
        for (Eigen::Index j = 0; j < n; ++j) {
          basis_(j, k) = kind_ == SynthesisKind::fourier
                             ? std::exp(kI * (om * tm[j]))
                             : gaussian(tm[j] - s, sigma_) * std::exp(kI * (om * (tm[j] - s)));
        }
      }
      break;
    }
    case SynthesisKind::identity:
      break;
  }
}

SampledField SynthesisOperator::synthesize(const ControlMeasure& u) const {
  if (!(u.grid == grid_)) throw ConfigError("measure grid does not match the operator grid");
  u.check(space_);
  const Eigen::Index n = time_.n_steps();
  Eigen::MatrixXd v(n, 1);
  switch (kind_) {
    case SynthesisKind::two_scale:
    case SynthesisKind::kernel_space: {
      v.setZero();
      double* out = v.data();
      for (Eigen::Index k = 0; k < phases_.cols(); ++k) {
        const cplx* ph = phases_.col(k).data();
        const cplx* a = u.atoms.col(k).data();
        for (Eigen::Index j = 0; j < n; ++j) out[j] += 0.5 * (ph[j] * (a[j] + a[j + 1])).real();
      }
      break;
    }
    case SynthesisKind::dual_gabor: {
      const Eigen::MatrixXcd smoothed = smoothing_ * u.atoms;
      v.setZero();
      for (Eigen::Index k = 0; k < phases_.cols(); ++k) v.col(0) += phases_.col(k).cwiseProduct(smoothed.col(k)).real();
      break;
    }
    case SynthesisKind::fourier:
    case SynthesisKind::gabor_tf:
      v.col(0) = (basis_ * u.atoms.row(0).transpose()).real();
      break;
    case SynthesisKind::identity:
      v.col(0) = (0.5 * (u.atoms.col(0).head(n) + u.atoms.col(0).tail(n))).real();
      break;
  }
  return SampledField(std::move(v));
}

ControlMeasure SynthesisOperator::adjoint_coefficients(const SampledField& f) const {
  const Eigen::Index n = time_.n_steps();
  if (f.n_steps() != n || f.components() != 1) throw ConfigError("adjoint_synthesize: field does not match the operator");
  const Eigen::VectorXd fw = f.values.col(0) * time_.step();
  ControlMeasure c = zero_measure();
  switch (kind_) {
    case SynthesisKind::two_scale:
    case SynthesisKind::kernel_space: {
      for (Eigen::Index k = 0; k < phases_.cols(); ++k) {
        const cplx* ph = phases_.col(k).data();
        cplx* a = c.atoms.col(k).data();
        for (Eigen::Index j = 0; j < n; ++j) {
          const cplx q = 0.5 * fw[j] * std::conj(ph[j]);
          a[j] += q;
          a[j + 1] += q;
        }
      }
      break;
    }
    case SynthesisKind::dual_gabor: {
      const Eigen::MatrixXcd q = phases_.conjugate().array().colwise() * fw.cast<cplx>().array();
      c.atoms = smoothing_.transpose() * q;
      break;
    }
    case SynthesisKind::fourier:
    case SynthesisKind::gabor_tf:
      c.atoms.row(0) = (basis_.adjoint() * fw.cast<cplx>()).transpose();
      break;
    case SynthesisKind::identity:
      c.atoms.col(0).head(n) += 0.5 * fw.cast<cplx>();
      c.atoms.col(0).tail(n) += 0.5 * fw.cast<cplx>();
      break;
  }
  return c;
}

ControlMeasure SynthesisOperator::adjoint_synthesize(const SampledField& f) const {
  ControlMeasure c = adjoint_coefficients(f);
  space_.riesz_columns(c.atoms);
  return c;
}

Eigen::Index SynthesisOperator::real_dof() const {
  if (kind_ == SynthesisKind::identity) return space_.n_nodes();
  return 2 * space_.n_nodes() * grid_.size();
}

double field_pairing(const SampledField& f, const SampledField& v, const TimeGrid& grid) {
  if (f.values.rows() != v.values.rows() || f.values.cols() != v.values.cols())
    throw ConfigError("field_pairing: shape mismatch");
  return f.values.cwiseProduct(v.values).sum() * grid.step();
}

Eigen::VectorXd fourier_magnitudes(const SampledField& v, const TimeGrid& grid, const std::vector<double>& omegas) {
  const Eigen::VectorXd tm = grid.midpoints();
  Eigen::VectorXd out(static_cast<Eigen::Index>(omegas.size()));
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    cplx acc = 0.0;
    for (Eigen::Index j = 0; j < tm.size(); ++j) acc += v.values(j, 0) * std::exp(-kI * (omegas[k] * tm[j]));
    out[static_cast<Eigen::Index>(k)] = std::abs(acc) * grid.step();
  }
  return out;
}

Eigen::MatrixXd spectrogram(const SampledField& v, const TimeGrid& grid, const FrequencyGrid& tensor_grid,
                            double sigma) {
  const SynthesisOperator op(SynthesisKind::gabor_tf, tensor_grid, grid, EnvelopeSpace::scalar(), sigma);
  const ControlMeasure c = op.adjoint_synthesize(v);
  const Eigen::Index n_om = static_cast<Eigen::Index>(tensor_grid.omegas.size());
  const Eigen::Index n_c = static_cast<Eigen::Index>(tensor_grid.centers.size());
  Eigen::MatrixXd out(n_om, n_c);
  for (Eigen::Index a = 0; a < n_om; ++a)
    for (Eigen::Index b = 0; b < n_c; ++b) out(a, b) = std::abs(c.atoms(0, a * n_c + b));
  return out;
}

void write_spectrogram_csv(const std::filesystem::path& path, const Eigen::MatrixXd& magnitudes,
                           const FrequencyGrid& tensor_grid) {
  std::ostringstream out;
  out << "omega";
  for (double s : tensor_grid.centers) out << ',' << io::fmt(s);
  out << '\n';
  for (Eigen::Index a = 0; a < magnitudes.rows(); ++a) {
    out << io::fmt(tensor_grid.omegas[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < magnitudes.cols(); ++b) out << ',' << io::fmt(magnitudes(a, b));
    out << '\n';
  }
  io::write_atomic(path, out.str());
}

void write_field_csv(const std::filesystem::path& path, const SampledField& v, const TimeGrid& grid) {
  std::ostringstream out;
  out << "t";
  for (int l = 0; l < v.components(); ++l) out << ",v" << l;
  out << '\n';
  for (Eigen::Index j = 0; j < v.n_steps(); ++j) {
    out << io::fmt(grid.midpoint(j));
    for (int l = 0; l < v.components(); ++l) out << ',' << io::fmt(v.values(j, l));
    out << '\n';
  }
  io::write_atomic(path, out.str());
}

void write_spectrum_csv(const std::filesystem::path& path, const std::vector<double>& omegas,
                        const Eigen::VectorXd& magnitudes) {
  std::ostringstream out;
  out << "omega,magnitude\n";
  for (std::size_t k = 0; k < omegas.size(); ++k)
    out << io::fmt(omegas[k]) << ',' << io::fmt(magnitudes[static_cast<Eigen::Index>(k)]) << '\n';
  io::write_atomic(path, out.str());
}

}  // namespace sparseqc
