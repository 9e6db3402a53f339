#include "sparseqc/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>

#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

namespace {

constexpr cplx kI{0.0, 1.0};

double lower_analytic(const TwoPesSpec& s, double x) {
  const double q = x * x - s.lower_b * s.lower_b;
  return s.lower_a * q * q + s.lower_tilt * x;
}

double upper_analytic(const TwoPesSpec& s, double x) {
  const double d = x - s.upper_center;
  return s.upper_offset + 0.5 * s.upper_curvature * d * d;
}

Eigen::VectorXd interpolate_csv(const std::string& path, const Eigen::VectorXd& x) {
  const auto rows = io::read_numeric_csv(path);
  if (rows.size() < 2) throw InputError(path + ": need at least two (x, E) rows");
  std::vector<double> xs;
  std::vector<double> es;
  for (const auto& r : rows) {
    if (r.size() < 2) throw InputError(path + ": expected two columns (x, E)");
    xs.push_back(r[0]);
    es.push_back(r[1]);
  }
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw InputError(path + ": x column must be strictly increasing");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi <= xs.front()) {
      out[i] = es.front();
    } else if (xi >= xs.back()) {
      out[i] = es.back();
    } else {
      const auto it = std::upper_bound(xs.begin(), xs.end(), xi);
      const std::size_t k = static_cast<std::size_t>(it - xs.begin());
      const double w = (xi - xs[k - 1]) / (xs[k] - xs[k - 1]);
      out[i] = (1.0 - w) * es[k - 1] + w * es[k];
    }
  }
  return out;
}

void validate(const TwoPesSpec& s) {
  if (s.n_x < 16) throw ConfigError("two_pes: n_x must be at least 16");
  if (!(s.x_max > s.x_min)) throw ConfigError("two_pes: x_max must exceed x_min");
  if (!(s.mass > 0.0)) throw ConfigError("two_pes: mass must be positive");
  if (!std::isfinite(s.dipole)) throw ConfigError("two_pes: dipole must be finite");
}

}  // namespace

Eigen::VectorXd TwoPesSpec::grid() const { return Eigen::VectorXd::LinSpaced(n_x, x_min, x_max); }

std::vector<Eigen::Index> local_minima(const Eigen::VectorXd& e) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 1; i + 1 < e.size(); ++i)
    if (e[i] < e[i - 1] && e[i] < e[i + 1]) out.push_back(i);
  return out;
}

Eigen::Index barrier_index(const Eigen::VectorXd& lower) {
  const auto minima = local_minima(lower);
  if (minima.size() < 2) throw ConfigError("two_pes: lower surface needs two local minima");
  Eigen::Index best = minima[0];
  for (Eigen::Index i = minima[0]; i <= minima[1]; ++i)
    if (lower[i] > lower[best]) best = i;
  return best;
}

RefinedMinimum refine_minimum(const Eigen::VectorXd& x, const Eigen::VectorXd& e, Eigen::Index i) {
  if (i < 1 || i + 1 >= e.size()) throw ConfigError("refine_minimum: index must be interior");
  const double curv = e[i - 1] - 2.0 * e[i] + e[i + 1];
  const double s = curv > 0.0 ? 0.5 * (e[i - 1] - e[i + 1]) / curv : 0.0;
  RefinedMinimum r;
  r.index = i;
  r.x = x[i] + s * (x[i + 1] - x[i]);
  r.weights = {0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)};
  return r;
}

double RefinedMinimum::interpolate(const Eigen::VectorXd& v) const {
  return weights[0] * v[index - 1] + weights[1] * v[index] + weights[2] * v[index + 1];
}

TwoPesSpec calibrate_two_pes(TwoPesSpec spec) {
  validate(spec);
  if (!spec.calibrate || !spec.lower_csv.empty() || !spec.upper_csv.empty()) return spec;
  const Eigen::VectorXd x = spec.grid();
  TwoPesSpec flat = spec;
  flat.lower_tilt = 0.0;
  flat.upper_offset = 0.0;
  Eigen::VectorXd rest(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) rest[i] = upper_analytic(flat, x[i]) - lower_analytic(flat, x[i]);
  // At fixed interpolation weights the gaps are affine in (tilt, offset):
  //   gap = offset + rest(x*) - tilt x*.
  // The refined minima move continuously with the tilt, so iterate to a fixed point.
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd lower(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) lower[i] = lower_analytic(spec, x[i]);
    const auto minima = local_minima(lower);
    if (minima.size() < 2) throw ConfigError("two_pes calibration: lower surface lost its double-well shape");
    const RefinedMinimum ml = refine_minimum(x, lower, minima[0]);
    const RefinedMinimum mr = refine_minimum(x, lower, minima[1]);
    const double xl = ml.interpolate(x), xr = mr.interpolate(x);
    const double rl = ml.interpolate(rest), rr = mr.interpolate(rest);
    const double tilt = ((spec.gap_left - rl) - (spec.gap_right - rr)) / (xr - xl);
    const double offset = spec.gap_left - rl + tilt * xl;
    const bool settled = std::abs(tilt - spec.lower_tilt) < 1e-14 && std::abs(offset - spec.upper_offset) < 1e-14;
    spec.lower_tilt = tilt;
    spec.upper_offset = offset;
    if (settled) return spec;
  }
  throw NumericalError("two_pes calibration did not converge");
}

TwoPesSurfaces sample_surfaces(const TwoPesSpec& spec) {
  validate(spec);
  TwoPesSurfaces s;
  s.x = spec.grid();
  s.lower.resize(s.x.size());
  s.upper.resize(s.x.size());
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    s.lower[i] = lower_analytic(spec, s.x[i]);
    s.upper[i] = upper_analytic(spec, s.x[i]);
  }
  if (!spec.lower_csv.empty()) s.lower = interpolate_csv(spec.lower_csv, s.x);
  if (!spec.upper_csv.empty()) s.upper = interpolate_csv(spec.upper_csv, s.x);
  s.dipole = Eigen::VectorXd::Constant(s.x.size(), spec.dipole);
  if (!s.lower.allFinite() || !s.upper.allFinite()) throw InputError("two_pes: non-finite surface values");
  return s;
}

Eigen::MatrixXd dirichlet_laplacian(Eigen::Index n, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  const double inv = 1.0 / (h * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = -2.0 * inv;
    if (i + 1 < n) d(i, i + 1) = d(i + 1, i) = inv;
  }
  return d;
}

TwoPesSystem::TwoPesSystem(const TwoPesSurfaces& surfaces, double mass, Eigen::VectorXd observable_mask)
    : n_x_(surfaces.x.size()), dipole_(surfaces.dipole), mask_(std::move(observable_mask)) {
  if (n_x_ < 2 || surfaces.lower.size() != n_x_ || surfaces.upper.size() != n_x_ || dipole_.size() != n_x_)
    throw ConfigError("TwoPesSystem: inconsistent surface sizes");
  if (mask_.size() != 2 * n_x_) throw ConfigError("TwoPesSystem: observable mask has the wrong size");
  for (Eigen::Index i = 0; i < mask_.size(); ++i)
    if (mask_[i] != 0.0 && mask_[i] != 1.0) throw ConfigError("TwoPesSystem: observable is not a projector");
  const double h = surfaces.x[1] - surfaces.x[0];
  kinetic_diag_ = 1.0 / (mass * h * h);
  kinetic_off_ = -0.5 / (mass * h * h);
  potential_[0] = surfaces.lower;
  potential_[1] = surfaces.upper;
  for (int s = 0; s < 2; ++s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(surface_hamiltonian(s));
    values_[s] = eig.eigenvalues();
    vectors_[s] = eig.eigenvectors();
    vectors_t_[s] = vectors_[s].transpose();
  }
}

Eigen::MatrixXd TwoPesSystem::surface_hamiltonian(int surface) const {
  Eigen::MatrixXd hs = Eigen::MatrixXd::Zero(n_x_, n_x_);
  for (Eigen::Index i = 0; i < n_x_; ++i) {
    hs(i, i) = kinetic_diag_ + potential_[surface][i];
    if (i + 1 < n_x_) hs(i, i + 1) = hs(i + 1, i) = kinetic_off_;
  }
  return hs;
}

Eigen::VectorXcd TwoPesSystem::apply_h0(const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd out(psi.size());
  for (int s = 0; s < 2; ++s) {
    const Eigen::Index o = s * n_x_;
    for (Eigen::Index i = 0; i < n_x_; ++i) {
      cplx acc = (kinetic_diag_ + potential_[s][i]) * psi[o + i];
      if (i > 0) acc += kinetic_off_ * psi[o + i - 1];
      if (i + 1 < n_x_) acc += kinetic_off_ * psi[o + i + 1];
      out[o + i] = acc;
    }
  }
  return out;
}

Eigen::VectorXcd TwoPesSystem::apply_coupling(int l, const Eigen::VectorXcd& psi) const {
  if (l != 0) throw ConfigError("TwoPesSystem has a single coupling operator");
  Eigen::VectorXcd out(psi.size());
  out.head(n_x_) = dipole_.cwiseProduct(psi.tail(n_x_));
  out.tail(n_x_) = dipole_.cwiseProduct(psi.head(n_x_));
  return out;
}

Eigen::VectorXcd TwoPesSystem::observable_apply(const Eigen::VectorXcd& psi) const {
  return mask_.cwiseProduct(psi);
}

void TwoPesSystem::apply_surface_exp(int surface, double dt, Eigen::Ref<Eigen::VectorXcd> phi) const {
  // Complex vector viewed as a 2 x n real matrix (re; im) per column.
  Eigen::Map<Eigen::Matrix<double, 2, Eigen::Dynamic>> m(reinterpret_cast<double*>(phi.data()), 2, n_x_);
  Eigen::Matrix<double, 2, Eigen::Dynamic> c = m * vectors_[surface];
  const Eigen::VectorXd& lam = values_[surface];
  for (Eigen::Index k = 0; k < n_x_; ++k) {
    const cplx z = cplx(c(0, k), c(1, k)) * std::exp(-kI * (lam[k] * dt));
    c(0, k) = z.real();
    c(1, k) = z.imag();
  }
  m.noalias() = c * vectors_t_[surface];
}

void TwoPesSystem::drift_step(double dt, Eigen::VectorXcd& psi) const {
  apply_surface_exp(0, dt, psi.head(n_x_));
  apply_surface_exp(1, dt, psi.tail(n_x_));
}

void TwoPesSystem::coupling_step(std::span<const double> v, double dt, Eigen::VectorXcd& psi) const {
  const double amp = v[0] * dt;
  for (Eigen::Index i = 0; i < n_x_; ++i) {
    const double a = amp * dipole_[i];
    const double c = std::cos(a);
    const cplx s = -kI * std::sin(a);
    const cplx p1 = psi[i];
    const cplx p2 = psi[n_x_ + i];
    psi[i] = c * p1 + s * p2;
    psi[n_x_ + i] = s * p1 + c * p2;
  }
}

Model build_two_pes(const TwoPesSpec& input) {
  const TwoPesSpec spec = calibrate_two_pes(input);
  const TwoPesSurfaces surf = sample_surfaces(spec);
  const Eigen::Index n = spec.n_x;
  const auto minima = local_minima(surf.lower);
  if (minima.size() < 2) throw ConfigError("two_pes: lower surface needs two local minima");
  const Eigen::Index barrier = barrier_index(surf.lower);

  Eigen::VectorXd mask = Eigen::VectorXd::Ones(2 * n);
  for (Eigen::Index i = barrier + 1; i < n; ++i) mask[i] = 0.0;

  double center = spec.psi0_center;
  if (std::isnan(center)) center = refine_minimum(surf.x, surf.lower, minima[0]).x;
  double width = spec.psi0_width;
  if (!(width > 0.0)) {
    // Harmonic ground state exp(-m w x^2 / 2) with curvature from the grid.
    const Eigen::Index i = minima[0];
    const double h = spec.spacing();
    const double curv = (surf.lower[i - 1] - 2.0 * surf.lower[i] + surf.lower[i + 1]) / (h * h);
    if (!(curv > 0.0)) throw ConfigError("two_pes: cannot infer the initial width from a flat minimum");
    width = 1.0 / std::sqrt(std::sqrt(spec.mass * curv));
  }
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (surf.x[i] - center) / width;
    psi0[i] = std::exp(-0.5 * d * d);
  }
  psi0 /= psi0.norm();

  Model m;
  m.name = "two_pes";
  m.system = std::make_shared<TwoPesSystem>(surf, spec.mass, std::move(mask));
  m.psi0 = std::move(psi0);
  return m;
}

Model build_three_level() {
  Eigen::MatrixXcd h0 = Eigen::MatrixXcd::Zero(3, 3);
  h0.diagonal() << -2.0, -1.0, 2.0;
  Eigen::MatrixXcd h1 = Eigen::MatrixXcd::Zero(3, 3);
  h1(0, 2) = h1(2, 0) = 1.0;
  h1(1, 2) = h1(2, 1) = 1.0;
  Eigen::MatrixXcd obs = Eigen::MatrixXcd::Zero(3, 3);
  obs.diagonal() << 1.0, 1.0, 0.0;
  Model m;
  m.name = "three_level";
  m.system = std::make_shared<DenseSystem>(h0, std::vector<Eigen::MatrixXcd>{h1}, obs);
  m.psi0 = Eigen::VectorXcd::Zero(3);
  m.psi0[0] = 1.0;
  return m;
}

Model build_two_level(double e1, double e2) {
  if (e1 == e2) throw ConfigError("two_level: energies must differ");
  Eigen::MatrixXcd h0 = Eigen::MatrixXcd::Zero(2, 2);
  h0.diagonal() << e1, e2;
  Eigen::MatrixXcd sx = Eigen::MatrixXcd::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 1.0;
  Eigen::MatrixXcd sy = Eigen::MatrixXcd::Zero(2, 2);
  sy(0, 1) = -kI;
  sy(1, 0) = kI;
  Eigen::MatrixXcd obs = Eigen::MatrixXcd::Zero(2, 2);
  obs(0, 0) = 1.0;
  Model m;
  m.name = "two_level";
  m.system = std::make_shared<DenseSystem>(h0, std::vector<Eigen::MatrixXcd>{sx, sy}, obs);
  m.psi0 = Eigen::VectorXcd::Zero(2);
  m.psi0[0] = 1.0;
  return m;
}

std::vector<std::pair<std::string, double>> eigen_gaps(const DenseSystem& system) {
  const Eigen::VectorXd& e = system.h0_eigenvalues();
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    for (Eigen::Index j = i + 1; j < e.size(); ++j)
      out.emplace_back(std::to_string(i + 1) + "-" + std::to_string(j + 1), std::abs(e[j] - e[i]));
  return out;
}

std::vector<std::pair<std::string, double>> eigen_gaps(const TwoPesSpec& input) {
  const TwoPesSpec spec = calibrate_two_pes(input);
  const TwoPesSurfaces surf = sample_surfaces(spec);
  const auto minima = local_minima(surf.lower);
  if (minima.empty()) throw ConfigError("two_pes: no local minimum of the lower surface on the grid");
  std::vector<std::pair<std::string, double>> out;
  const Eigen::VectorXd gap = surf.upper - surf.lower;
  for (auto i : minima) {
    const RefinedMinimum m = refine_minimum(surf.x, surf.lower, i);
    char label[48];
    std::snprintf(label, sizeof(label), "x=%.6g", m.x);
    out.emplace_back(label, m.interpolate(gap));
  }
  return out;
}

}  // namespace sparseqc
