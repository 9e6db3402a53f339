#include "sparseqc/control.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

using cplx = std::complex<double>;

namespace {

void check_axis(const std::vector<double>& axis, const char* what) {
  if (axis.empty()) throw ConfigError(std::string(what) + ": grid is empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i]) || axis[i] < 0.0) throw ConfigError(std::string(what) + ": entries must be finite and nonnegative");
    if (i > 0 && !(axis[i] > axis[i - 1])) throw ConfigError(std::string(what) + ": grid must be strictly increasing");
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw ConfigError("grid size must be positive");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

// Symmetric tridiagonal solve with constant off-diagonal; rhs overwritten.
void solve_tridiagonal(const Eigen::VectorXd& diag, double off, Eigen::Ref<Envelope> rhs) {
  const Eigen::Index n = diag.size();
  if (n == 0) return;
  Eigen::VectorXd cp(n);
  double denom = diag[0];
  cp[0] = off / denom;
  rhs[0] /= denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = diag[i] - off * cp[i - 1];
    cp[i] = off / denom;
    rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) rhs[i] -= cp[i] * rhs[i + 1];
}

}  // namespace

FrequencyGrid FrequencyGrid::uniform(double lo, double hi, std::size_t n) {
  FrequencyGrid g;
  g.omegas = linspace(lo, hi, n);
  g.validate();
  return g;
}

FrequencyGrid FrequencyGrid::tensor(double lo, double hi, std::size_t n, double t_lo, double t_hi, std::size_t n_t) {
  FrequencyGrid g;
  g.omegas = linspace(lo, hi, n);
  g.centers = linspace(t_lo, t_hi, n_t);
  g.validate();
  return g;
}

void FrequencyGrid::validate() const {
  check_axis(omegas, "frequency grid");
  if (!centers.empty()) check_axis(centers, "time-center grid");
}

std::string to_string(EnvelopeKind kind) {
  switch (kind) {
    case EnvelopeKind::h1_0: return "h1_0";
    case EnvelopeKind::l2: return "l2";
    case EnvelopeKind::scalar: return "scalar";
    case EnvelopeKind::kernel_weighted: return "kernel_weighted";
  }
  return "?";
}

EnvelopeKind envelope_kind_from_string(const std::string& name) {
  if (name == "h1_0") return EnvelopeKind::h1_0;
  if (name == "l2") return EnvelopeKind::l2;
  if (name == "scalar") return EnvelopeKind::scalar;
  if (name == "kernel_weighted") return EnvelopeKind::kernel_weighted;
  throw ConfigError("unknown envelope space '" + name + "'");
}

EnvelopeSpace EnvelopeSpace::h1_0(const TimeGrid& grid) {
  if (grid.n_nodes() < 3) throw ConfigError("h1_0 envelopes need at least two time steps");
  EnvelopeSpace s;
  s.kind_ = EnvelopeKind::h1_0;
  s.n_nodes_ = grid.n_nodes();
  s.dt_ = grid.step();
  return s;
}

EnvelopeSpace EnvelopeSpace::l2(const TimeGrid& grid) {
  EnvelopeSpace s;
  s.kind_ = EnvelopeKind::l2;
  s.n_nodes_ = grid.n_nodes();
  s.dt_ = grid.step();
  return s;
}

EnvelopeSpace EnvelopeSpace::scalar() { return EnvelopeSpace{}; }

EnvelopeSpace EnvelopeSpace::kernel_weighted(const TimeGrid& grid, Eigen::MatrixXd kernel) {
  if (kernel.rows() != grid.n_nodes() || kernel.cols() != grid.n_nodes())
    throw ConfigError("kernel matrix must be n_nodes x n_nodes");
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw ConfigError("kernel matrix must be symmetric");
  auto data = std::make_shared<KernelData>();
  data->kernel = std::move(kernel);
  data->factor.compute(data->kernel);
  if (data->factor.info() != Eigen::Success) throw ConfigError("kernel matrix is not positive definite");
  EnvelopeSpace s;
  s.kind_ = EnvelopeKind::kernel_weighted;
  s.n_nodes_ = grid.n_nodes();
  s.dt_ = grid.step();
  s.kernel_ = std::move(data);
  return s;
}

const Eigen::MatrixXd& EnvelopeSpace::kernel() const {
  if (!kernel_) throw ConfigError("envelope space has no kernel");
  return kernel_->kernel;
}

void EnvelopeSpace::check(Eigen::Ref<const Envelope> a) const {
  if (a.size() != n_nodes_)
    throw ConfigError("envelope has " + std::to_string(a.size()) + " nodes, space expects " + std::to_string(n_nodes_));
  if (kind_ == EnvelopeKind::h1_0 && (a[0] != cplx{} || a[n_nodes_ - 1] != cplx{}))
    throw ConfigError("h1_0 envelope must vanish at both endpoints");
}

double EnvelopeSpace::inner(Eigen::Ref<const Envelope> a, Eigen::Ref<const Envelope> b) const {
  const Eigen::Index n = n_nodes_;
  switch (kind_) {
    case EnvelopeKind::scalar:
      return (std::conj(a[0]) * b[0]).real();
    case EnvelopeKind::h1_0: {
      const auto da = a.tail(n - 1) - a.head(n - 1);
      const auto db = b.tail(n - 1) - b.head(n - 1);
      return da.dot(db).real() / dt_;
    }
    case EnvelopeKind::l2: {
      // P1 mass matrix: dt * (2/3 on the interior diagonal, 1/3 at the ends, 1/6 off-diagonal)
      double diag = (2.0 / 3.0) * a.dot(b).real();
      diag -= (1.0 / 3.0) * ((std::conj(a[0]) * b[0]).real() + (std::conj(a[n - 1]) * b[n - 1]).real());
      const double off = a.head(n - 1).dot(b.tail(n - 1)).real() + a.tail(n - 1).dot(b.head(n - 1)).real();
      return dt_ * (diag + off / 6.0);
    }
    case EnvelopeKind::kernel_weighted: {
      const Envelope kb = kernel_->factor.solve(b);
      return a.dot(kb).real();
    }
  }
  return 0.0;
}

double EnvelopeSpace::norm(Eigen::Ref<const Envelope> a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

void EnvelopeSpace::riesz_in_place(Eigen::Ref<Envelope> c) const {
  switch (kind_) {
    case EnvelopeKind::scalar:
      return;
    case EnvelopeKind::h1_0: {
      const Eigen::Index m = n_nodes_ - 2;
      const Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, 2.0 / dt_);
      c[0] = 0.0;
      c[n_nodes_ - 1] = 0.0;
      solve_tridiagonal(diag, -1.0 / dt_, c.segment(1, m));
      return;
    }
    case EnvelopeKind::l2: {
      Eigen::VectorXd diag = Eigen::VectorXd::Constant(n_nodes_, 2.0 * dt_ / 3.0);
      diag[0] = diag[n_nodes_ - 1] = dt_ / 3.0;
      if (n_nodes_ == 1) diag[0] = dt_;
      solve_tridiagonal(diag, dt_ / 6.0, c);
      return;
    }
    case EnvelopeKind::kernel_weighted: {
      const Envelope r = kernel_->kernel * c;
      c = r;
      return;
    }
  }
}

Eigen::VectorXd EnvelopeSpace::inner_columns(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) const {
  Eigen::VectorXd out(a.cols());
  if (kind_ != EnvelopeKind::kernel_weighted) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) out[k] = inner(a.col(k), b.col(k));
    return out;
  }
  Eigen::MatrixXd re = b.real();
  Eigen::MatrixXd im = b.imag();
  kernel_->factor.solveInPlace(re);
  kernel_->factor.solveInPlace(im);
  for (Eigen::Index k = 0; k < a.cols(); ++k) out[k] = a.col(k).real().dot(re.col(k)) + a.col(k).imag().dot(im.col(k));
  return out;
}

void EnvelopeSpace::riesz_columns(Eigen::MatrixXcd& c) const {
  if (kind_ != EnvelopeKind::kernel_weighted) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) riesz_in_place(c.col(k));
    return;
  }
  const Eigen::MatrixXd re = kernel_->kernel * c.real();
  const Eigen::MatrixXd im = kernel_->kernel * c.imag();
  c.real() = re;
  c.imag() = im;
}

const Eigen::LLT<Eigen::MatrixXd>& EnvelopeSpace::kernel_factor() const {
  if (!kernel_) throw ConfigError("envelope space has no kernel");
  return kernel_->factor;
}

void ControlMeasure::check(const EnvelopeSpace& space) const {
  if (atoms.cols() != grid.size()) throw ConfigError("measure atom count does not match its grid");
  if (atoms.rows() != space.n_nodes()) throw ConfigError("measure envelopes do not match the envelope space");
  if (!atoms.allFinite()) throw InputError("measure has non-finite coefficients");
  if (space.kind() == EnvelopeKind::h1_0 && atoms.cols() > 0) {
    if (atoms.row(0).cwiseAbs().maxCoeff() != 0.0 || atoms.row(atoms.rows() - 1).cwiseAbs().maxCoeff() != 0.0)
      throw ConfigError("h1_0 envelopes must vanish at both endpoints");
  }
}

void HuberParams::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("Huber theta must be positive");
}

double envelope_inner(const EnvelopeSpace& space, const Envelope& a, const Envelope& b) {
  space.check(a);
  space.check(b);
  return space.inner(a, b);
}

Eigen::VectorXd atom_norms(const ControlMeasure& u, const EnvelopeSpace& space) {
  return space.inner_columns(u.atoms, u.atoms).cwiseMax(0.0).cwiseSqrt();
}

double measure_norm(const ControlMeasure& u, const EnvelopeSpace& space) { return atom_norms(u, space).sum(); }

double measure_inner(const ControlMeasure& a, const ControlMeasure& b, const EnvelopeSpace& space) {
  return space.inner_columns(a.atoms, b.atoms).sum();
}

double huber(double norm, const HuberParams& p) {
  return norm > p.theta ? norm - 0.5 * p.theta : norm * norm / (2.0 * p.theta);
}

double huber_scale(double norm, const HuberParams& p) {
  p.validate();
  return norm > p.theta ? 1.0 / norm : 1.0 / p.theta;
}

double huber_value(const ControlMeasure& u, const EnvelopeSpace& space, const HuberParams& p) {
  p.validate();
  double acc = 0.0;
  for (double n : atom_norms(u, space)) acc += huber(n, p);
  return acc;
}

std::vector<Eigen::Index> support(const ControlMeasure& u, const EnvelopeSpace& space, const HuberParams& p) {
  std::vector<Eigen::Index> out;
  const Eigen::VectorXd norms = atom_norms(u, space);
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k)
    if (norms[k] > p.theta) out.push_back(k);
  return out;
}

ControlMeasure random_initial_control(const FrequencyGrid& grid, const EnvelopeSpace& space, const Envelope& base,
                                      std::uint64_t seed) {
  grid.validate();
  space.check(base);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  ControlMeasure u = ControlMeasure::zeros(grid, space);
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) u.atoms.col(k) = std::polar(1.0, phase(rng)) * base;
  return u;
}

Envelope half_sine_envelope(const EnvelopeSpace& space, double norm) {
  Envelope e(space.n_nodes());
  if (!space.is_time_dependent()) {
    e[0] = norm;
    return e;
  }
  const Eigen::Index n = space.n_nodes();
  for (Eigen::Index j = 0; j < n; ++j)
    e[j] = std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n - 1));
  e[0] = 0.0;
  e[n - 1] = 0.0;
  if (space.kind() == EnvelopeKind::kernel_weighted) e = (space.kernel() * e).eval();
  return e * (norm / space.norm(e));
}

void write_measure_csv(const std::filesystem::path& path, const ControlMeasure& u) {
  std::ostringstream out;
  out << (u.grid.is_tensor() ? "omega,t_center,node,re,im\n" : "omega,node,re,im\n");
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) {
    for (Eigen::Index j = 0; j < u.atoms.rows(); ++j) {
      out << io::fmt(u.grid.omega(k)) << ',';
      if (u.grid.is_tensor()) out << io::fmt(u.grid.center(k)) << ',';
      out << j << ',' << io::fmt(u.atoms(j, k).real()) << ',' << io::fmt(u.atoms(j, k).imag()) << '\n';
    }
  }
  io::write_atomic(path, out.str());
}

ControlMeasure read_measure_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const bool tensor = text.rfind("omega,t_center", 0) == 0;
  const auto rows = io::read_numeric_csv(path);
  const std::size_t width = tensor ? 5 : 4;
  if (rows.empty()) throw InputError(path.string() + ": empty measure file");
  ControlMeasure u;
  Eigen::Index n_nodes = 0;
  for (const auto& r : rows) {
    if (r.size() != width) throw InputError(path.string() + ": wrong column count");
    n_nodes = std::max(n_nodes, static_cast<Eigen::Index>(r[width - 3]) + 1);
  }
  if (rows.size() % static_cast<std::size_t>(n_nodes) != 0) throw InputError(path.string() + ": ragged measure file");
  const std::size_t n_atoms = rows.size() / static_cast<std::size_t>(n_nodes);
  u.atoms.resize(n_nodes, static_cast<Eigen::Index>(n_atoms));
  for (std::size_t a = 0; a < n_atoms; ++a) {
    const auto& first = rows[a * static_cast<std::size_t>(n_nodes)];
    if (u.grid.omegas.empty() || first[0] != u.grid.omegas.back()) u.grid.omegas.push_back(first[0]);
    if (tensor && (u.grid.omegas.size() == 1)) u.grid.centers.push_back(first[1]);
    for (Eigen::Index j = 0; j < n_nodes; ++j) {
      const auto& r = rows[a * static_cast<std::size_t>(n_nodes) + static_cast<std::size_t>(j)];
      if (static_cast<Eigen::Index>(r[width - 3]) != j) throw InputError(path.string() + ": nodes out of order");
      u.atoms(j, static_cast<Eigen::Index>(a)) = cplx(r[width - 2], r[width - 1]);
    }
  }
  if (tensor) {
    // centers were collected while the first frequency repeated
    std::vector<double> uniq;
    for (double c : u.grid.centers)
      if (uniq.empty() || c != uniq.back()) uniq.push_back(c);
    u.grid.centers = uniq;
  }
  u.grid.validate();
  if (u.grid.size() != u.n_atoms()) throw InputError(path.string() + ": atoms do not form a grid");
  return u;
}

void write_measure_summary_csv(const std::filesystem::path& path, const ControlMeasure& u,
                               const EnvelopeSpace& space) {
  const Eigen::VectorXd norms = atom_norms(u, space);
  std::ostringstream out;
  out << (u.grid.is_tensor() ? "omega,t_center,norm\n" : "omega,norm\n");
  for (Eigen::Index k = 0; k < u.n_atoms(); ++k) {
    out << io::fmt(u.grid.omega(k)) << ',';
    if (u.grid.is_tensor()) out << io::fmt(u.grid.center(k)) << ',';
    out << io::fmt(norms[k]) << '\n';
  }
  io::write_atomic(path, out.str());
}

}  // namespace sparseqc
