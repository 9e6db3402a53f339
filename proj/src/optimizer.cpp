#include "sparseqc/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <future>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "sparseqc/errors.hpp"
#include "sparseqc/io.hpp"

namespace sparseqc {

void LbfgsOptions::validate() const {
  if (memory < 1) throw ConfigError("lbfgs memory must be >= 1");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(grad_tol_rel > 0.0)) throw ConfigError("grad_tol_rel must be positive");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ConfigError("line search needs 0 < c1 < c2 < 1");
  if (max_line_search < 2) throw ConfigError("max_line_search must be >= 2");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

struct Point {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Eigen::MatrixXcd x;
  Eigen::MatrixXcd g;
  ObjectiveBreakdown parts;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db); NaN if it has none.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (db + d2 - d1) / denom;
}

class LineSearch {
 public:
  LineSearch(const SmoothObjective& obj, const LbfgsOptions& opts, const Point& start, const Eigen::MatrixXcd& dir,
             int& evals)
      : obj_(obj), opts_(opts), start_(start), dir_(dir), evals_(evals) {}

  // Strong Wolfe search; on budget exhaustion falls back to the best point
  // with sufficient decrease, if any.
  std::optional<Point> run(double a0) {
    Point prev;
    prev.alpha = 0.0;
    prev.f = start_.f;
    prev.slope = start_.slope;
    double a = a0;
    for (int i = 0; i < opts_.max_line_search; ++i) {
      Point cur = eval(a);
      if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur);
      if (std::abs(cur.slope) <= -opts_.c2 * start_.slope) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      a *= 2.0;
    }
    return fallback();
  }

 private:
  bool armijo(const Point& p) const {
    return std::isfinite(p.f) && p.f <= start_.f + opts_.c1 * p.alpha * start_.slope;
  }

  Point eval(double a) {
    Point p;
    p.alpha = a;
    p.x = start_.x + a * dir_;
    try {
      p.f = obj_.value_grad(p.x, p.g, p.parts);
    } catch (const NumericalError&) {
      p.f = std::numeric_limits<double>::infinity();
    } catch (const InputError&) {
      p.f = std::numeric_limits<double>::infinity();
    }
    ++evals_;
    ++used_;
    if (std::isfinite(p.f)) {
      p.slope = obj_.inner(p.g, dir_);
      if (armijo(p) && (!best_ || p.f < best_->f)) best_ = p;
    } else {
      p.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return p;
  }

  std::optional<Point> zoom(Point lo, Point hi) {
    while (used_ < opts_.max_line_search) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double width = std::abs(hi.alpha - lo.alpha);
      if (width <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      double a = std::isfinite(hi.f) ? cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope)
                                     : std::numeric_limits<double>::quiet_NaN();
      if (!(a >= left + 0.1 * width && a <= left + 0.9 * width)) a = 0.5 * (lo.alpha + hi.alpha);
      Point cur = eval(a);
      if (!armijo(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -opts_.c2 * start_.slope) return cur;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return fallback();
  }

  std::optional<Point> fallback() const {
    if (best_ && best_->f < start_.f) return best_;
    return std::nullopt;
  }

  const SmoothObjective& obj_;
  const LbfgsOptions& opts_;
  const Point& start_;
  const Eigen::MatrixXcd& dir_;
  int& evals_;
  int used_ = 0;
  std::optional<Point> best_;
};

struct Pair {
  Eigen::MatrixXcd s;
  Eigen::MatrixXcd y;
  double rho;
};

Eigen::MatrixXcd two_loop(const SmoothObjective& obj, const std::deque<Pair>& mem, const Eigen::MatrixXcd& g) {
  Eigen::MatrixXcd q = g;
  std::vector<double> a(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    a[i] = mem[i].rho * obj.inner(mem[i].s, q);
    q -= a[i] * mem[i].y;
  }
  const Pair& last = mem.back();
  q *= 1.0 / (last.rho * obj.inner(last.y, last.y));
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double b = mem[i].rho * obj.inner(mem[i].y, q);
    q += (a[i] - b) * mem[i].s;
  }
  return -q;
}

}  // namespace

LbfgsOutcome lbfgs(const SmoothObjective& obj, Eigen::MatrixXcd x0, const LbfgsOptions& opts) {
  opts.validate();
  LbfgsOutcome out;
  Point cur;
  cur.x = std::move(x0);
  cur.f = obj.value_grad(cur.x, cur.g, cur.parts);
  out.evaluations = 1;
  if (!std::isfinite(cur.f)) throw NumericalError("objective is not finite at the initial point");
  double gnorm = std::sqrt(std::max(0.0, obj.inner(cur.g, cur.g)));
  double gmax = gnorm;
  out.log.push_back({0, cur.f, cur.parts.terminal_term, cur.parts.cost_term, gnorm, 0.0});

  std::deque<Pair> mem;
  out.termination = Termination::max_iters;
  for (int k = 0; k < opts.max_iters; ++k) {
    if (gmax == 0.0 || gnorm / gmax < opts.grad_tol_rel) {
      out.termination = Termination::converged;
      break;
    }
    std::optional<Point> next;
    for (int attempt = 0; attempt < 2 && !next; ++attempt) {
      Eigen::MatrixXcd dir;
      double a0 = 1.0;
      if (!mem.empty()) {
        dir = two_loop(obj, mem, cur.g);
        cur.slope = obj.inner(cur.g, dir);
        if (!(cur.slope < 0.0)) mem.clear();
      }
      if (mem.empty()) {
        dir = -cur.g;
        cur.slope = -gnorm * gnorm;
        a0 = std::min(1.0, 1.0 / gnorm);
      }
      LineSearch ls(obj, opts, cur, dir, out.evaluations);
      next = ls.run(a0);
      if (!next && mem.empty()) break;
      mem.clear();
    }
    if (!next) {
      out.termination = Termination::line_search_failed;
      break;
    }
    Pair p{next->x - cur.x, next->g - cur.g, 0.0};
    const double sy = obj.inner(p.s, p.y);
    const double ss = obj.inner(p.s, p.s);
    const double yy = obj.inner(p.y, p.y);
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }
    const double step = std::sqrt(std::max(0.0, ss));
    cur = std::move(*next);
    gnorm = std::sqrt(std::max(0.0, obj.inner(cur.g, cur.g)));
    gmax = std::max(gmax, gnorm);
    out.log.push_back({k + 1, cur.f, cur.parts.terminal_term, cur.parts.cost_term, gnorm, step});
  }
  if (out.termination == Termination::max_iters && gmax > 0.0 && gnorm / gmax < opts.grad_tol_rel)
    out.termination = Termination::converged;
  out.x = std::move(cur.x);
  out.value = cur.f;
  out.grad_norm = gnorm;
  out.parts = cur.parts;
  return out;
}

RunResult minimize(const Problem& problem, const ControlMeasure& u0, const LbfgsOptions& opts) {
  problem.validate();
  u0.check(problem.space());
  const auto t0 = std::chrono::steady_clock::now();
  const FrequencyGrid& grid = u0.grid;
  const EnvelopeSpace& space = problem.space();
  const bool real_only = problem.op->kind() == SynthesisKind::identity;

  // Kernel spaces are optimized in whitened coordinates u = L z (K = L L^T),
  // where the U inner product is Euclidean and the gradient is L^{-1} g_u.
  const bool whiten = space.kind() == EnvelopeKind::kernel_weighted;
  auto apply_l = [&](Eigen::MatrixXcd z) {
    const auto l = space.kernel_factor().matrixL();
    const Eigen::MatrixXd re = l * z.real();
    const Eigen::MatrixXd im = l * z.imag();
    z.real() = re;
    z.imag() = im;
    return z;
  };
  auto solve_l = [&](Eigen::MatrixXcd u) {
    Eigen::MatrixXd re = u.real();
    Eigen::MatrixXd im = u.imag();
    space.kernel_factor().matrixL().solveInPlace(re);
    space.kernel_factor().matrixL().solveInPlace(im);
    u.real() = re;
    u.imag() = im;
    return u;
  };

  SmoothObjective obj;
  obj.inner = [&](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    if (whiten) return (a.real().cwiseProduct(b.real()) + a.imag().cwiseProduct(b.imag())).sum();
    return space.inner_columns(a, b).sum();
  };
  obj.value_grad = [&](const Eigen::MatrixXcd& x, Eigen::MatrixXcd& g, ObjectiveBreakdown& parts) {
    const GradientResult gr = evaluate_with_gradient(problem, ControlMeasure{grid, whiten ? apply_l(x) : x});
    g = whiten ? solve_l(gr.gradient.atoms) : gr.gradient.atoms;
    // Nodal baselines act through the real part only; keep iterates real.
    if (real_only) g = g.real().cast<std::complex<double>>();
    parts = gr.breakdown;
    return gr.breakdown.total;
  };
  Eigen::MatrixXcd x0 = whiten ? solve_l(u0.atoms) : u0.atoms;
  if (real_only) x0 = x0.real().cast<std::complex<double>>();
  LbfgsOutcome res = lbfgs(obj, std::move(x0), opts);
  if (whiten) res.x = apply_l(std::move(res.x));

  RunResult r;
  r.control = ControlMeasure{grid, std::move(res.x)};
  r.breakdown = res.parts;
  r.log = std::move(res.log);
  r.termination = res.termination;
  r.seed = opts.seed;
  r.evaluations = res.evaluations;
  r.report = optimality_report(problem, r.control);
  r.support_size = r.report.support.size();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ControlMeasure initial_control(const Problem& problem, const Envelope& base, std::uint64_t seed) {
  ControlMeasure u = random_initial_control(problem.op->grid(), problem.space(), base, seed);
  if (problem.op->kind() == SynthesisKind::identity) {
    // real field: keep only the sign of the random phase (u = 0 can be stationary)
    const double sign = u.atoms.col(0).real().dot(base.real()) >= 0.0 ? 1.0 : -1.0;
    u.atoms.col(0) = (sign * base.real()).cast<std::complex<double>>();
  }
  return u;
}

RunResult minimize_with_restarts(const Problem& problem, const Envelope& base, int restarts,
                                 const LbfgsOptions& opts, int jobs) {
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  auto one = [&](int r) {
    LbfgsOptions o = opts;
    o.seed = opts.seed + static_cast<std::uint64_t>(r);
    return minimize(problem, initial_control(problem, base, o.seed), o);
  };
  std::vector<RunResult> results(static_cast<std::size_t>(restarts));
  if (jobs == 1) {
    for (int r = 0; r < restarts; ++r) results[r] = one(r);
  } else {
    for (int first = 0; first < restarts; first += jobs) {
      std::vector<std::future<RunResult>> batch;
      for (int r = first; r < std::min(restarts, first + jobs); ++r)
        batch.push_back(std::async(std::launch::async, one, r));
      for (std::size_t i = 0; i < batch.size(); ++i) results[first + i] = batch[i].get();
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].breakdown.total < results[best].breakdown.total) best = i;
  return std::move(results[best]);
}

std::vector<SweepStage> continuation_sweep(const Problem& problem, const std::vector<double>& alphas,
                                           const Envelope& base, const LbfgsOptions& opts) {
  if (alphas.empty()) throw ConfigError("continuation sweep needs at least one alpha");
  std::vector<SweepStage> stages;
  Problem stage_problem = problem;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    stage_problem.alpha = alphas[i];
    LbfgsOptions o = opts;
    o.seed = opts.seed + i;
    SweepStage st;
    st.alpha = alphas[i];
    st.warm_started = !stages.empty();
    const ControlMeasure start =
        st.warm_started ? stages.back().result.control : initial_control(stage_problem, base, o.seed);
    try {
      st.result = minimize(stage_problem, start, o);
      if (st.warm_started && st.result.termination == Termination::line_search_failed &&
          st.result.log.size() <= 1)
        throw NumericalError("no progress from the warm start");
    } catch (const NumericalError& e) {
      std::cerr << "sweep stage alpha=" << alphas[i] << " failed (" << e.what() << "); restarting from random\n";
      st.warm_started = false;
      st.result = minimize(stage_problem, initial_control(stage_problem, base, o.seed), o);
    }
    stages.push_back(std::move(st));
  }
  return stages;
}

void write_iteration_log_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& log) {
  std::ostringstream os;
  os << "iter,objective,terminal_term,cost_term,grad_norm,step\n";
  for (const auto& r : log)
    os << r.iter << ',' << io::fmt(r.objective) << ',' << io::fmt(r.terminal_term) << ',' << io::fmt(r.cost_term)
       << ',' << io::fmt(r.grad_norm) << ',' << io::fmt(r.step) << '\n';
  io::write_atomic(path, os.str());
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepStage>& stages) {
  std::ostringstream os;
  os << "alpha,terminal_term,support_size,measure_norm\n";
  for (const auto& s : stages)
    os << io::fmt(s.alpha) << ',' << io::fmt(s.result.breakdown.terminal_term) << ',' << s.result.support_size << ','
       << io::fmt(s.result.report.measure_norm) << '\n';
  io::write_atomic(path, os.str());
}

}  // namespace sparseqc
