// Acceptance checks 1-9.  Usage: acceptance [--out DIR] [N ...]
// With no numbers every criterion runs.  Prints one PASS/FAIL line each and
// exits non-zero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "../unit/test_support.hpp"
#include "sparseqc/experiments.hpp"
#include "sparseqc/io.hpp"

using namespace sparseqc;
using testing_support::cplx;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::filesystem::path g_out = "acceptance_out";

// ---------------------------------------------------------------- 1

Verdict unitarity() {
  std::mt19937_64 rng(101);
  struct Case {
    Model model;
    TimeGrid grid;
    double amp;
  };
  TwoPesSpec pes;  // full state grid
  const Case cases[] = {
      {build_three_level(), TimeGrid(100.0, 4095), 2.0},
      {build_two_level(0.0, 1.0), TimeGrid(100.0, 4095), 2.0},
      {build_two_pes(pes), TimeGrid(3000.0, 2047), 0.1},
  };
  double worst_norm = 0.0, worst_back = 0.0;
  for (const Case& c : cases) {
    for (int trial = 0; trial < 100; ++trial) {
      const SampledField f =
          testing_support::random_field(c.grid.n_steps(), c.model.system->n_couplings(), c.amp, rng);
      const StateTrajectory psi = propagate(*c.model.system, f, c.model.psi0, c.grid);
      const Eigen::VectorXd norms = psi.states.colwise().norm().transpose();
      worst_norm = std::max(worst_norm, (norms.array() - 1.0).abs().maxCoeff());
      // identity observable: the adjoint sweep starts from ψ(T) itself
      const Eigen::VectorXcd phi0 = propagate_adjoint(*c.model.system, f, psi.back(), c.grid).at(0);
      worst_back = std::max(worst_back, (phi0 - c.model.psi0).norm());
    }
  }
  return {worst_norm <= 1e-10 && worst_back <= 1e-10,
          fmt("max |‖ψ(t)‖-1| = %.2e, max ‖φ(0)-ψ0‖ = %.2e over 3 models x 100 fields", worst_norm, worst_back)};
}

// ---------------------------------------------------------------- 2

Verdict rabi() {
  const double amp = 0.1, e1 = 0.0, e2 = 1.0;
  const double t_final = std::numbers::pi / (2.0 * amp);
  const Model m = build_two_level(e1, e2);
  const auto& sys = dynamic_cast<const DenseSystem&>(*m.system);
  auto drive = [&](double t) {
    Eigen::VectorXd v(2);
    v << amp * std::cos((e2 - e1) * t), -amp * std::sin((e2 - e1) * t);
    return v;
  };
  auto sample = [&](const TimeGrid& g) {
    Eigen::MatrixXd v(g.n_steps(), 2);
    for (Eigen::Index j = 0; j < g.n_steps(); ++j) v.row(j) = drive(g.midpoint(j)).transpose();
    return SampledField(v);
  };
  const int steps = 2000;
  const TimeGrid g(t_final, steps);
  const Eigen::VectorXcd psi_T = propagate_terminal(sys, sample(g), m.psi0, g);
  // reference: exponential midpoint rule with the full Hamiltonian on a 10x grid
  const double dt = t_final / (10.0 * steps);
  Eigen::VectorXcd ref = m.psi0;
  for (int j = 0; j < 10 * steps; ++j) {
    const Eigen::VectorXd v = drive((j + 0.5) * dt);
    Eigen::MatrixXcd h = sys.h0();
    for (int l = 0; l < sys.n_couplings(); ++l) h += v[l] * sys.coupling(l);
    ref = testing_support::expm_hermitian(h, dt) * ref;
  }
  const double transfer = std::norm(psi_T[1]);
  const double err = (psi_T - ref).norm();
  return {transfer >= 0.999 && err <= 1e-6, fmt("transfer %.9f, terminal error vs 10x reference %.2e", transfer, err)};
}

// ---------------------------------------------------------------- 3

Verdict duality() {
  std::mt19937_64 rng(303);
  const TimeGrid tg(100.0, 1023);
  double worst = 0.0;
  std::string per_kind;
  for (SynthesisKind kind : testing_support::kAllKinds) {
    const auto op = testing_support::make_op(kind, tg, 2.0, 5.0, 20);
    double kind_worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const ControlMeasure u = testing_support::random_measure(*op, 1.0, rng);
      const SampledField f = testing_support::random_field(tg.n_steps(), 1, 1.0, rng);
      const ControlMeasure bf = op->adjoint_synthesize(f);
      const double lhs = measure_inner(bf, u, op->space());
      const double rhs = field_pairing(f, op->synthesize(u), tg);
      // relative to the Cauchy-Schwarz bound, the scale at which roundoff enters
      const double scale = std::sqrt(measure_inner(bf, bf, op->space()) * measure_inner(u, u, op->space()));
      kind_worst = std::max(kind_worst, std::abs(lhs - rhs) / (scale + 1e-300));
    }
    per_kind += fmt(" %s %.1e", to_string(kind).c_str(), kind_worst);
    worst = std::max(worst, kind_worst);
  }
  return {worst <= 1e-10, "max |<B*f,u> - <f,Bu>| / (||B*f|| ||u||):" + per_kind};
}

// ---------------------------------------------------------------- 4

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = gradient_check_matrix(20, 404, true);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0.0;
  std::string where;
  for (const auto& e : entries) {
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      where = e.model + "/" + to_string(e.kind);
    }
  }
  return {worst <= 1e-5 && secs < 300.0 && entries.size() == 12,
          fmt("%zu pairs x 20 directions, max relative error %.2e (%s), %.0f s", entries.size(), worst,
              where.c_str(), secs)};
}

// ---------------------------------------------------------------- 5, 6, 9

struct ThreeLevelRun {
  ScenarioConfig cfg;
  ScenarioOutcome outcome;
};

ThreeLevelRun run_three_level(const std::filesystem::path& out) {
  ScenarioConfig cfg = reference_config("three_level_tf");
  cfg.output_dir = out.string();
  return {cfg, run_scenario(cfg, 1, true)};
}

std::optional<ThreeLevelRun> g_three;

const ThreeLevelRun& three_level() {
  if (!g_three) g_three = run_three_level(g_out / "three_level_tf");
  return *g_three;
}

Verdict reproduction() {
  const ThreeLevelRun& r = three_level();
  const ScenarioMetrics& m = r.outcome.metrics;
  const double cell = (r.cfg.omega_max - r.cfg.omega_min) / static_cast<double>(r.cfg.n_omega - 1);
  bool bohr = m.largest_atoms.size() >= 2 && m.largest_atoms[1][2] > r.cfg.theta;
  if (bohr) {
    const double a = m.largest_atoms[0][0], b = m.largest_atoms[1][0];
    const double lo = std::min(a, b), hi = std::max(a, b);
    bohr = std::abs(lo - 3.0) <= cell && std::abs(hi - 4.0) <= cell;
  }
  std::string atoms;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, m.largest_atoms.size()); ++i)
    atoms += fmt(" %.4f:%.2e", m.largest_atoms[i][0], m.largest_atoms[i][2]);
  const bool pass = m.terminal_term <= 2.5e-2 && m.support_size <= 4 && bohr;
  return {pass, fmt("terminal_term %.3e, support %zu (θ %.0e), largest atoms (ω:norm)%s; two largest near 3 and 4: %s",
                    m.terminal_term, m.support_size, r.cfg.theta, atoms.c_str(), bohr ? "yes" : "no")};
}

Verdict kkt() {
  const ThreeLevelRun& r = three_level();
  const OptimalityReport& k = r.outcome.run.report;
  const double alpha = r.cfg.alpha;
  const bool pass = k.max_dual <= 1.05 * alpha && k.max_alignment <= 0.05 * alpha && k.support_violations.empty();
  return {pass, fmt("max d/α %.4f, max direction residual/α %.2e, off-support violations %zu", k.max_dual / alpha,
                    k.max_alignment / alpha, k.support_violations.size())};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Verdict determinism() {
  const ThreeLevelRun& first = three_level();
  const ThreeLevelRun second = run_three_level(g_out / "three_level_tf_repeat");
  const RunResult& a = first.outcome.run;
  const RunResult& b = second.outcome.run;
  bool same = a.log.size() == b.log.size() && a.seed == b.seed && a.support_size == b.support_size &&
              same_bits(a.breakdown.total, b.breakdown.total) &&
              same_bits(a.breakdown.terminal_term, b.breakdown.terminal_term);
  for (std::size_t i = 0; same && i < a.log.size(); ++i) {
    const IterationRecord &x = a.log[i], &y = b.log[i];
    same = same_bits(x.objective, y.objective) && same_bits(x.terminal_term, y.terminal_term) &&
           same_bits(x.cost_term, y.cost_term) && same_bits(x.grad_norm, y.grad_norm) && same_bits(x.step, y.step);
  }
  same = same && a.control.atoms == b.control.atoms;
  const bool files_equal = io::read_file(g_out / "three_level_tf" / "iterations.csv") ==
                           io::read_file(g_out / "three_level_tf_repeat" / "iterations.csv");
  return {same && files_equal, fmt("%zu iteration records, objectives/gradients/controls bitwise %s, iterations.csv %s",
                                   a.log.size(), same ? "identical" : "DIFFERENT",
                                   files_equal ? "identical" : "DIFFERENT")};
}

// ---------------------------------------------------------------- 7

Verdict structural() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"two_pes_fourier_reduced", "two_pes_two_scale_reduced"}) {
    ScenarioConfig cfg = reference_config(name);
    cfg.output_dir = (g_out / name).string();
    const ScenarioOutcome o = run_scenario(cfg, 1, true);
    pass = pass && o.metrics.band_mass >= 0.6;
    // share of grid atoms inside the bands: what a flat measure would score
    const Problem p = build_problem(cfg);
    ControlMeasure flat = p.op->zero_measure();
    flat.atoms.setOnes();
    const double uniform = band_mass_fraction(flat, p.space(), cfg.analysis.band_centers, cfg.analysis.band_rel_width);
    detail += fmt("%s band mass %.3f (flat measure %.3f), support %zu, terminal %.3e; ", name, o.metrics.band_mass,
                  uniform, o.metrics.support_size, o.metrics.terminal_term);
  }
  ScenarioConfig cfg = reference_config("two_pes_h1_baseline_reduced");
  cfg.output_dir = (g_out / cfg.name).string();
  const ScenarioOutcome o = run_scenario(cfg, 1, true);
  pass = pass && o.metrics.low_frequency_fraction >= 0.6;
  detail += fmt("h1 baseline spectral mass below 1/30: %.3f (terminal %.3e)", o.metrics.low_frequency_fraction,
                o.metrics.terminal_term);
  return {pass, detail};
}

// ---------------------------------------------------------------- 8

Verdict sweep() {
  ScenarioConfig cfg = reference_config("two_pes_fourier_reduced");
  cfg.output_dir = (g_out / "sweep").string();
  const std::vector<double> alphas{cfg.alpha * 0.25, cfg.alpha * 0.5, cfg.alpha, cfg.alpha * 2.0};
  const auto stages = run_sweep(cfg, alphas, true);
  const auto& lo = stages.front().result;
  const auto& hi = stages.back().result;
  std::string rows;
  for (const auto& s : stages)
    rows += fmt(" [α %.2e: support %zu, terminal %.3e]", s.alpha, s.result.support_size, s.result.breakdown.terminal_term);
  const bool pass = stages.size() == 4 && hi.support_size <= lo.support_size &&
                    hi.breakdown.terminal_term >= lo.breakdown.terminal_term;
  return {pass, cfg.name + rows};
}

}  // namespace

int main(int argc, char** argv) {
  io::tune_allocator();
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      const int n = std::atoi(argv[i]);
      if (n < 1 || n > 9) {
        std::fprintf(stderr, "usage: acceptance [--out DIR] [criterion 1-9 ...]\n");
        return 1;
      }
      selected.insert(n);
    }
  }
  if (selected.empty())
    for (int n = 1; n <= 9; ++n) selected.insert(n);
  std::filesystem::create_directories(g_out);

  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
      {1, {"unitarity and reversibility", unitarity}},
      {2, {"resonant two-level transfer", rabi}},
      {3, {"synthesis duality, six kinds", duality}},
      {4, {"adjoint gradient vs finite differences", gradients}},
      {5, {"three-level time-frequency reproduction", reproduction}},
      {6, {"optimality residuals at the three-level optimum", kkt}},
      {7, {"two-PES structural reproduction (slow)", structural}},
      {8, {"alpha continuation trends", sweep}},
      {9, {"determinism of the three-level run", determinism}},
  };
  int failed = 0;
  for (int n : selected) {
    const auto& [title, fn] = criteria.at(n);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s | %s [%.1f s]\n", n, v.pass ? "PASS" : "FAIL", title, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
