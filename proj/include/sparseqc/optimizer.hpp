#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparseqc/control.hpp"
#include "sparseqc/objective.hpp"

namespace sparseqc {

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 5000;
  /// Stop once ||∇j(u_k)|| / max_{i<=k} ||∇j(u_i)|| drops below this.
  double grad_tol_rel = 1e-5;
  double c1 = 1e-4;
  double c2 = 0.9;
  /// Objective evaluations allowed per line search.
  int max_line_search = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double terminal_term = 0.0;
  double cost_term = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

enum class Termination { converged, max_iters, line_search_failed };

std::string to_string(Termination t);

/// Smooth objective on coefficient matrices with its own inner product; the
/// gradient must be the Riesz representative in that inner product.
struct SmoothObjective {
  std::function<double(const Eigen::MatrixXcd& x, Eigen::MatrixXcd& grad, ObjectiveBreakdown& parts)> value_grad;
  std::function<double(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b)> inner;
};

struct LbfgsOutcome {
  Eigen::MatrixXcd x;
  double value = 0.0;
  double grad_norm = 0.0;
  ObjectiveBreakdown parts;
  std::vector<IterationRecord> log;
  Termination termination = Termination::max_iters;
  int evaluations = 0;
};

/// Limited-memory BFGS with a strong-Wolfe line search (cubic interpolation).
/// A non-descent two-loop direction discards the memory and falls back to
/// steepest descent.
LbfgsOutcome lbfgs(const SmoothObjective& objective, Eigen::MatrixXcd x0, const LbfgsOptions& opts);

struct RunResult {
  ControlMeasure control;
  ObjectiveBreakdown breakdown;
  OptimalityReport report;
  std::vector<IterationRecord> log;
  Termination termination = Termination::max_iters;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  int evaluations = 0;
  std::size_t support_size = 0;
};

RunResult minimize(const Problem& problem, const ControlMeasure& u0, const LbfgsOptions& opts);

/// Random-phase start around `base`; identity baselines get the real base
/// with a seed-dependent sign.
ControlMeasure initial_control(const Problem& problem, const Envelope& base, std::uint64_t seed);

/// Runs `restarts` random-phase starts (seeds opts.seed, opts.seed + 1, ...)
/// around `base` and keeps the lowest objective.  `jobs` > 1 runs starts
/// concurrently; the selection is independent of scheduling.
RunResult minimize_with_restarts(const Problem& problem, const Envelope& base, int restarts,
                                 const LbfgsOptions& opts, int jobs = 1);

struct SweepStage {
  double alpha = 0.0;
  RunResult result;
  bool warm_started = false;
};

/// Solves at alphas[0] from a random-phase start and warm-starts every later
/// stage from the previous solution.  A failed stage is logged to stderr and
/// retried from a fresh random start.
std::vector<SweepStage> continuation_sweep(const Problem& problem, const std::vector<double>& alphas,
                                           const Envelope& base, const LbfgsOptions& opts);

/// CSV (iter, objective, terminal_term, cost_term, grad_norm, step).
void write_iteration_log_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& log);

/// CSV (alpha, terminal_term, support_size, measure_norm).
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepStage>& stages);

}  // namespace sparseqc
