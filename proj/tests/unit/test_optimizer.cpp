#include <gtest/gtest.h>

#include <cmath>

#include "sparseqc/errors.hpp"
#include "sparseqc/optimizer.hpp"
#include "test_support.hpp"

using namespace sparseqc;
using testing_support::cplx;

namespace {

Problem small_three_level(double alpha) {
  const TimeGrid tg(30.0, 300);
  Problem p;
  p.model = build_three_level();
  p.op = std::make_shared<SynthesisOperator>(SynthesisKind::two_scale, FrequencyGrid::uniform(2.0, 5.0, 13), tg,
                                             EnvelopeSpace::h1_0(tg));
  p.alpha = alpha;
  p.huber.theta = 1e-4;
  return p;
}

}  // namespace

TEST(Lbfgs, ConvexQuadraticExact) {
  const int n = 8;
  std::mt19937_64 rng(50);
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(n, n);
  Eigen::MatrixXd a = q * q.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Random(n);
  // real parameters only: the imaginary parts stay at zero
  SmoothObjective obj;
  obj.inner = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) { return (x.adjoint() * y)(0, 0).real(); };
  obj.value_grad = [&](const Eigen::MatrixXcd& x, Eigen::MatrixXcd& g, ObjectiveBreakdown& parts) {
    const Eigen::VectorXd xr = x.real();
    g = (a * xr - b).cast<cplx>();
    parts.total = 0.5 * xr.dot(a * xr) - b.dot(xr);
    return parts.total;
  };
  // near-exact line search: L-BFGS with full memory then terminates like CG
  LbfgsOptions o;
  o.grad_tol_rel = 1e-9;
  o.memory = n;
  o.c1 = 1e-6;
  o.c2 = 1e-4;
  const LbfgsOutcome r = lbfgs(obj, Eigen::MatrixXcd::Zero(n, 1), o);
  const Eigen::VectorXd xstar = a.ldlt().solve(b);
  EXPECT_LE((r.x.real() - xstar).norm(), 1e-8);
  EXPECT_LE(static_cast<int>(r.log.size()) - 1, n);
  EXPECT_EQ(r.termination, Termination::converged);
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_LE(r.log[i].objective, r.log[i - 1].objective);
}

TEST(Lbfgs, NonconvexRosenbrock) {
  SmoothObjective obj;
  obj.inner = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) { return (x.adjoint() * y)(0, 0).real(); };
  obj.value_grad = [](const Eigen::MatrixXcd& x, Eigen::MatrixXcd& g, ObjectiveBreakdown& parts) {
    const double u = x(0, 0).real(), v = x(1, 0).real();
    g.resize(2, 1);
    g(0, 0) = -2 * (1 - u) - 400 * u * (v - u * u);
    g(1, 0) = 200 * (v - u * u);
    parts.total = (1 - u) * (1 - u) + 100 * (v - u * u) * (v - u * u);
    return parts.total;
  };
  Eigen::MatrixXcd x0(2, 1);
  x0 << -1.2, 1.0;
  LbfgsOptions o;
  o.grad_tol_rel = 1e-10;
  const LbfgsOutcome r = lbfgs(obj, x0, o);
  EXPECT_NEAR(r.x(0, 0).real(), 1.0, 1e-6);
  EXPECT_NEAR(r.x(1, 0).real(), 1.0, 1e-6);
}

TEST(Lbfgs, OptionValidation) {
  LbfgsOptions o;
  o.c1 = 0.95;
  EXPECT_THROW(o.validate(), ConfigError);
  o = LbfgsOptions{};
  o.memory = 0;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Minimize, ThreeLevelSmallRunDecreasesAndIsDeterministic) {
  const Problem p = small_three_level(0.05);
  const Envelope base = half_sine_envelope(p.space(), 0.1);
  LbfgsOptions o;
  o.max_iters = 150;
  o.seed = 3;
  const ControlMeasure u0 = random_initial_control(p.op->grid(), p.space(), base, o.seed);
  const RunResult a = minimize(p, u0, o);
  const RunResult b = minimize(p, u0, o);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].objective, b.log[i].objective);
  for (std::size_t i = 1; i < a.log.size(); ++i) EXPECT_LE(a.log[i].objective, a.log[i - 1].objective);
  EXPECT_LT(a.breakdown.total, a.log.front().objective);
  EXPECT_LT(a.breakdown.terminal_term, 0.1);
}

TEST(Minimize, SingleStageSweepEqualsMinimize) {
  const Problem p = small_three_level(0.05);
  const Envelope base = half_sine_envelope(p.space(), 0.1);
  LbfgsOptions o;
  o.max_iters = 40;
  o.seed = 1;
  const auto stages = continuation_sweep(p, {0.05}, base, o);
  ASSERT_EQ(stages.size(), 1u);
  const RunResult direct = minimize(p, random_initial_control(p.op->grid(), p.space(), base, 1), o);
  EXPECT_EQ(stages[0].result.breakdown.total, direct.breakdown.total);
  EXPECT_FALSE(stages[0].warm_started);
}

TEST(Minimize, RestartsKeepBestAndIgnoreJobCount) {
  const Problem p = small_three_level(0.05);
  const Envelope base = half_sine_envelope(p.space(), 0.1);
  LbfgsOptions o;
  o.max_iters = 30;
  const RunResult serial = minimize_with_restarts(p, base, 3, o, 1);
  const RunResult parallel = minimize_with_restarts(p, base, 3, o, 3);
  EXPECT_EQ(serial.breakdown.total, parallel.breakdown.total);
  EXPECT_EQ(serial.seed, parallel.seed);
  for (int s = 0; s < 3; ++s) {
    LbfgsOptions os = o;
    os.seed = static_cast<std::uint64_t>(s);
    const RunResult r = minimize(p, random_initial_control(p.op->grid(), p.space(), base, os.seed), os);
    EXPECT_LE(serial.breakdown.total, r.breakdown.total);
  }
}
