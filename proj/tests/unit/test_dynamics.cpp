#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sparseqc/dynamics.hpp"
#include "sparseqc/errors.hpp"
#include "sparseqc/models.hpp"
#include "test_support.hpp"

using namespace sparseqc;
using testing_support::cplx;

namespace {

TwoPesSpec small_pes() {
  TwoPesSpec s;
  s.n_x = 48;
  return s;
}

std::vector<Model> all_models() {
  return {build_three_level(), build_two_level(0.0, 1.5), build_two_pes(small_pes())};
}

// Reference propagation by the exponential midpoint rule with the full
// Hamiltonian at each substep midpoint; `field(t)` returns all components.
template <typename F>
Eigen::VectorXcd dense_reference(const DenseSystem& sys, const Eigen::VectorXcd& psi0, double t_final, int steps,
                                 F field) {
  const double dt = t_final / steps;
  Eigen::VectorXcd psi = psi0;
  for (int j = 0; j < steps; ++j) {
    const Eigen::VectorXd v = field((j + 0.5) * dt);
    Eigen::MatrixXcd h = sys.h0();
    for (int l = 0; l < sys.n_couplings(); ++l) h += v[l] * sys.coupling(l);
    psi = testing_support::expm_hermitian(h, dt) * psi;
  }
  return psi;
}

template <typename F>
SampledField sample(const TimeGrid& g, int comps, F field) {
  Eigen::MatrixXd v(g.n_steps(), comps);
  for (Eigen::Index j = 0; j < g.n_steps(); ++j) v.row(j) = field(g.midpoint(j)).transpose();
  return SampledField(v);
}

}  // namespace

TEST(Dynamics, ZeroFieldThreeLevelKeepsEigenstate) {
  const Model m = build_three_level();
  const TimeGrid g(100.0, 4095);
  const StateTrajectory tr = propagate(*m.system, SampledField::zeros(g.n_steps(), 1), m.psi0, g);
  const cplx expected = std::exp(cplx(0.0, 2.0 * 100.0));
  EXPECT_NEAR(std::abs(tr.back()[0] - expected), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(tr.back()[0]), 1.0, 1e-10);
}

TEST(Dynamics, UnitarityAndReversibilityAllModels) {
  std::mt19937_64 rng(11);
  for (const Model& m : all_models()) {
    const TimeGrid g(20.0, 400);
    for (int trial = 0; trial < 5; ++trial) {
      const SampledField f = testing_support::random_field(g.n_steps(), m.system->n_couplings(), 2.0, rng);
      const StateTrajectory psi = propagate(*m.system, f, m.psi0, g);
      double worst = 0.0;
      for (Eigen::Index j = 0; j < psi.n_nodes(); ++j) worst = std::max(worst, std::abs(psi.states.col(j).norm() - 1.0));
      EXPECT_LE(worst, 1e-10) << m.name;
      const StateTrajectory back = propagate_adjoint(*m.system, f, psi.back(), g);
      EXPECT_LE((back.at(0) - m.psi0).norm(), 1e-10) << m.name;
    }
  }
}

TEST(Dynamics, AdjointRetracesFreeEvolution) {
  const Model m = build_three_level();
  const TimeGrid g(5.0, 50);
  const SampledField zero = SampledField::zeros(g.n_steps(), 1);
  const StateTrajectory psi = propagate(*m.system, zero, m.psi0, g);
  const StateTrajectory phi = propagate_adjoint(*m.system, zero, psi.back(), g);
  EXPECT_LE((psi.states - phi.states).norm(), 1e-12);
}

TEST(Dynamics, PairingConservedUnderAdjointSweep) {
  std::mt19937_64 rng(3);
  for (const Model& m : all_models()) {
    const TimeGrid g(10.0, 200);
    const SampledField f = testing_support::random_field(g.n_steps(), m.system->n_couplings(), 1.0, rng);
    const StateTrajectory psi = propagate(*m.system, f, m.psi0, g);
    const Eigen::VectorXcd phi_T = testing_support::random_vector(m.system->dimension(), rng);
    const StateTrajectory phi = propagate_adjoint(*m.system, f, phi_T, g);
    const cplx ref = phi.back().dot(psi.back());
    for (Eigen::Index j = 0; j < psi.n_nodes(); ++j)
      ASSERT_LE(std::abs(phi.at(j).dot(psi.at(j)) - ref), 1e-10 * std::max(1.0, std::abs(ref))) << m.name;
  }
}

TEST(Dynamics, SingleStepIsExactlyAdjoint) {
  std::mt19937_64 rng(5);
  for (const Model& m : all_models()) {
    const Eigen::Index n = m.system->dimension();
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> v(static_cast<std::size_t>(m.system->n_couplings()));
      for (double& x : v) x = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
      const Eigen::VectorXcd a = testing_support::random_vector(n, rng);
      const Eigen::VectorXcd b = testing_support::random_vector(n, rng);
      Eigen::VectorXcd fa = a;
      strang_step(*m.system, v, 0.07, fa);
      Eigen::VectorXcd fb = b;
      strang_step_adjoint(*m.system, v, 0.07, fb);
      EXPECT_LE(std::abs(fa.dot(b) - a.dot(fb)), 1e-12 * a.norm() * b.norm()) << m.name;
    }
  }
}

TEST(Dynamics, RabiTransferMatchesDenseReference) {
  const double amp = 0.1;
  const double e1 = 0.0, e2 = 1.0;
  const double t_final = std::numbers::pi / (2.0 * amp);
  const Model m = build_two_level(e1, e2);
  const auto& sys = dynamic_cast<const DenseSystem&>(*m.system);
  auto drive = [&](double t) {
    Eigen::VectorXd v(2);
    v << amp * std::cos((e2 - e1) * t), -amp * std::sin((e2 - e1) * t);
    return v;
  };
  const int steps = 2000;
  const TimeGrid g(t_final, steps);
  const Eigen::VectorXcd psi_T = propagate_terminal(sys, sample(g, 2, drive), m.psi0, g);
  EXPECT_GE(std::norm(psi_T[1]), 0.999);
  const Eigen::VectorXcd ref = dense_reference(sys, m.psi0, t_final, 10 * steps, drive);
  EXPECT_LE((psi_T - ref).norm(), 1e-6);
  // population follows sin^2(|A| t)
  const StateTrajectory tr = propagate(sys, sample(g, 2, drive), m.psi0, g);
  for (Eigen::Index j = 0; j < tr.n_nodes(); j += 100)
    EXPECT_NEAR(std::norm(tr.at(j)[1]), std::pow(std::sin(amp * g.node(j)), 2), 1e-5);
}

TEST(Dynamics, StrangIsSecondOrder) {
  const Model m = build_three_level();
  const double t_final = 10.0;
  auto field = [&](double t) {
    Eigen::VectorXd v(1);
    v << 0.8 * std::sin(std::numbers::pi * t / t_final) * std::cos(3.5 * t);
    return v;
  };
  auto run = [&](int steps) {
    const TimeGrid g(t_final, steps);
    return propagate_terminal(*m.system, sample(g, 1, field), m.psi0, g);
  };
  const Eigen::VectorXcd ref = run(16 * 400);
  const double e1 = (run(200) - ref).norm();
  const double e2 = (run(400) - ref).norm();
  EXPECT_NEAR(e1 / e2, 4.0, 1.0);
}

TEST(Dynamics, CouplingPairingEntries) {
  const Model m = build_three_level();
  StateTrajectory psi{Eigen::MatrixXcd(3, 1)};
  StateTrajectory phi{Eigen::MatrixXcd(3, 1)};
  psi.states.col(0) = Eigen::Vector3cd(1, 0, 0);
  phi.states.col(0) = Eigen::Vector3cd(0, 0, 1);
  EXPECT_NEAR(coupling_pairing(*m.system, psi, phi)(0, 0), 0.0, 1e-15);
  // Re<i e3, -i e3> = -1 with either slot conjugated
  phi.states.col(0) = Eigen::Vector3cd(0, 0, cplx(0, 1));
  EXPECT_NEAR(coupling_pairing(*m.system, psi, phi)(0, 0), -1.0, 1e-15);
  phi.states.col(0) = Eigen::Vector3cd(0, 0, cplx(0, -1));
  EXPECT_NEAR(coupling_pairing(*m.system, psi, phi)(0, 0), 1.0, 1e-15);
  phi.states = psi.states;
  EXPECT_NEAR(coupling_pairing(*m.system, psi, phi)(0, 0), 0.0, 1e-15);
}

TEST(Dynamics, SensitivitySweepMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (const Model& m : all_models()) {
    const TimeGrid g(4.0, 40);
    const int comps = m.system->n_couplings();
    const SampledField f = testing_support::random_field(g.n_steps(), comps, 0.5, rng);
    auto value = [&](const SampledField& x) {
      const Eigen::VectorXcd psi = propagate_terminal(*m.system, x, m.psi0, g);
      return 0.5 * psi.dot(m.system->observable_apply(psi)).real();
    };
    const SensitivitySweep s = sensitivity_sweep(*m.system, f, m.psi0, g, [&](const Eigen::VectorXcd& p) {
      return m.system->observable_apply(p);
    });
    for (Eigen::Index j : {Eigen::Index(0), Eigen::Index(17), g.n_steps() - 1}) {
      for (int l = 0; l < comps; ++l) {
        SampledField p = f, q = f;
        const double h = 1e-5;
        p.values(j, l) += h;
        q.values(j, l) -= h;
        const double fd = (value(p) - value(q)) / (2 * h);
        // pairing * dt is the derivative of Re<phi_T, psi_T> = d(terminal term)
        EXPECT_NEAR(s.pairing(j, l) * g.step(), fd, 1e-8 + 1e-6 * std::abs(fd)) << m.name;
      }
    }
  }
}

TEST(Dynamics, RejectsBadInputs) {
  const Model m = build_three_level();
  const TimeGrid g(1.0, 10);
  EXPECT_THROW(propagate(*m.system, SampledField::zeros(9, 1), m.psi0, g), ConfigError);
  EXPECT_THROW(propagate(*m.system, SampledField::zeros(10, 2), m.psi0, g), ConfigError);
  SampledField bad = SampledField::zeros(10, 1);
  bad.values(3, 0) = std::nan("");
  EXPECT_THROW(propagate(*m.system, bad, m.psi0, g), InputError);
  EXPECT_THROW(propagate(*m.system, SampledField::zeros(10, 1), 2.0 * m.psi0, g), InputError);
}

TEST(QuantumSystem, SelfAdjointAndUnitaryChecks) {
  for (const Model& m : all_models()) {
    EXPECT_LE(self_adjointness_defect(*m.system, 10, 1), 1e-12) << m.name;
    EXPECT_LE(drift_unitarity_defect(*m.system, 0.3, 10, 2), 1e-12) << m.name;
  }
}

TEST(QuantumSystem, DenseSystemRejectsNonHermitian) {
  Eigen::MatrixXcd h0 = Eigen::MatrixXcd::Zero(2, 2);
  h0(0, 1) = 1.0;
  EXPECT_THROW(DenseSystem(h0, {Eigen::MatrixXcd::Identity(2, 2)}, Eigen::MatrixXcd::Identity(2, 2)), ConfigError);
}
