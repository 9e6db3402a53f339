#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sparseqc/dynamics.hpp"
#include "sparseqc/errors.hpp"
#include "sparseqc/models.hpp"
#include "test_support.hpp"

using namespace sparseqc;

TEST(ThreeLevel, MatricesAndGaps) {
  const Model m = build_three_level();
  const auto& sys = dynamic_cast<const DenseSystem&>(*m.system);
  EXPECT_EQ(sys.coupling(0)(0, 1), 0.0);
  EXPECT_EQ(sys.coupling(0)(0, 2), 1.0);
  EXPECT_EQ(sys.coupling(0)(1, 2), 1.0);
  std::vector<double> gaps;
  for (const auto& [label, w] : eigen_gaps(sys)) gaps.push_back(w);
  std::sort(gaps.begin(), gaps.end());
  ASSERT_EQ(gaps.size(), 3u);
  EXPECT_NEAR(gaps[0], 1.0, 1e-12);
  EXPECT_NEAR(gaps[1], 3.0, 1e-12);
  EXPECT_NEAR(gaps[2], 4.0, 1e-12);
  EXPECT_NEAR(m.psi0.dot(m.system->observable_apply(m.psi0)).real(), 1.0, 1e-15);
  EXPECT_TRUE(m.system->observable_is_projector());
}

TEST(TwoLevel, GapAndPopulationsAtZeroField) {
  const Model m = build_two_level(0.0, 3.0);
  const auto gaps = eigen_gaps(dynamic_cast<const DenseSystem&>(*m.system));
  ASSERT_EQ(gaps.size(), 1u);
  EXPECT_NEAR(gaps[0].second, 3.0, 1e-12);
  EXPECT_EQ(m.system->n_couplings(), 2);
  const TimeGrid g(7.0, 70);
  const StateTrajectory tr = propagate(*m.system, SampledField::zeros(70, 2), m.psi0, g);
  for (Eigen::Index j = 0; j < tr.n_nodes(); ++j) EXPECT_NEAR(std::norm(tr.at(j)[0]), 1.0, 1e-13);
  EXPECT_THROW(build_two_level(1.0, 1.0), ConfigError);
}

TEST(TwoPes, CalibratedGaps) {
  const auto gaps = eigen_gaps(TwoPesSpec{});
  ASSERT_EQ(gaps.size(), 2u);
  EXPECT_NEAR(gaps[0].second, 0.074, 1e-3);
  EXPECT_NEAR(gaps[1].second, 0.048, 1e-3);
  TwoPesSpec reduced;
  reduced.n_x = 128;
  const auto rg = eigen_gaps(reduced);
  ASSERT_EQ(rg.size(), 2u);
  EXPECT_NEAR(rg[0].second, 0.074, 1e-3);
  EXPECT_NEAR(rg[1].second, 0.048, 1e-3);
}

TEST(TwoPes, InitialStateIsLeftWellGroundState) {
  for (Eigen::Index nx : {Eigen::Index(128), Eigen::Index(256)}) {
    TwoPesSpec spec;
    spec.n_x = nx;
    const Model m = build_two_pes(spec);
    const auto& sys = dynamic_cast<const TwoPesSystem&>(*m.system);
    const TwoPesSurfaces surf = sample_surfaces(calibrate_two_pes(spec));
    const Eigen::Index barrier = barrier_index(surf.lower);
    // Left-well-restricted lower-surface Hamiltonian; lowest eigenvector is the oracle.
    const Eigen::MatrixXd h = sys.surface_hamiltonian(0).topLeftCorner(barrier, barrier);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::VectorXd ground = es.eigenvectors().col(0);
    const double overlap = std::abs(m.psi0.head(barrier).dot(ground.cast<std::complex<double>>()));
    EXPECT_GE(overlap, 0.9) << "n_x=" << nx;
    EXPECT_NEAR(m.psi0.norm(), 1.0, 1e-12);
    EXPECT_NEAR(m.psi0.tail(nx).norm(), 0.0, 1e-15);
  }
}

TEST(TwoPes, ObservableIsProjector) {
  TwoPesSpec spec;
  spec.n_x = 64;
  const Model m = build_two_pes(spec);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXcd a = testing_support::random_vector(128, rng);
    const Eigen::VectorXcd b = testing_support::random_vector(128, rng);
    const Eigen::VectorXcd oa = m.system->observable_apply(a);
    EXPECT_LE((m.system->observable_apply(oa) - oa).norm(), 1e-12 * a.norm());
    EXPECT_NEAR(std::abs(b.dot(oa) - m.system->observable_apply(b).dot(a)), 0.0, 1e-12 * a.norm() * b.norm());
  }
  // psi0 sits in the left well, which the observable penalizes
  EXPECT_NEAR(m.psi0.dot(m.system->observable_apply(m.psi0)).real(), 1.0, 1e-6);
}

TEST(TwoPes, ZeroFieldKeepsSurfacePopulation) {
  TwoPesSpec spec;
  spec.n_x = 64;
  const Model m = build_two_pes(spec);
  const TimeGrid g(500.0, 100);
  const StateTrajectory tr = propagate(*m.system, SampledField::zeros(100, 1), m.psi0, g);
  for (Eigen::Index j = 0; j < tr.n_nodes(); ++j) EXPECT_NEAR(tr.states.col(j).head(64).squaredNorm(), 1.0, 1e-10);
}

TEST(TwoPes, KineticOperatorIsPositiveSemidefinite) {
  const Eigen::MatrixXd lap = dirichlet_laplacian(40, 0.1);
  EXPECT_LE((lap - lap.transpose()).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-lap);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
}

TEST(TwoPes, DriftMatchesDenseExponential) {
  TwoPesSpec spec;
  spec.n_x = 32;
  const Model m = build_two_pes(spec);
  const auto& sys = dynamic_cast<const TwoPesSystem&>(*m.system);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(64, 64);
  h.topLeftCorner(32, 32) = sys.surface_hamiltonian(0).cast<std::complex<double>>();
  h.bottomRightCorner(32, 32) = sys.surface_hamiltonian(1).cast<std::complex<double>>();
  std::mt19937_64 rng(9);
  Eigen::VectorXcd psi = testing_support::random_unit(64, rng);
  const Eigen::VectorXcd ref = testing_support::expm_hermitian(h, 3.0) * psi;
  sys.drift_step(3.0, psi);
  EXPECT_LE((psi - ref).norm(), 1e-12);
  // coupling: full 2x2 block exponential
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(64, 64);
  for (Eigen::Index i = 0; i < 32; ++i) {
    const Eigen::VectorXcd e = Eigen::VectorXcd::Unit(64, i);
    c.col(i) = sys.apply_coupling(0, e);
    c.col(32 + i) = sys.apply_coupling(0, Eigen::VectorXcd::Unit(64, 32 + i));
  }
  Eigen::VectorXcd q = testing_support::random_unit(64, rng);
  const Eigen::VectorXcd cref = testing_support::expm_hermitian(0.7 * c, 0.2) * q;
  const double v = 0.7;
  sys.coupling_step(std::span<const double>(&v, 1), 0.2, q);
  EXPECT_LE((q - cref).norm(), 1e-12);
}

TEST(TwoPes, RejectsBadSpecs) {
  TwoPesSpec spec;
  spec.n_x = 8;
  EXPECT_THROW(build_two_pes(spec), ConfigError);
  spec = TwoPesSpec{};
  spec.mass = -1.0;
  EXPECT_THROW(build_two_pes(spec), ConfigError);
}
