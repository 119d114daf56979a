#include <gtest/gtest.h>

#include "crosspoint/input_models.hpp"
#include "crosspoint/matrix_kernel.hpp"

using namespace crosspoint;

namespace {

SymMatrix diag2(double a, double b) { return SymMatrix::diagonal((VectorXd(2) << a, b).finished()); }

SymMatrix random_psd(int n, std::uint64_t seed, int rank) {
  CounterRng rng(seed, 0);
  MatrixXd g(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = rng.normal();
  return SymMatrix(g * g.transpose());
}

double off_diagonal_max(const MatrixXd& m) {
  MatrixXd o = m;
  o.diagonal().setZero();
  return o.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SymMatrix, SymmetrizesOnConstruction) {
  MatrixXd m(2, 2);
  m << 1.0, 2.0, 0.0, 3.0;
  SymMatrix s(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_DOUBLE_EQ(s(0, 1), 1.0);
  EXPECT_EQ(s.dim(), 2);
}

TEST(SymMatrix, RejectsNonSquare) { EXPECT_THROW(SymMatrix(MatrixXd::Zero(2, 3)), InvalidArgument); }

TEST(LoewnerLeq, Examples) {
  EXPECT_TRUE(loewner_leq(SymMatrix::identity(2), SymMatrix::identity(2), 0.0));
  EXPECT_TRUE(loewner_leq(SymMatrix::zero(2), SymMatrix::identity(2), 0.0));
  EXPECT_FALSE(loewner_leq(diag2(2, 1), diag2(1, 2), 0.0));
  EXPECT_THROW(loewner_leq(SymMatrix::identity(2), SymMatrix::identity(3), 0.0), InvalidArgument);
}

TEST(LoewnerLeq, ReflexiveAndAntisymmetricUpToTolerance) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int n = 1 + static_cast<int>(s % 5);
    const SymMatrix a = random_psd(n, s, n), b = random_psd(n, s + 1000, n);
    EXPECT_TRUE(loewner_leq(a, a, 0.0));
    if (loewner_leq(a, b, 1e-12) && loewner_leq(b, a, 1e-12)) {
      EXPECT_LT((a - b).matrix().cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(SimultaneousDiagonalize, AlreadyDiagonal) {
  const auto r = simultaneous_diagonalize(SymMatrix::identity(2), diag2(1, 3));
  EXPECT_LT(off_diagonal_max(r.transform * MatrixXd::Identity(2, 2) * r.transform.transpose()), 1e-12);
  EXPECT_LT(off_diagonal_max(r.transform * diag2(1, 3).matrix() * r.transform.transpose()), 1e-12);
  EXPECT_GT(std::abs(r.transform.determinant()), 0.0);
}

TEST(SimultaneousDiagonalize, DisjointNullSpaces) {
  const auto r = simultaneous_diagonalize(diag2(1, 0), diag2(0, 1));
  EXPECT_LT(off_diagonal_max(r.transform * diag2(1, 0).matrix() * r.transform.transpose()), 1e-12);
  EXPECT_LT(off_diagonal_max(r.transform * diag2(0, 1).matrix() * r.transform.transpose()), 1e-12);
  EXPECT_GT(std::abs(r.transform.determinant()), 0.0);
}

TEST(SimultaneousDiagonalize, RandomPairsIncludingSingular) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const int n = 1 + static_cast<int>(s % 6);
    const int ra = 1 + static_cast<int>(s % n), rb = 1 + static_cast<int>((s / 6) % n);
    const SymMatrix a = random_psd(n, 3 * s, ra), b = random_psd(n, 3 * s + 1, rb);
    const auto r = simultaneous_diagonalize(a, b);
    const MatrixXd ta = r.transform * a.matrix() * r.transform.transpose();
    const MatrixXd tb = r.transform * b.matrix() * r.transform.transpose();
    const double scale = 1.0 + a.matrix().norm() + b.matrix().norm();
    EXPECT_LT(off_diagonal_max(ta), 1e-10 * scale) << "seed " << s;
    EXPECT_LT(off_diagonal_max(tb), 1e-10 * scale) << "seed " << s;
    EXPECT_GT(std::abs(r.transform.determinant()), 0.0);
    // Round trip A = S⁻¹·diagA·S⁻ᵀ.
    const MatrixXd si = r.transform.inverse();
    const MatrixXd back = si * r.diagA.asDiagonal() * si.transpose();
    EXPECT_LT((back - a.matrix()).norm(), 1e-8 * (1.0 + a.matrix().norm())) << "seed " << s;
  }
}

TEST(SimultaneousDiagonalize, RejectsNonPsd) { EXPECT_THROW(simultaneous_diagonalize(diag2(1, -1), SymMatrix::identity(2)), InvalidArgument); }

TEST(MaxEigGap, Examples) {
  const VectorXd one = VectorXd::Ones(2);
  EXPECT_NEAR(max_eig_gap(random_psd(2, 4, 2), one, one), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(max_eig_gap(SymMatrix::identity(2), (VectorXd(2) << 2, 1).finished(), VectorXd::Zero(2)), 4.0);
  EXPECT_THROW(max_eig_gap(SymMatrix::identity(2), VectorXd::Zero(2), one), InvalidArgument);
}

TEST(MaxEigGap, NonnegativeOnRandomInstances) {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const int n = 1 + static_cast<int>(s % 6);
    CounterRng rng(s, 99);
    VectorXd d1(n), d2(n);
    for (int i = 0; i < n; ++i) {
      d2(i) = 2.0 * rng.uniform();
      d1(i) = d2(i) + 2.0 * rng.uniform();
    }
    const SymMatrix a = random_psd(n, s + 7, 1 + static_cast<int>(s % n));
    const double gap = max_eig_gap(a, d1, d2);
    // Independent check by direct eigensolve.
    const MatrixXd m = d1.asDiagonal() * a.matrix() * d1.asDiagonal() - d2.asDiagonal() * a.matrix() * d2.asDiagonal();
    const double direct = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().maxCoeff();
    EXPECT_NEAR(gap, direct, 1e-10 * (1.0 + std::abs(direct)));
    EXPECT_GE(gap, -1e-10) << "seed " << s;
  }
}

TEST(Helpers, InverseLogdetSqrtProjection) {
  const SymMatrix a = random_psd(3, 11, 3) + SymMatrix::identity(3);
  EXPECT_LT((inverse_pd(a).matrix() * a.matrix() - MatrixXd::Identity(3, 3)).norm(), 1e-12);
  EXPECT_NEAR(logdet_pd(a), std::log(a.matrix().determinant()), 1e-12);
  const MatrixXd r = psd_sqrt(a);
  EXPECT_LT((r * r - a.matrix()).norm(), 1e-12);
  const SymMatrix p = psd_projection(diag2(2.0, -1.0));
  EXPECT_DOUBLE_EQ(p(0, 0), 2.0);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-15);
  EXPECT_THROW(inverse_pd(diag2(1, 0)), NumericalError);
}
