#include <gtest/gtest.h>

#include "crosspoint/crossing_analysis.hpp"
#include "crosspoint/reference_oracles.hpp"

using namespace crosspoint;

namespace {

MatrixXd eye(Eigen::Index n) { return MatrixXd::Identity(n, n); }

EstimatorConfig mc(std::size_t samples, std::uint64_t seed = 7) {
  EstimatorConfig c;
  c.method = Method::monte_carlo;
  c.samples = samples;
  c.seed = seed;
  return c;
}

EstimatorConfig quad() {
  EstimatorConfig c;
  c.method = Method::quadrature;
  c.quad_order = 64;
  return c;
}

// QPSK constellation rotated by `angle`, optionally stretched along one axis.
MixtureInput rotated_constellation(double angle, double stretch) {
  MatrixXd r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  MatrixXd s = MatrixXd::Identity(2, 2);
  s(0, 0) = stretch;
  return linear_transform(qpsk_parallel(2), r * s);
}

}  // namespace

TEST(ClassifySeries, SingleNegToNonnegIsConsistent) {
  const auto g = GainScanGrid::linspace(0.0, 1.0, 6);
  const auto rep = classify_series(g, {-1, -0.5, -0.1, 0.2, 0.3, 0.1}, std::vector<double>(6, 0.01), SeriesKind::diagonal);
  ASSERT_EQ(rep.crossings.size(), 1u);
  EXPECT_EQ(rep.crossings[0].direction, Direction::neg_to_nonneg);
  EXPECT_DOUBLE_EQ(rep.crossings[0].t_a, 0.4);
  EXPECT_DOUBLE_EQ(rep.crossings[0].t_b, 0.6);
  EXPECT_EQ(rep.verdict, Verdict::consistent);
}

TEST(ClassifySeries, NonnegToNegIsViolation) {
  const auto g = GainScanGrid::linspace(0.0, 1.0, 6);
  const auto rep = classify_series(g, {0.5, 0.4, 0.3, -0.2, -0.3, -0.4}, std::vector<double>(6, 0.01), SeriesKind::diagonal);
  EXPECT_EQ(rep.nonneg_to_neg_count(), 1);
  EXPECT_EQ(rep.verdict, Verdict::violation);
}

TEST(ClassifySeries, ChangesInsideErrorBandAreNotCrossings) {
  const auto g = GainScanGrid::linspace(0.0, 1.0, 5);
  const auto rep = classify_series(g, {0.03, -0.03, 0.03, -0.03, 0.03}, std::vector<double>(5, 0.01), SeriesKind::diagonal);
  EXPECT_TRUE(rep.crossings.empty());
  EXPECT_EQ(rep.verdict, Verdict::consistent);
}

TEST(ClassifySeries, NegativeZeroPositive) {
  const auto g = GainScanGrid::linspace(0.0, 1.0, 5);
  const auto rep = classify_series(g, {-1, 0.0, 0.0, 1, 1}, std::vector<double>(5, 0.0), SeriesKind::eigenvalue);
  ASSERT_EQ(rep.crossings.size(), 1u);
  EXPECT_EQ(rep.crossings[0].direction, Direction::negative_zero_positive);
  EXPECT_EQ(rep.neg_to_nonneg_count(), 1);
}

TEST(ClassifySeries, IsolatedMonteCarloFlipIsInconclusive) {
  const auto g = GainScanGrid::linspace(0.0, 1.0, 7);
  const auto rep = classify_series(g, {-1, -1, 1, 1, -0.5, 1, 1}, std::vector<double>(7, 0.01), SeriesKind::diagonal);
  EXPECT_EQ(rep.isolated_flips, 1);
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  EXPECT_EQ(rep.neg_to_nonneg_count(), 1);
}

TEST(QWeighted, MatchedGaussianIsZero) {
  const double s2 = 0.8;
  const auto x = MixtureInput::gaussian(SymMatrix::diagonal(VectorXd::Constant(3, s2)));
  const SymMatrix a = seeded_psd(3, 2);
  for (double g : {0.0, 0.3, 2.0, 50.0}) EXPECT_NEAR(q_weighted(x, s2, g, a, EstimatorConfig{}).value, 0.0, 1e-13);
}

TEST(QWeighted, AtZeroGammaIsTraceGap) {
  const auto x = seeded_random_mixture(3, 2, 4);
  const double s2 = 1.3;
  const auto q = q_weighted(x, s2, 0.0, SymMatrix::identity(3), mc(1000));
  EXPECT_NEAR(q.value, 3.0 * s2 - overall_covariance(x).trace(), 1e-12);
}

TEST(QWeighted, BpskAgainstOracle) {
  EXPECT_NEAR(q_weighted(bpsk(), 1.0, 0.0, SymMatrix::identity(1), quad()).value, 0.0, 1e-14);
  for (double g : {0.5, 1.0, 2.0, 4.0}) {
    const double oracle = 1.0 / (1.0 + g) - oracle::bpsk_mmse(g);
    EXPECT_GT(oracle, 0.0);
    EXPECT_NEAR(q_weighted(bpsk(), 1.0, g, SymMatrix::identity(1), quad()).value, oracle, 1e-10);
  }
}

TEST(QWeighted, NegationAndIndefiniteRejection) {
  const auto x = seeded_random_mixture(2, 3, 8);
  const SymMatrix a = seeded_psd(2, 9, 1.0, 0.1);
  const auto p = q_weighted(x, 1.0, 0.7, a, mc(5000));
  const auto m = q_weighted(x, 1.0, 0.7, -a, mc(5000));
  EXPECT_EQ(m.value, -p.value);
  EXPECT_EQ(m.std_err, p.std_err);
  EXPECT_THROW(q_weighted(x, 1.0, 0.7, SymMatrix::diagonal((VectorXd(2) << 1.0, -1.0).finished()), mc(100)), InvalidArgument);
}

TEST(ReduceWeighted, Examples) {
  const auto x = qpsk_parallel(2);
  const auto r1 = reduce_weighted(SymMatrix::identity(2), x);
  EXPECT_DOUBLE_EQ(r1.alpha, 1.0);
  EXPECT_TRUE(r1.a_bar.isApprox(eye(2)));
  const auto r4 = reduce_weighted(SymMatrix::diagonal(VectorXd::Constant(2, 4.0)), x);
  EXPECT_DOUBLE_EQ(r4.alpha, 4.0);
  EXPECT_TRUE(r4.a_bar.isApprox(eye(2)));
  EXPECT_TRUE(overall_covariance(r4.x_hat).matrix().isApprox(eye(2)));
}

TEST(ReduceWeighted, AgreesWithDirectWeightedTrace) {
  const auto x = qpsk_parallel(2);
  const SymMatrix a = seeded_psd(2, 21);
  const auto r = reduce_weighted(a, x);
  const auto grid = GainScanGrid::linspace(0.0, 5.0, 10);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto da = q_weighted(x, 1.0, grid[i], a, mc(20000, 3));
    const auto db = q_reduced(r, x, 1.0, grid[i], mc(20000, 4));
    EXPECT_LE(std::abs(da.value - db.value), 3.0 * std::hypot(da.std_err, db.std_err) + 1e-12) << grid[i];
  }
}

TEST(ScanWeighted, BpskHasSingleCrossingAndItems) {
  const auto rep = scan_weighted(bpsk(), 1.0, SymMatrix::identity(1), GainScanGrid::linspace(0.0, 8.0, 20), quad());
  EXPECT_EQ(rep.verdict, Verdict::consistent);
  EXPECT_LE(rep.neg_to_nonneg_count(), 1);
  ASSERT_TRUE(rep.items.has_value());
  EXPECT_TRUE(rep.items->all());
}

TEST(QMatrix, Examples) {
  const SymMatrix s = seeded_psd(2, 4, 1.0, 0.2);
  const auto path = snr_path(10.0, 2);
  const auto q0 = q_matrix(MixtureInput::gaussian(s), GaussianInput(s), path, 1.3, EstimatorConfig{});
  EXPECT_LT(q0.value.matrix().norm(), 1e-14);

  const auto x = seeded_random_mixture(2, 3, 2);
  const SymMatrix g = seeded_psd(2, 5, 2.0, 0.1);
  const auto qt = q_matrix(x, GaussianInput(g), path, 0.0, mc(1000));
  EXPECT_LT((qt.value.matrix() - (g - overall_covariance(x)).matrix()).norm(), 1e-12);

  const auto qb = q_matrix(qpsk_parallel(2), GaussianInput(SymMatrix::identity(2)), path, 1.0, quad());
  EXPECT_TRUE(qb.value.is_psd());
  EXPECT_GT(qb.value.min_eigenvalue(), 0.0);
  EXPECT_NEAR(qb.value(0, 0), 0.5 - oracle::bpsk_mmse(1.0), 1e-10);
}

TEST(ScanDiagonals, MatchedGaussianIsZero) {
  const auto lambda = GaussianInput::diagonal((VectorXd(2) << 0.7, 1.6).finished());
  const auto reps = scan_diagonals(MixtureInput::gaussian(lambda.covariance), lambda, snr_path(10.0, 2), GainScanGrid::linspace(0.0, 10.0, 12), EstimatorConfig{});
  for (const auto& r : reps) {
    EXPECT_TRUE(r.crossings.empty());
    for (double v : r.values) EXPECT_NEAR(v, 0.0, 1e-13);
  }
}

TEST(ScanDiagonals, TinyLambdaIsNegativeThroughout) {
  const auto x = seeded_random_mixture(2, 2, 12);
  const auto lambda = GaussianInput::iid(2, 1e-4);
  const auto reps = scan_diagonals(x, lambda, snr_path(4.0, 2), GainScanGrid::linspace(0.0, 4.0, 10), mc(20000));
  for (const auto& r : reps) {
    EXPECT_TRUE(r.crossings.empty());
    for (int s : r.signs) EXPECT_EQ(s, -1);
  }
}

TEST(ScanDiagonals, QpskAgainstIdentityStartsAtZeroThenPositive) {
  const auto grid = GainScanGrid::zero_then_geometric(0.05, 20.0, 12);
  const auto reps = scan_diagonals(qpsk_parallel(2), GaussianInput::iid(2, 1.0), snr_path(20.0, 2), grid, quad());
  for (const auto& r : reps) {
    EXPECT_EQ(r.verdict, Verdict::consistent);
    EXPECT_EQ(r.nonneg_to_neg_count(), 0);
    EXPECT_NEAR(r.values[0], 0.0, 1e-14);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      EXPECT_GT(r.values[k], 0.0);
      EXPECT_NEAR(r.values[k], 1.0 / (1.0 + grid[k]) - oracle::bpsk_mmse(grid[k]), 1e-9);
    }
  }
}

TEST(DFunctions, Examples) {
  const auto x = seeded_random_mixture(2, 3, 31);
  const auto path = make_path({DiagonalChannel((VectorXd(2) << 1.0, 0.5).finished()), DiagonalChannel((VectorXd(2) << 2.0, 2.0).finished())});
  const auto grid = GainScanGrid::linspace(0.0, 4.0, 25);
  const auto matched = GaussianInput::diagonal(overall_covariance(x).diag());
  const auto d = d_functions(x, matched, path, grid, mc(20000));
  EXPECT_TRUE(d.zero_at_origin);
  for (const auto& r : d.per_coordinate) {
    EXPECT_EQ(r.values[0], 0.0);
    for (int s : r.signs) EXPECT_GE(s, 0);
  }

  const auto dg = d_functions(MixtureInput::gaussian(matched.covariance), matched, path, grid, EstimatorConfig{});
  for (double v : dg.total.values) EXPECT_NEAR(v, 0.0, 1e-13);
}

TEST(ScanEigenvalues, MatchedGaussianAndOrigin) {
  const SymMatrix s = seeded_psd(2, 41, 1.0, 0.3);
  const auto reps = scan_eigenvalues(MixtureInput::gaussian(s), GaussianInput(s), snr_path(10.0, 2), GainScanGrid::linspace(0.0, 10.0, 8), EstimatorConfig{});
  for (const auto& r : reps)
    for (double v : r.values) EXPECT_NEAR(v, 0.0, 1e-13);

  const auto x = seeded_random_mixture(2, 2, 42);
  const SymMatrix g = seeded_psd(2, 43, 1.0, 0.2);
  const auto q0 = q_matrix(x, GaussianInput(g), snr_path(1.0, 2), 0.0, mc(500));
  const auto sp = spectrum_at(q0, snr_path(1.0, 2));
  EXPECT_LT((sp.eig - (g - overall_covariance(x)).eigenvalues()).norm(), 1e-12);
}

TEST(ScanEigenvalues, RotatedConstellationSingleCrossing) {
  for (int k = 0; k < 4; ++k) {
    const auto x = rotated_constellation(0.3 + 0.35 * k, 1.5 + 0.2 * k);
    // Σ_G ⪯ Σ_x with a non-diagonal Σ_G.
    const SymMatrix g = congruence(MatrixXd::Identity(2, 2) * 0.9, overall_covariance(x)) - SymMatrix::diagonal(VectorXd::Constant(2, 0.05));
    ASSERT_TRUE(loewner_leq(g, overall_covariance(x), 0.0));
    ASSERT_FALSE(g.is_diagonal(1e-6));
    const auto reps = scan_eigenvalues(x, GaussianInput(g), snr_path(30.0, 2), GainScanGrid::zero_then_geometric(0.01, 30.0, 60), mc(20000, k));
    for (const auto& r : reps) {
      EXPECT_LE(r.neg_to_nonneg_count(), 1) << k;
      EXPECT_EQ(r.nonneg_to_neg_count(), 0) << k;
    }
  }
}

TEST(BqEigenvalues, ScaledIdentityAndSingularB) {
  const auto x = seeded_random_mixture(2, 3, 51);
  const SymMatrix g = seeded_psd(2, 52, 1.0, 0.2);
  const auto snr = snr_path(5.0, 2);
  const auto sp = spectrum_at(q_matrix(x, GaussianInput(g), snr, 1.0, mc(5000)), snr);
  EXPECT_LT((sp.bq_eig - 0.5 * sp.eig).norm(), 1e-12);

  const auto path = make_path({DiagonalChannel((VectorXd(2) << 0.0, 1.0).finished())});
  const auto sp2 = spectrum_at(q_matrix(x, GaussianInput(g), path, 0.5, mc(5000)), path);
  EXPECT_EQ(path.b_diagonal(0.5)(0), 0.0);
  EXPECT_LT(sp2.bq_eig.cwiseAbs().minCoeff(), 1e-12);
}

TEST(BqEigenvalues, QpskSignRelationOnFullScan) {
  const auto bq = scan_bq_eigenvalues(qpsk_parallel(2), GaussianInput(seeded_psd(2, 61, 1.0, 0.3)), snr_path(20.0, 2), GainScanGrid::zero_then_geometric(0.01, 20.0, 30), mc(20000));
  EXPECT_EQ(bq.violations, 0);
  for (bool ok : bq.relation_holds) EXPECT_TRUE(ok);
}

TEST(DerivativeBound, GaussianCases) {
  const SymMatrix s = seeded_psd(2, 71, 1.0, 0.3);
  const auto path = snr_path(5.0, 2);
  const auto m = check_derivative_bound(MixtureInput::gaussian(s), GaussianInput(s), path, 0.8, EstimatorConfig{});
  EXPECT_LT(m.lhs.matrix().norm(), 1e-12);
  EXPECT_LT(m.rhs.matrix().norm(), 1e-12);
  EXPECT_TRUE(m.holds);

  const SymMatrix g = seeded_psd(2, 72, 2.0, 0.3);
  const auto e = check_derivative_bound(MixtureInput::gaussian(s), GaussianInput(g), path, 0.8, EstimatorConfig{});
  EXPECT_TRUE(e.holds);
  EXPECT_LT((e.lhs - e.rhs).matrix().norm(), 1e-5);
}

TEST(DerivativeBound, QpskHolds) {
  const auto r = check_derivative_bound(qpsk_parallel(2), GaussianInput::iid(2, 1.0), snr_path(5.0, 2), 0.8, mc(200000));
  EXPECT_TRUE(r.holds) << "gap " << r.min_gap << " tol " << r.tolerance;
}

TEST(Fisher, Examples) {
  const auto x = seeded_random_mixture(2, 2, 81);
  const auto path = snr_path(5.0, 2);
  const auto f0 = fisher(x, GaussianInput::iid(2, 1.0), path, 0.0, mc(1000));
  EXPECT_LT((f0.J.matrix() - eye(2)).norm(), 1e-15);
  const auto fg = fisher(MixtureInput::gaussian(SymMatrix::identity(2)), GaussianInput::iid(2, 1.0), path, 1.0, EstimatorConfig{});
  EXPECT_LT((fg.J.matrix() - 0.5 * eye(2)).norm(), 1e-14);
  EXPECT_LT(fg.W.matrix().norm(), 1e-14);
}

TEST(Fisher, BpskScoreMatchesIdentityAndOracle) {
  const double snr = 1.0;
  const MatrixXd h = MatrixXd::Constant(1, 1, std::sqrt(snr));
  // Closed-form BPSK score s(y) = −y + √snr·tanh(√snr·y), sampled directly.
  CounterRng rng(derive_key(99, 1), 0);
  const std::size_t m = 200000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double xs = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double y = std::sqrt(snr) * xs + rng.normal();
    const double s = -y + std::sqrt(snr) * std::tanh(std::sqrt(snr) * y);
    sum += s * s;
    sq += s * s * s * s;
  }
  const double j_score = sum / m, j_se = std::sqrt((sq / m - j_score * j_score) / m);
  const auto rep = fisher(bpsk(), GaussianInput::iid(1, 1.0), snr_path(5.0, 1), snr, mc(200000, 5));
  EXPECT_LE(std::abs(j_score - rep.J(0, 0)), 3.0 * std::hypot(j_se, rep.J_err(0, 0)));
  // Both integrands carry order-64 Gauss-Hermite truncation below 1e-9 at snr 1.
  EXPECT_NEAR(oracle::bpsk_fisher(snr), 1.0 - snr * oracle::bpsk_mmse(snr), 2e-9);
  const auto lib = fisher_score_estimate(bpsk(), h, mc(200000, 6));
  EXPECT_LE(std::abs(lib.matrix(0, 0) - oracle::bpsk_fisher(snr)), 3.0 * lib.std_err(0, 0));
  EXPECT_LT(rep.identity_residual, 1e-14);
}
