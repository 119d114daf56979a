#include <gtest/gtest.h>

#include "crosspoint/mmse_engine.hpp"
#include "crosspoint/reference_oracles.hpp"

using namespace crosspoint;

namespace {

SymMatrix diag(std::initializer_list<double> v) {
  VectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return SymMatrix::diagonal(r);
}

MatrixXd eye(Eigen::Index n) { return MatrixXd::Identity(n, n); }

EstimatorConfig mc(std::size_t samples, std::uint64_t seed = 42) {
  EstimatorConfig c;
  c.method = Method::monte_carlo;
  c.samples = samples;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(GaussianMmse, Examples) {
  EXPECT_TRUE(gaussian_mmse(SymMatrix::identity(2), eye(2)).matrix().isApprox(0.5 * eye(2), 1e-14));
  const SymMatrix s = diag({1.5, 0.2});
  EXPECT_LT((gaussian_mmse(s, MatrixXd::Zero(2, 2)).matrix() - s.matrix()).norm(), 1e-15);
  const SymMatrix e = gaussian_mmse(diag({1.0, 2.0}), diag({1.0, 0.0}).matrix());
  EXPECT_NEAR(e(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(e(1, 1), 2.0, 1e-15);
  EXPECT_NEAR(e(0, 1), 0.0, 1e-15);
}

TEST(GaussianMmse, SingularCovarianceUsesAlternateForm) {
  const SymMatrix s = diag({1.0, 0.0});
  const SymMatrix e = gaussian_mmse(s, eye(2));
  EXPECT_NEAR(e(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(e(1, 1), 0.0, 1e-15);
}

TEST(LinearMmse, Examples) {
  EXPECT_TRUE(linear_mmse(SymMatrix::identity(2)).matrix().isApprox(0.5 * eye(2)));
  EXPECT_LT(linear_mmse(SymMatrix::zero(2)).matrix().norm(), 1e-15);
  const SymMatrix e = linear_mmse(diag({3.0, 1.0}));
  EXPECT_NEAR(e(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(e(1, 1), 0.5, 1e-15);
}

TEST(Posterior, BpskMeanIsTanh) {
  const auto x = bpsk();
  for (double snr : {0.3, 1.0, 4.0})
    for (double y : {-2.0, -0.4, 0.0, 0.7, 3.1}) {
      const auto p = posterior(x, MatrixXd::Constant(1, 1, std::sqrt(snr)), VectorXd::Constant(1, y));
      EXPECT_NEAR(p.mean(0), std::tanh(std::sqrt(snr) * y), 1e-13);
      EXPECT_NEAR(p.responsibilities.sum(), 1.0, 1e-14);
    }
  const auto p0 = posterior(x, MatrixXd::Constant(1, 1, 1.0), VectorXd::Zero(1));
  EXPECT_NEAR(p0.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(p0.cov(0, 0), 1.0, 1e-15);
}

TEST(Posterior, SingleGaussianCovarianceIndependentOfY) {
  const SymMatrix s = seeded_psd(2, 3, 1.0, 0.2);
  const auto x = MixtureInput::gaussian(s);
  const MatrixXd h = diag({0.8, 1.7}).matrix();
  const SymMatrix eg = gaussian_mmse(s, h);
  for (double a : {-3.0, 0.0, 5.0}) {
    const auto p = posterior(x, h, VectorXd::Constant(2, a));
    EXPECT_LT((p.cov.matrix() - eg.matrix()).norm(), 1e-13);
  }
}

TEST(Posterior, HighSnrDoesNotUnderflow) {
  const auto p = posterior(bpsk(), MatrixXd::Constant(1, 1, std::sqrt(1e3)), VectorXd::Constant(1, -40.0));
  EXPECT_TRUE(std::isfinite(p.mean(0)));
  EXPECT_NEAR(p.mean(0), -1.0, 1e-12);
}

TEST(MmseMatrix, BpskAtZeroSnrIsOne) {
  const auto est = mmse_matrix(bpsk(), MatrixXd::Zero(1, 1), mc(2000));
  EXPECT_EQ(est.matrix(0, 0), 1.0);
}

TEST(MmseMatrix, BpskMatchesGolubWelschOracle) {
  const double oracle = oracle::bpsk_mmse(1.0);
  EXPECT_GT(oracle, 0.0);
  EXPECT_LT(oracle, 1.0);
  const auto est = mmse_matrix(bpsk(), MatrixXd::Constant(1, 1, 1.0), mc(200000));
  EXPECT_LT(std::abs(est.matrix(0, 0) - oracle), 3.0 * est.std_err(0, 0));
  EstimatorConfig q;
  q.method = Method::quadrature;
  EXPECT_NEAR(mmse_matrix(bpsk(), MatrixXd::Constant(1, 1, 1.0), q).matrix(0, 0), oracle, 1e-12);
  EXPECT_NEAR(scalar_mmse_trace(bpsk(), 1.0, q).value, oracle, 1e-12);
}

TEST(MmseMatrix, QuadratureTruncationAgainstTrapezoidReference) {
  // Trapezoid rule on the real line converges geometrically for this integrand.
  const auto reference = [](double snr) {
    const double h = 0.002;
    double s = 0.0;
    for (double z = -40.0; z <= 40.0; z += h) {
      const double t = std::tanh(snr + std::sqrt(snr) * z);
      s += t * t * std::exp(-0.5 * z * z);
    }
    return 1.0 - s * h / std::sqrt(2.0 * M_PI);
  };
  EstimatorConfig q;
  q.method = Method::quadrature;
  const std::vector<std::pair<double, double>> bounds = {{0.25, 1e-12}, {0.5, 1e-12}, {1.0, 1e-9}, {2.0, 1e-6}, {4.0, 1e-4}, {8.0, 1e-4}};
  for (const auto& [snr, bound] : bounds) {
    const double v = mmse_matrix(bpsk(), MatrixXd::Constant(1, 1, std::sqrt(snr)), q).matrix(0, 0);
    EXPECT_LE(std::abs(v - reference(snr)), bound) << snr;
  }
}

TEST(MmseMatrix, ScalarGaussianClosedForm) {
  const auto est = mmse_matrix(MixtureInput::gaussian(diag({2.0})), MatrixXd::Constant(1, 1, 1.0), EstimatorConfig{});
  EXPECT_NEAR(est.matrix(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(est.method, Method::closed_form);
}

TEST(MmseMatrix, QuadratureRejectsHighDimension) {
  EstimatorConfig q;
  q.method = Method::quadrature;
  EXPECT_THROW(mmse_matrix(qpsk_parallel(4), eye(4), q), InvalidArgument);
}

TEST(ScalarMmseTrace, Examples) {
  const auto x = seeded_random_mixture(3, 2, 9);
  EXPECT_NEAR(scalar_mmse_trace(x, 0.0, mc(1000)).value, overall_covariance(x).trace(), 1e-12);
  const double s2 = 0.7;
  EXPECT_NEAR(scalar_mmse_trace(MixtureInput::gaussian(diag({s2, s2, s2})), 2.5, EstimatorConfig{}).value,
              3.0 * s2 / (1.0 + s2 * 2.5), 1e-14);
}

TEST(ConditionalMmse, Examples) {
  const auto x = seeded_random_mixture(2, 2, 5);
  const MatrixXd h = diag({1.0, 0.5}).matrix();
  const auto a = conditional_mmse(ConditionalInput::degenerate(x), h, mc(5000));
  const auto b = mmse_matrix(x, h, mc(5000));
  EXPECT_TRUE(a.matrix == b.matrix);

  const auto revealed = ConditionalInput({{0.5, MixtureInput({{1.0, bpsk()[0].mean, bpsk()[0].cov}})}, {0.5, MixtureInput({{1.0, bpsk()[1].mean, bpsk()[1].cov}})}});
  EXPECT_NEAR(conditional_mmse(revealed, MatrixXd::Constant(1, 1, 1.0), EstimatorConfig{}).matrix(0, 0), 0.0, 1e-15);

  EstimatorConfig q;
  q.method = Method::quadrature;
  const auto same = conditional_mmse(ConditionalInput({{0.5, bpsk()}, {0.5, bpsk()}}), MatrixXd::Constant(1, 1, 1.0), q);
  EXPECT_NEAR(same.matrix(0, 0), mmse_matrix(bpsk(), MatrixXd::Constant(1, 1, 1.0), q).matrix(0, 0), 1e-14);
}

TEST(MmseMatrix, DeterministicAcrossThreadCounts) {
  const auto x = seeded_random_mixture(3, 3, 1);
  auto c1 = mc(30000), c3 = mc(30000);
  c1.threads = 1;
  c3.threads = 3;
  const auto a = mmse_matrix(x, eye(3), c1), b = mmse_matrix(x, eye(3), c3);
  EXPECT_TRUE(a.matrix == b.matrix);
  EXPECT_TRUE(a.std_err == b.std_err);
}

TEST(MmseProperties, GaussianOnTop) {
  const std::vector<double> gammas{0.1, 0.5, 1.0, 3.0, 10.0};
  for (std::uint64_t s = 0; s < 200; ++s) {
    const int n = 1 + static_cast<int>(s % 3);
    const auto x = (s % 2) ? seeded_random_mixture(n, 3, s) : seeded_constellation(n, 3, s);
    const double sigma2 = overall_covariance(x).trace() / n * (1.0 + 0.1 * static_cast<double>(s % 4));
    for (double g : gammas) {
      const auto t = scalar_mmse_trace(x, g, mc(4000, s).with_stream(stream_for(g)));
      EXPECT_LE(t.value / n, sigma2 / (1.0 + sigma2 * g) + 3.0 * t.std_err / n) << "seed " << s << " gamma " << g;
    }
  }
}

TEST(MmseProperties, PerDiagonalBound) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const int n = 2 + static_cast<int>(s % 2);
    const auto x = seeded_random_mixture(n, 3, s + 300);
    const VectorXd lambda = overall_covariance(x).diag() * 1.05;
    const VectorXd g = VectorXd::LinSpaced(n, 0.3, 2.0);
    const auto est = mmse_matrix(x, MatrixXd(g.asDiagonal()), mc(4000, s));
    for (int i = 0; i < n; ++i)
      EXPECT_LE(est.matrix(i, i), lambda(i) / (1.0 + g(i) * g(i) * lambda(i)) + 3.0 * est.std_err(i, i)) << "seed " << s;
  }
}

TEST(MmseProperties, LawOfTotalVariance) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = seeded_random_mixture(2, 3, s + 50);
    const MatrixXd h = diag({0.9, 1.4}).matrix();
    PosteriorModel model(x, h);
    auto ws = model.workspace();
    const auto factors = sampling_factors(x);
    const std::size_t m = 40000;
    CounterRng rng(derive_key(s, 1), 0);
    VectorXd xs(2), z(2), y(2);
    MatrixXd phi = MatrixXd::Zero(2, 2), mm = MatrixXd::Zero(2, 2);
    VectorXd mean = VectorXd::Zero(2);
    for (std::size_t i = 0; i < m; ++i) {
      draw_sample(x, factors, rng, xs, z);
      for (int k = 0; k < 2; ++k) y(k) = rng.normal();
      y += h * xs;
      model.evaluate(y, ws);
      phi += ws.cov;
      mm += ws.mean * ws.mean.transpose();
      mean += ws.mean;
    }
    phi /= static_cast<double>(m);
    mean /= static_cast<double>(m);
    mm = mm / static_cast<double>(m) - mean * mean.transpose();
    EXPECT_LT((phi + mm - overall_covariance(x).matrix()).norm(), 0.05 * overall_covariance(x).matrix().norm()) << s;
  }
}

TEST(MmseProperties, MonteCarloAgreesWithQuadrature) {
  EstimatorConfig q;
  q.method = Method::quadrature;
  q.quad_order = 40;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int n = 1 + static_cast<int>(s % 2);
    const auto x = (s % 3 == 0) ? seeded_constellation(n, 3, s) : seeded_random_mixture(n, 2, s);
    const MatrixXd h = 1.3 * eye(n);
    const auto a = mmse_matrix(x, h, mc(20000, s));
    const auto b = mmse_matrix(x, h, q);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) EXPECT_LE(std::abs(a.matrix(i, j) - b.matrix(i, j)), 3.0 * a.std_err(i, j) + 1e-12) << s;
  }
}

TEST(MmseProperties, SideInformationHelps) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = seeded_constellation(2, 4, s + 7);
    auto pair = [&](std::size_t a, std::size_t b) {
      const double q = x[a].weight + x[b].weight;
      return ConditionalBranch{q, MixtureInput({{x[a].weight / q, x[a].mean, x[a].cov}, {x[b].weight / q, x[b].mean, x[b].cov}})};
    };
    const std::vector<ConditionalBranch> br{pair(0, 1), pair(2, 3)};
    const ConditionalInput cond(br);
    const MatrixXd h = eye(2);
    const auto ec = conditional_mmse(cond, h, mc(20000, s));
    const auto em = mmse_matrix(marginalize(cond), h, mc(20000, s + 1000));
    const double slack = 4.0 * (ec.spectral_err() + em.spectral_err());
    EXPECT_TRUE(loewner_leq(ec.matrix, em.matrix, slack)) << s;
  }
}

TEST(MmseDifference, GaussianIsExact) {
  const SymMatrix s = seeded_psd(2, 8, 1.0, 0.1);
  const auto d = mmse_difference(MixtureInput::gaussian(s), eye(2), 2.0 * eye(2), EstimatorConfig{});
  EXPECT_LT((d.matrix.matrix() - (gaussian_mmse(s, eye(2)) - gaussian_mmse(s, 2.0 * eye(2))).matrix()).norm(), 1e-15);
}
