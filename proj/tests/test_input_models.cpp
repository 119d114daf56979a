#include <gtest/gtest.h>

#include "crosspoint/input_models.hpp"

using namespace crosspoint;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

}  // namespace

TEST(OverallCovariance, SingleGaussian) {
  const SymMatrix s = seeded_psd(3, 5, 1.0, 0.1);
  EXPECT_TRUE(overall_covariance(MixtureInput::gaussian(s)) == s);
}

TEST(OverallCovariance, Bpsk) { EXPECT_DOUBLE_EQ(overall_covariance(bpsk())(0, 0), 1.0); }

TEST(OverallCovariance, SymmetricTwoComponent) {
  const VectorXd mu = vec({0.7, -0.3});
  const double s2 = 0.4;
  const SymMatrix c = SymMatrix::diagonal(VectorXd::Constant(2, s2));
  const MixtureInput x({{0.5, mu, c}, {0.5, -mu, c}});
  const MatrixXd expect = s2 * MatrixXd::Identity(2, 2) + mu * mu.transpose();
  EXPECT_LT((overall_covariance(x).matrix() - expect).norm(), 1e-15);
}

TEST(MixtureInput, Validation) {
  EXPECT_THROW(MixtureInput(std::vector<MixtureComponent>{}), InvalidArgument);
  EXPECT_THROW(MixtureInput({{0.3, vec({0}), SymMatrix::zero(1)}, {0.3, vec({1}), SymMatrix::zero(1)}}), InvalidArgument);
  EXPECT_THROW(MixtureInput({{1.0, vec({0}), SymMatrix::diagonal(vec({-1}))}}), InvalidArgument);
  EXPECT_THROW(MixtureInput({{0.5, vec({0}), SymMatrix::zero(1)}, {0.5, vec({0, 1}), SymMatrix::zero(2)}}), InvalidArgument);
}

TEST(Constructors, Bpsk) {
  const auto x = bpsk();
  ASSERT_EQ(x.size(), 2u);
  EXPECT_EQ(x.dim(), 1);
  EXPECT_EQ(x[0].mean(0), -1.0);
  EXPECT_EQ(x[1].mean(0), 1.0);
  EXPECT_EQ(x[0].weight, 0.5);
  EXPECT_EQ(x[1].weight, 0.5);
  EXPECT_EQ(x[0].cov(0, 0), 0.0);
}

TEST(Constructors, QpskParallel) {
  const auto x = qpsk_parallel(2);
  ASSERT_EQ(x.size(), 4u);
  std::set<std::pair<double, double>> points;
  for (const auto& c : x.components()) {
    EXPECT_EQ(c.weight, 0.25);
    points.insert({c.mean(0), c.mean(1)});
  }
  EXPECT_EQ(points.size(), 4u);
  EXPECT_TRUE(overall_covariance(x).matrix().isApprox(MatrixXd::Identity(2, 2)));
}

TEST(Constructors, SeededDeterminism) {
  EXPECT_TRUE(seeded_random_mixture(2, 3, 7) == seeded_random_mixture(2, 3, 7));
  EXPECT_FALSE(seeded_random_mixture(2, 3, 7) == seeded_random_mixture(2, 3, 8));
  EXPECT_TRUE(seeded_constellation(3, 4, 1) == seeded_constellation(3, 4, 1));
  EXPECT_TRUE(seeded_random_mixture(2, 3, 7).has_pd_components());
}

TEST(Marginalize, DegenerateU) {
  const auto x = seeded_random_mixture(2, 3, 1);
  EXPECT_TRUE(marginalize(ConditionalInput::degenerate(x)) == x);
}

TEST(Marginalize, UPinsComponents) {
  const auto x = bpsk();
  const ConditionalInput cond({{0.25, MixtureInput({{1.0, x[0].mean, x[0].cov}})}, {0.75, MixtureInput({{1.0, x[1].mean, x[1].cov}})}});
  const auto m = marginalize(cond);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m[0].weight, 0.25);
  EXPECT_DOUBLE_EQ(m[1].weight, 0.75);
  EXPECT_EQ(m[0].mean(0), -1.0);
  EXPECT_EQ(m[1].mean(0), 1.0);
}

TEST(Marginalize, IdenticalBranches) {
  const auto x = seeded_random_mixture(2, 2, 3);
  const auto m = marginalize(ConditionalInput({{0.5, x}, {0.5, x}}));
  EXPECT_LT((m.mean() - x.mean()).norm(), 1e-15);
  EXPECT_LT((overall_covariance(m).matrix() - overall_covariance(x).matrix()).norm(), 1e-15);
}

TEST(ConditionalInput, Validation) {
  EXPECT_THROW(ConditionalInput({{0.4, bpsk()}, {0.4, bpsk()}}), InvalidArgument);
  EXPECT_THROW(ConditionalInput({{0.5, bpsk()}, {0.5, qpsk_parallel(2)}}), InvalidArgument);
}

TEST(InputProperties, MarginalCovarianceMatchesConditional) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const int n = 1 + static_cast<int>(s % 3);
    const ConditionalInput cond({{0.3, seeded_random_mixture(n, 2, s)}, {0.7, seeded_constellation(n, 3, s + 100)}});
    const MixtureInput m = marginalize(cond);
    // Law of total covariance as an independent route.
    const VectorXd mu = m.mean();
    MatrixXd total = MatrixXd::Zero(n, n);
    for (const auto& b : cond.branches()) {
      const VectorXd d = b.input.mean() - mu;
      total += b.q * (overall_covariance(b.input).matrix() + d * d.transpose());
    }
    EXPECT_LT((overall_covariance(cond).matrix() - total).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(InputProperties, SamplingMatchesOverallCovariance) {
  const MixtureInput x = seeded_random_mixture(2, 3, 11);
  const auto factors = sampling_factors(x);
  const std::size_t m = 1000000;
  CounterRng rng(derive_key(5, 6), 0);
  VectorXd s(2), z(2);
  std::vector<VectorXd> draws;
  draws.reserve(m);
  VectorXd mean = VectorXd::Zero(2);
  for (std::size_t i = 0; i < m; ++i) {
    draw_sample(x, factors, rng, s, z);
    draws.push_back(s);
    mean += s;
  }
  mean /= static_cast<double>(m);
  MatrixXd cov = MatrixXd::Zero(2, 2), sq = MatrixXd::Zero(2, 2);
  for (const auto& d : draws) {
    const MatrixXd o = (d - mean) * (d - mean).transpose();
    cov += o;
    sq += o.cwiseProduct(o);
  }
  cov /= static_cast<double>(m);
  sq /= static_cast<double>(m);
  const MatrixXd expect = overall_covariance(x).matrix();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((sq(i, j) - cov(i, j) * cov(i, j)) / static_cast<double>(m));
      EXPECT_LT(std::abs(cov(i, j) - expect(i, j)), 4.0 * se) << i << "," << j;
    }
}

TEST(LinearTransform, CovarianceCongruence) {
  const auto x = seeded_random_mixture(2, 3, 4);
  MatrixXd t(2, 2);
  t << 1.0, 2.0, -0.5, 0.3;
  const MatrixXd expect = t * overall_covariance(x).matrix() * t.transpose();
  EXPECT_LT((overall_covariance(linear_transform(x, t)).matrix() - expect).norm(), 1e-12);
}
