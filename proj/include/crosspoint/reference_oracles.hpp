#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace crosspoint::oracle {

// Gauss–Hermite rule (weight e^{−x²}) from the eigen-decomposition of the
// Jacobi matrix (Golub–Welsch). Independent of the Newton-based rule used by
// the estimators.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline HermiteRule golub_welsch(int order) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  HermiteRule r;
  const double mu0 = std::sqrt(M_PI);
  for (int i = 0; i < order; ++i) {
    r.nodes.push_back(es.eigenvalues()(i));
    const double v = es.eigenvectors()(0, i);
    r.weights.push_back(mu0 * v * v);
  }
  return r;
}

// E[f(Z)], Z ~ N(0, 1).
template <class F>
double normal_expectation(const HermiteRule& r, F&& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(std::sqrt(2.0) * r.nodes[i]);
  return s / std::sqrt(M_PI);
}

// BPSK over √snr·X + N. By symmetry condition on X = +1.
inline double bpsk_mmse(double snr, int order = 64) {
  const auto r = golub_welsch(order);
  return 1.0 - normal_expectation(r, [&](double z) {
           const double t = std::tanh(snr + std::sqrt(snr) * z);
           return t * t;
         });
}

inline double bpsk_mutual_information(double snr, int order = 64) {
  const auto r = golub_welsch(order);
  return snr - normal_expectation(r, [&](double z) {
           const double a = std::abs(snr + std::sqrt(snr) * z);
           return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
         });
}

// Fisher information of Y = √snr·X + N from the closed-form score
// s(y) = −y + √snr·tanh(√snr·y).
inline double bpsk_fisher(double snr, int order = 64) {
  const auto r = golub_welsch(order);
  const double a = std::sqrt(snr);
  return normal_expectation(r, [&](double z) {
    const double y = a + z;
    const double s = -y + a * std::tanh(a * y);
    return s * s;
  });
}

}  // namespace crosspoint::oracle
