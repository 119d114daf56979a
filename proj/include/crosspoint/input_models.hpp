#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "matrix_kernel.hpp"
#include "sampling.hpp"

namespace crosspoint {

// Zero-mean Gaussian comparison input.
struct GaussianInput {
  SymMatrix covariance;
  bool is_diagonal = false;

  GaussianInput() = default;
  explicit GaussianInput(SymMatrix cov) : covariance(std::move(cov)) {
    require(covariance.is_psd(), "GaussianInput: covariance must be PSD");
    is_diagonal = covariance.is_diagonal();
  }
  static GaussianInput diagonal(const VectorXd& d) { return GaussianInput(SymMatrix::diagonal(d)); }
  static GaussianInput iid(Eigen::Index n, double var) { return diagonal(VectorXd::Constant(n, var)); }

  Eigen::Index dim() const { return covariance.dim(); }
};

struct MixtureComponent {
  double weight;
  VectorXd mean;
  SymMatrix cov;
};

// Finite Gaussian mixture. Discrete constellation points are components with
// zero covariance.
class MixtureInput {
 public:
  MixtureInput() = default;

  explicit MixtureInput(std::vector<MixtureComponent> comps) : comps_(std::move(comps)) {
    require(!comps_.empty(), "MixtureInput: at least one component required");
    const Eigen::Index n = comps_.front().mean.size();
    require(n >= 1, "MixtureInput: dimension must be positive");
    double total = 0.0;
    for (const auto& c : comps_) {
      require(c.weight > 0.0 && std::isfinite(c.weight), "MixtureInput: weights must be positive");
      require(c.mean.size() == n && c.cov.dim() == n, "MixtureInput: component dimension mismatch");
      require(c.cov.is_psd(), "MixtureInput: component covariance must be PSD");
      total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-9, "MixtureInput: weights must sum to 1");
    for (auto& c : comps_) c.weight /= total;
  }

  static MixtureInput gaussian(const SymMatrix& cov) { return gaussian(cov, VectorXd::Zero(cov.dim())); }
  static MixtureInput gaussian(const SymMatrix& cov, const VectorXd& mean) {
    return MixtureInput({{1.0, mean, cov}});
  }

  Eigen::Index dim() const { return comps_.front().mean.size(); }
  std::size_t size() const { return comps_.size(); }
  const std::vector<MixtureComponent>& components() const { return comps_; }
  const MixtureComponent& operator[](std::size_t k) const { return comps_[k]; }

  bool is_single_gaussian() const { return comps_.size() == 1; }

  bool has_pd_components() const {
    for (const auto& c : comps_)
      if (!(c.cov.min_eigenvalue() > 0.0)) return false;
    return true;
  }

  VectorXd mean() const {
    VectorXd m = VectorXd::Zero(dim());
    for (const auto& c : comps_) m += c.weight * c.mean;
    return m;
  }

  bool operator==(const MixtureInput& o) const {
    if (comps_.size() != o.comps_.size()) return false;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      const auto &a = comps_[k], &b = o.comps_[k];
      if (a.weight != b.weight || a.mean != b.mean || !(a.cov == b.cov)) return false;
    }
    return true;
  }

 private:
  std::vector<MixtureComponent> comps_;
};

struct ConditionalBranch {
  double q;
  MixtureInput input;
};

// Family X | U = u over a finite alphabet for the Markov chain U − X − Y.
class ConditionalInput {
 public:
  ConditionalInput() = default;

  explicit ConditionalInput(std::vector<ConditionalBranch> branches) : branches_(std::move(branches)) {
    require(!branches_.empty(), "ConditionalInput: at least one branch required");
    const Eigen::Index n = branches_.front().input.dim();
    double total = 0.0;
    for (const auto& b : branches_) {
      require(b.q > 0.0 && std::isfinite(b.q), "ConditionalInput: branch weights must be positive");
      require(b.input.dim() == n, "ConditionalInput: branch dimension mismatch");
      total += b.q;
    }
    require(std::abs(total - 1.0) <= 1e-9, "ConditionalInput: branch weights must sum to 1");
    for (auto& b : branches_) b.q /= total;
  }

  // Trivial U: a single branch holding the whole law.
  static ConditionalInput degenerate(const MixtureInput& x) { return ConditionalInput({{1.0, x}}); }

  Eigen::Index dim() const { return branches_.front().input.dim(); }
  std::size_t size() const { return branches_.size(); }
  bool conditioned() const { return branches_.size() > 1; }
  const std::vector<ConditionalBranch>& branches() const { return branches_; }
  const ConditionalBranch& operator[](std::size_t u) const { return branches_[u]; }

 private:
  std::vector<ConditionalBranch> branches_;
};

// Flat mixture with weights q_u·p_{k|u}.
inline MixtureInput marginalize(const ConditionalInput& cond) {
  std::vector<MixtureComponent> comps;
  for (const auto& b : cond.branches())
    for (const auto& c : b.input.components()) comps.push_back({b.q * c.weight, c.mean, c.cov});
  return MixtureInput(std::move(comps));
}

// Σ_x = Σ p_k (S_k + μ_k μ_kᵀ) − μ μᵀ, accumulated in centered form.
inline SymMatrix overall_covariance(const MixtureInput& x) {
  const VectorXd mu = x.mean();
  MatrixXd s = MatrixXd::Zero(x.dim(), x.dim());
  for (const auto& c : x.components()) {
    VectorXd d = c.mean - mu;
    s += c.weight * (c.cov.matrix() + d * d.transpose());
  }
  return SymMatrix(s);
}

inline SymMatrix overall_covariance(const ConditionalInput& cond) { return overall_covariance(marginalize(cond)); }

// Law of T·X for a (possibly rectangular) matrix T.
inline MixtureInput linear_transform(const MixtureInput& x, const MatrixXd& t) {
  require(t.cols() == x.dim(), "linear_transform: dimension mismatch");
  std::vector<MixtureComponent> comps;
  for (const auto& c : x.components()) comps.push_back({c.weight, t * c.mean, congruence(t, c.cov)});
  return MixtureInput(std::move(comps));
}

inline ConditionalInput linear_transform(const ConditionalInput& cond, const MatrixXd& t) {
  std::vector<ConditionalBranch> br;
  for (const auto& b : cond.branches()) br.push_back({b.q, linear_transform(b.input, t)});
  return ConditionalInput(std::move(br));
}

// Draws one sample of X into `out`; `z` is scratch of length dim.
// `factors[k]` must satisfy F Fᵀ = S_k.
inline void draw_sample(const MixtureInput& x, const std::vector<MatrixXd>& factors, CounterRng& rng, VectorXd& out, VectorXd& z) {
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < x.size(); ++k) {
    u -= x[k].weight;
    if (u < 0.0) break;
  }
  out = x[k].mean;
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  out.noalias() += factors[k] * z;
}

inline std::vector<MatrixXd> sampling_factors(const MixtureInput& x) {
  std::vector<MatrixXd> f;
  for (const auto& c : x.components()) f.push_back(psd_sqrt(c.cov));
  return f;
}

// ---- canonical constellations and seeded corpora ----

inline MixtureInput bpsk() {
  return MixtureInput({{0.5, VectorXd::Constant(1, -1.0), SymMatrix::zero(1)},
                       {0.5, VectorXd::Constant(1, 1.0), SymMatrix::zero(1)}});
}

// Product of n independent BPSK coordinates: 2^n equiprobable points.
inline MixtureInput qpsk_parallel(int n) {
  require(n >= 1 && n <= 12, "qpsk_parallel: n must be in [1, 12]");
  const std::size_t count = std::size_t{1} << n;
  std::vector<MixtureComponent> comps;
  for (std::size_t b = 0; b < count; ++b) {
    VectorXd p(n);
    for (int i = 0; i < n; ++i) p(i) = ((b >> i) & 1U) ? 1.0 : -1.0;
    comps.push_back({1.0 / static_cast<double>(count), p, SymMatrix::zero(n)});
  }
  return MixtureInput(std::move(comps));
}

namespace detail {

inline MatrixXd random_normal_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline std::vector<double> random_weights(CounterRng& rng, int k) {
  std::vector<double> w(k);
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    w[i] = 0.25 + rng.uniform();
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

}  // namespace detail

// Random mixture with positive definite components; deterministic per (n, k, seed).
inline MixtureInput seeded_random_mixture(int n, int k, std::uint64_t seed) {
  require(n >= 1 && k >= 1, "seeded_random_mixture: n and k must be positive");
  CounterRng rng(derive_key(seed, 0x6d6978ULL), static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(k));
  auto w = detail::random_weights(rng, k);
  std::vector<MixtureComponent> comps;
  for (int i = 0; i < k; ++i) {
    VectorXd mu = detail::random_normal_matrix(rng, n, 1);
    MatrixXd g = detail::random_normal_matrix(rng, n, n);
    double scale = 0.05 + 0.4 * rng.uniform();
    MatrixXd s = scale * g * g.transpose() / n + 0.05 * MatrixXd::Identity(n, n);
    comps.push_back({w[i], mu, SymMatrix(s)});
  }
  return MixtureInput(std::move(comps));
}

// Random discrete constellation (zero-covariance components).
inline MixtureInput seeded_constellation(int n, int k, std::uint64_t seed) {
  require(n >= 1 && k >= 1, "seeded_constellation: n and k must be positive");
  CounterRng rng(derive_key(seed, 0x636f6eULL), static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(k));
  auto w = detail::random_weights(rng, k);
  std::vector<MixtureComponent> comps;
  for (int i = 0; i < k; ++i) comps.push_back({w[i], detail::random_normal_matrix(rng, n, 1), SymMatrix::zero(n)});
  return MixtureInput(std::move(comps));
}

// Random PSD matrix G·Gᵀ/n scaled by `scale`, plus `ridge`·I.
inline SymMatrix seeded_psd(int n, std::uint64_t seed, double scale = 1.0, double ridge = 0.0) {
  CounterRng rng(derive_key(seed, 0x707364ULL), static_cast<std::uint64_t>(n));
  MatrixXd g = detail::random_normal_matrix(rng, n, n);
  return SymMatrix(scale * g * g.transpose() / n + ridge * MatrixXd::Identity(n, n));
}

}  // namespace crosspoint
