#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "channel_path.hpp"
#include "input_models.hpp"
#include "quadrature.hpp"
#include "sampling.hpp"

namespace crosspoint {

enum class Method { automatic, closed_form, quadrature, monte_carlo };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::automatic: return "automatic";
    case Method::closed_form: return "closed_form";
    case Method::quadrature: return "quadrature";
    case Method::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "automatic" || s == "auto") return Method::automatic;
  if (s == "closed_form") return Method::closed_form;
  if (s == "quadrature") return Method::quadrature;
  if (s == "monte_carlo") return Method::monte_carlo;
  throw InvalidArgument("unknown estimation method: " + s);
}

struct EstimatorConfig {
  Method method = Method::automatic;
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
  int quad_order = 64;
  unsigned threads = 0;  // 0 = hardware concurrency; never changes results
  std::uint64_t stream = 0;

  // Independent randomness for a sub-task (grid node, branch, ...).
  EstimatorConfig with_stream(std::uint64_t s) const {
    EstimatorConfig c = *this;
    c.stream = derive_key(stream, s);
    return c;
  }
  EstimatorConfig with_samples(std::size_t n) const {
    EstimatorConfig c = *this;
    c.samples = n;
    return c;
  }
  std::uint64_t key() const { return derive_key(seed, stream); }
};

inline std::uint64_t stream_for(double t) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(t));
  std::memcpy(&bits, &t, sizeof(t));
  return bits;
}

struct ScalarEstimate {
  double value = 0.0;
  double std_err = 0.0;
};

// Index of entry (i, j), i ≤ j, in the packed upper triangle.
inline std::size_t vech_index(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  if (i > j) std::swap(i, j);
  return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
}
inline std::size_t vech_size(Eigen::Index n) { return static_cast<std::size_t>(n * (n + 1) / 2); }

struct MmseEstimate {
  SymMatrix matrix;
  MatrixXd std_err;    // per-entry standard error, zero for closed form
  MatrixXd entry_cov;  // covariance of the packed-entry estimator (empty: exact)
  bool entry_cov_full = true;
  Method method = Method::closed_form;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return matrix.dim(); }

  // Standard error of Tr(W·E) for symmetric W.
  double functional_std_err(const MatrixXd& w) const {
    if (entry_cov.size() == 0) return 0.0;
    const Eigen::Index n = dim();
    VectorXd a = VectorXd::Zero(static_cast<Eigen::Index>(vech_size(n)));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        a(static_cast<Eigen::Index>(vech_index(n, i, j))) = i == j ? w(i, i) : w(i, j) + w(j, i);
    if (entry_cov_full) return std::sqrt(std::max(0.0, double(a.transpose() * entry_cov * a)));
    double s = 0.0;
    for (Eigen::Index e = 0; e < a.size(); ++e) s += std::abs(a(e)) * std::sqrt(std::max(0.0, entry_cov(e, e)));
    return s;
  }

  // Weyl-type bound on the eigenvalue error: ‖std_err‖_F.
  double spectral_err() const { return std_err.norm(); }
};

// ---- closed forms ----

// E_G = (Σ⁻¹ + HᵀH)⁻¹, or Σ − ΣHᵀ(HΣHᵀ + I)⁻¹HΣ when Σ is (near) singular.
inline SymMatrix gaussian_mmse(const SymMatrix& cov, const MatrixXd& h) {
  require(h.cols() == cov.dim(), "gaussian_mmse: dimension mismatch");
  const Eigen::Index n = cov.dim();
  const double lo = cov.min_eigenvalue();
  if (lo > 1e-8 * (1.0 + std::abs(cov.trace()))) {
    MatrixXd prec = inverse_pd(cov).matrix() + h.transpose() * h;
    return inverse_pd(SymMatrix(prec));
  }
  const MatrixXd& s = cov.matrix();
  MatrixXd hs = h * s;
  MatrixXd sy = h * s * h.transpose() + MatrixXd::Identity(h.rows(), h.rows());
  Eigen::LLT<MatrixXd> llt(0.5 * (sy + sy.transpose()));
  MatrixXd e = s - hs.transpose() * llt.solve(hs);
  (void)n;
  return SymMatrix(e);
}

inline SymMatrix gaussian_mmse(const SymMatrix& cov, const DiagonalChannel& h) { return gaussian_mmse(cov, h.matrix()); }

// E_L = I − (Σ + I)⁻¹ at the identity channel.
inline SymMatrix linear_mmse(const SymMatrix& cov) {
  const Eigen::Index n = cov.dim();
  return SymMatrix(MatrixXd::Identity(n, n) - inverse_pd(cov + SymMatrix::identity(n)).matrix());
}

// ---- mixture densities and posteriors ----

// Density of a Gaussian mixture whose components are all positive definite.
class MixtureDensity {
 public:
  struct Scratch {
    VectorXd e, w, logr, r;
    MatrixXd resid;  // column k: y − μ_k
  };

  MixtureDensity() = default;

  MixtureDensity(const std::vector<double>& weights, const std::vector<VectorXd>& means, const std::vector<MatrixXd>& covs) {
    n_ = means.front().size();
    const double log2pi = std::log(2.0 * 3.14159265358979323846);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      Comp c;
      c.mean = means[k];
      Eigen::LLT<MatrixXd> llt(0.5 * (covs[k] + covs[k].transpose()));
      if (llt.info() != Eigen::Success) throw InvalidArgument("MixtureDensity: component covariance must be positive definite");
      MatrixXd l = llt.matrixL();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (!(l(i, i) > 0.0)) throw InvalidArgument("MixtureDensity: component covariance must be positive definite");
        logdet += 2.0 * std::log(l(i, i));
      }
      c.linv = l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n_, n_));
      c.precision = c.linv.transpose() * c.linv;
      c.log_norm = std::log(weights[k]) - 0.5 * logdet - 0.5 * static_cast<double>(n_) * log2pi;
      comps_.push_back(std::move(c));
    }
  }

  explicit MixtureDensity(const MixtureInput& x) : MixtureDensity(weights_of(x), means_of(x), covs_of(x)) {}

  Eigen::Index dim() const { return n_; }
  std::size_t size() const { return comps_.size(); }

  Scratch scratch() const {
    Scratch s;
    s.e.resize(n_);
    s.w.resize(n_);
    s.logr.resize(static_cast<Eigen::Index>(comps_.size()));
    s.r.resize(static_cast<Eigen::Index>(comps_.size()));
    s.resid.resize(n_, static_cast<Eigen::Index>(comps_.size()));
    return s;
  }

  // log f(y); leaves normalized responsibilities in s.r and residuals in s.resid.
  double log_density(const VectorXd& y, Scratch& s) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      const Comp& c = comps_[k];
      const Eigen::Index kk = static_cast<Eigen::Index>(k);
      s.resid.col(kk) = y - c.mean;
      s.w.noalias() = c.linv.triangularView<Eigen::Lower>() * s.resid.col(kk);
      s.logr(kk) = c.log_norm - 0.5 * s.w.squaredNorm();
      mx = std::max(mx, s.logr(kk));
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < s.logr.size(); ++k) {
      s.r(k) = std::exp(s.logr(k) - mx);
      sum += s.r(k);
    }
    s.r /= sum;
    return mx + std::log(sum);
  }

  // ∇ log f(y) = −Σ_k r_k P_k (y − μ_k).
  void score(const VectorXd& y, Scratch& s, VectorXd& out) const {
    log_density(y, s);
    out.setZero(n_);
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      const Eigen::Index kk = static_cast<Eigen::Index>(k);
      if (s.r(kk) == 0.0) continue;
      out.noalias() -= s.r(kk) * (comps_[k].precision * s.resid.col(kk));
    }
  }

 private:
  struct Comp {
    VectorXd mean;
    MatrixXd linv;
    MatrixXd precision;
    double log_norm = 0.0;
  };

  static std::vector<double> weights_of(const MixtureInput& x) {
    std::vector<double> w;
    for (const auto& c : x.components()) w.push_back(c.weight);
    return w;
  }
  static std::vector<VectorXd> means_of(const MixtureInput& x) {
    std::vector<VectorXd> m;
    for (const auto& c : x.components()) m.push_back(c.mean);
    return m;
  }
  static std::vector<MatrixXd> covs_of(const MixtureInput& x) {
    std::vector<MatrixXd> m;
    for (const auto& c : x.components()) m.push_back(c.cov.matrix());
    return m;
  }

  Eigen::Index n_ = 0;
  std::vector<Comp> comps_;
};

// Law of Y = HX + N as a mixture: components N(Hμ_k, H S_k Hᵀ + I).
inline MixtureDensity output_density(const MixtureInput& x, const MatrixXd& h) {
  std::vector<double> w;
  std::vector<VectorXd> m;
  std::vector<MatrixXd> c;
  const MatrixXd eye = MatrixXd::Identity(h.rows(), h.rows());
  for (const auto& comp : x.components()) {
    w.push_back(comp.weight);
    m.push_back(h * comp.mean);
    c.push_back(h * comp.cov.matrix() * h.transpose() + eye);
  }
  return MixtureDensity(w, m, c);
}

struct PosteriorStats {
  VectorXd mean;
  SymMatrix cov;
  VectorXd responsibilities;
};

// Posterior of X given Y = y for Y = HX + N, N ~ N(0, I).
class PosteriorModel {
 public:
  struct Workspace {
    MixtureDensity::Scratch ds;
    MatrixXd cond_means;  // column k: m_k
    VectorXd mean, d;
    MatrixXd cov;
    double log_density = 0.0;
  };

  PosteriorModel(const MixtureInput& x, const MatrixXd& h) : x_(&x), h_(h), density_(output_density(x, h)) {
    require(h.cols() == x.dim() && h.rows() == x.dim(), "PosteriorModel: channel must be square of input dimension");
    const Eigen::Index n = x.dim();
    for (const auto& c : x.components()) {
      const MatrixXd& s = c.cov.matrix();
      MatrixXd sy = h * s * h.transpose() + MatrixXd::Identity(n, n);
      Eigen::LLT<MatrixXd> llt(0.5 * (sy + sy.transpose()));
      MatrixXd hs = h * s;
      MatrixXd gain_t = llt.solve(hs);  // (Σy⁻¹ H S) = Gᵀ
      gains_.push_back(gain_t.transpose());
      MatrixXd cc = s - hs.transpose() * gain_t;
      cond_covs_.push_back(0.5 * (cc + cc.transpose()));
    }
  }

  Eigen::Index dim() const { return x_->dim(); }
  const MatrixXd& channel() const { return h_; }
  const MixtureDensity& density() const { return density_; }

  Workspace workspace() const {
    Workspace ws;
    ws.ds = density_.scratch();
    ws.cond_means.resize(dim(), static_cast<Eigen::Index>(x_->size()));
    ws.mean.resize(dim());
    ws.d.resize(dim());
    ws.cov.resize(dim(), dim());
    return ws;
  }

  // Fills ws.mean, ws.cov (Φ_{x|y}), ws.ds.r and ws.log_density.
  void evaluate(const VectorXd& y, Workspace& ws) const {
    ws.log_density = density_.log_density(y, ws.ds);
    const auto& comps = x_->components();
    ws.mean.setZero();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const Eigen::Index kk = static_cast<Eigen::Index>(k);
      const double r = ws.ds.r(kk);
      if (r < 1e-300) continue;
      ws.cond_means.col(kk) = comps[k].mean;
      ws.cond_means.col(kk).noalias() += gains_[k] * ws.ds.resid.col(kk);
      ws.mean.noalias() += r * ws.cond_means.col(kk);
    }
    ws.cov.setZero();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const Eigen::Index kk = static_cast<Eigen::Index>(k);
      const double r = ws.ds.r(kk);
      if (r < 1e-300) continue;
      ws.d = ws.cond_means.col(kk) - ws.mean;
      ws.cov.noalias() += r * cond_covs_[k];
      ws.cov.noalias() += r * (ws.d * ws.d.transpose());
    }
  }

 private:
  const MixtureInput* x_;
  MatrixXd h_;
  MixtureDensity density_;
  std::vector<MatrixXd> gains_;
  std::vector<MatrixXd> cond_covs_;
};

inline PosteriorStats posterior(const MixtureInput& x, const MatrixXd& h, const VectorXd& y) {
  PosteriorModel model(x, h);
  auto ws = model.workspace();
  model.evaluate(y, ws);
  return {ws.mean, SymMatrix(ws.cov), ws.ds.r};
}

// ---- sampling drivers ----

// Draws (x, noise) pairs with counter-based randomness and hands them to a
// per-chunk statistic object created by make_stat(); stat(x, noise, out).
template <class MakeStat>
RunningStats sample_input_noise(const MixtureInput& x, const EstimatorConfig& cfg, std::size_t m, MakeStat&& make_stat, bool full = true) {
  require(cfg.samples >= 2, "Monte Carlo needs at least 2 samples");
  const auto factors = sampling_factors(x);
  const Eigen::Index n = x.dim();
  return monte_carlo(
      m, cfg.samples, cfg.key(), cfg.threads,
      [&] {
        return [&, stat = make_stat(), xs = VectorXd(n), ns = VectorXd(n), z = VectorXd(n)](CounterRng& rng, double* out) mutable {
          draw_sample(x, factors, rng, xs, z);
          for (Eigen::Index i = 0; i < n; ++i) ns(i) = rng.normal();
          stat(xs, ns, out);
        };
      },
      full);
}

inline void pack_vech(const MatrixXd& a, double* out) {
  const Eigen::Index n = a.rows();
  std::size_t e = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out[e++] = a(i, j);
}

inline MmseEstimate estimate_from_stats(const RunningStats& st, Eigen::Index n, double scale = 1.0) {
  MmseEstimate est;
  MatrixXd e(n, n), se(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      std::size_t k = vech_index(n, i, j);
      e(i, j) = e(j, i) = scale * st.mean(k);
      se(i, j) = se(j, i) = std::abs(scale) * st.std_err(k);
    }
  const Eigen::Index m = static_cast<Eigen::Index>(vech_size(n));
  est.entry_cov.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      est.entry_cov(a, b) = scale * scale * st.mean_cov(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  est.entry_cov_full = st.full();
  est.matrix = SymMatrix(e);
  est.std_err = se;
  est.method = Method::monte_carlo;
  est.samples = st.count();
  return est;
}

inline bool full_entry_cov(Eigen::Index n) { return n <= 6; }

inline MmseEstimate mmse_monte_carlo(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  const Eigen::Index n = x.dim();
  PosteriorModel model(x, h);
  const std::size_t m = vech_size(n);
  auto st = sample_input_noise(
      x, cfg, m,
      [&] {
        return [&, ws = model.workspace(), y = VectorXd(n)](const VectorXd& xs, const VectorXd& ns, double* out) mutable {
          y.noalias() = h * xs;
          y += ns;
          model.evaluate(y, ws);
          pack_vech(ws.cov, out);
        };
      },
      full_entry_cov(n));
  auto est = estimate_from_stats(st, n);
  est.seed = cfg.seed;
  return est;
}

// Tensor Gauss–Hermite over the output law of each component.
// TODO: report a truncation estimate from a lower-order rule; the std_err is zero today even though order 64 is off by ~1e-5 for BPSK at snr 4.
inline MmseEstimate mmse_quadrature(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  const Eigen::Index n = x.dim();
  if (n > 3) throw InvalidArgument("mmse_matrix: quadrature is only available for dim <= 3");
  const auto rule = gauss_hermite(cfg.quad_order);
  const std::size_t q = rule.nodes.size();
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= q;
  PosteriorModel model(x, h);
  auto ws = model.workspace();
  MatrixXd acc = MatrixXd::Zero(n, n);
  VectorXd z(n), y(n);
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (const auto& c : x.components()) {
    MatrixXd sy = h * c.cov.matrix() * h.transpose() + MatrixXd::Identity(n, n);
    Eigen::LLT<MatrixXd> llt(0.5 * (sy + sy.transpose()));
    MatrixXd l = llt.matrixL();
    VectorXd ym = h * c.mean;
    MatrixXd part = MatrixXd::Zero(n, n);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      double w = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t a = rem % q;
        rem /= q;
        z(i) = rule.nodes[a];
        w *= rule.weights[a];
      }
      y = ym;
      y.noalias() += l * z;
      model.evaluate(y, ws);
      part.noalias() += w * ws.cov;
    }
    acc += c.weight * part;
  }
  MmseEstimate est;
  est.matrix = SymMatrix(acc);
  est.std_err = MatrixXd::Zero(n, n);
  est.method = Method::quadrature;
  est.samples = total * x.size();
  est.seed = cfg.seed;
  return est;
}

inline MmseEstimate mmse_closed_form(const SymMatrix& cov, const MatrixXd& h, std::uint64_t seed) {
  MmseEstimate est;
  est.matrix = gaussian_mmse(cov, h);
  est.std_err = MatrixXd::Zero(cov.dim(), cov.dim());
  est.method = Method::closed_form;
  est.samples = 0;
  est.seed = seed;
  return est;
}

// E_x(H) = E[Φ_{x|y}]. Single-component inputs dispatch to the closed form
// unless quadrature or Monte Carlo is explicitly requested.
inline MmseEstimate mmse_matrix(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  require(h.rows() == x.dim() && h.cols() == x.dim(), "mmse_matrix: channel dimension mismatch");
  switch (cfg.method) {
    case Method::automatic:
      if (x.is_single_gaussian()) return mmse_closed_form(x[0].cov, h, cfg.seed);
      return mmse_monte_carlo(x, h, cfg);
    case Method::closed_form:
      if (!x.is_single_gaussian()) throw InvalidArgument("mmse_matrix: closed form requires a single Gaussian component");
      return mmse_closed_form(x[0].cov, h, cfg.seed);
    case Method::quadrature:
      return mmse_quadrature(x, h, cfg);
    case Method::monte_carlo:
      return mmse_monte_carlo(x, h, cfg);
  }
  throw InvalidArgument("mmse_matrix: unknown method");
}

inline MmseEstimate mmse_matrix(const MixtureInput& x, const DiagonalChannel& h, const EstimatorConfig& cfg) {
  return mmse_matrix(x, h.matrix(), cfg);
}

// Branch streams: a single branch keeps the caller's stream, so a degenerate
// U reproduces mmse_matrix exactly.
inline EstimatorConfig branch_config(const EstimatorConfig& cfg, std::size_t branches, std::size_t u) {
  return branches == 1 ? cfg : cfg.with_stream(0x6272616e6368ULL + u);
}

// Weighted combination of independent per-branch estimates.
inline MmseEstimate combine_estimates(const std::vector<MmseEstimate>& parts, const std::vector<double>& q) {
  if (parts.size() == 1) return parts.front();
  const Eigen::Index n = parts.front().dim();
  MatrixXd e = MatrixXd::Zero(n, n), var = MatrixXd::Zero(n, n);
  const Eigen::Index m = static_cast<Eigen::Index>(vech_size(n));
  MatrixXd ec = MatrixXd::Zero(m, m);
  bool any_cov = false, full = true;
  Method method = Method::closed_form;
  std::size_t samples = 0;
  for (std::size_t u = 0; u < parts.size(); ++u) {
    const auto& p = parts[u];
    e += q[u] * p.matrix.matrix();
    var += q[u] * q[u] * p.std_err.cwiseAbs2();
    if (p.entry_cov.size() > 0) {
      ec += q[u] * q[u] * p.entry_cov;
      any_cov = true;
      full = full && p.entry_cov_full;
    }
    if (p.method == Method::monte_carlo || (p.method == Method::quadrature && method == Method::closed_form)) method = p.method;
    samples = std::max(samples, p.samples);
  }
  MmseEstimate est;
  est.matrix = SymMatrix(e);
  est.std_err = var.cwiseSqrt();
  if (any_cov) est.entry_cov = ec;
  est.entry_cov_full = full;
  est.method = method;
  est.samples = samples;
  est.seed = parts.front().seed;
  return est;
}

// E_{x|u}(H) = Σ_u q_u E_{x_u}(H), branch errors combined in quadrature.
inline MmseEstimate conditional_mmse(const ConditionalInput& cond, const MatrixXd& h, const EstimatorConfig& cfg) {
  std::vector<MmseEstimate> parts;
  std::vector<double> q;
  for (std::size_t u = 0; u < cond.size(); ++u) {
    parts.push_back(mmse_matrix(cond[u].input, h, branch_config(cfg, cond.size(), u)));
    q.push_back(cond[u].q);
  }
  return combine_estimates(parts, q);
}

inline ScalarEstimate scalar_mmse_trace(const MixtureInput& x, double snr, const EstimatorConfig& cfg) {
  require(snr >= 0.0, "scalar_mmse_trace: snr must be nonnegative");
  const Eigen::Index n = x.dim();
  auto est = mmse_matrix(x, std::sqrt(snr) * MatrixXd::Identity(n, n), cfg);
  return {est.matrix.trace(), est.functional_std_err(MatrixXd::Identity(n, n))};
}

// Paired estimate of E(H1) − E(H2) from common (x, noise) draws, so the
// Monte-Carlo noise largely cancels in the difference.
inline MmseEstimate mmse_difference(const MixtureInput& x, const MatrixXd& h1, const MatrixXd& h2, const EstimatorConfig& cfg) {
  const Eigen::Index n = x.dim();
  if (x.is_single_gaussian() && cfg.method != Method::monte_carlo) {
    auto est = mmse_closed_form(x[0].cov, h1, cfg.seed);
    est.matrix = gaussian_mmse(x[0].cov, h1) - gaussian_mmse(x[0].cov, h2);
    return est;
  }
  PosteriorModel m1(x, h1), m2(x, h2);
  auto st = sample_input_noise(
      x, cfg, vech_size(n),
      [&] {
        return [&, w1 = m1.workspace(), w2 = m2.workspace(), y = VectorXd(n)](const VectorXd& xs, const VectorXd& ns, double* out) mutable {
          y.noalias() = h1 * xs;
          y += ns;
          m1.evaluate(y, w1);
          y.noalias() = h2 * xs;
          y += ns;
          m2.evaluate(y, w2);
          w1.cov -= w2.cov;
          pack_vech(w1.cov, out);
        };
      },
      full_entry_cov(n));
  auto est = estimate_from_stats(st, n);
  est.seed = cfg.seed;
  return est;
}

inline MmseEstimate conditional_mmse_difference(const ConditionalInput& cond, const MatrixXd& h1, const MatrixXd& h2, const EstimatorConfig& cfg) {
  std::vector<MmseEstimate> parts;
  std::vector<double> q;
  for (std::size_t u = 0; u < cond.size(); ++u) {
    parts.push_back(mmse_difference(cond[u].input, h1, h2, branch_config(cfg, cond.size(), u)));
    q.push_back(cond[u].q);
  }
  return combine_estimates(parts, q);
}

}  // namespace crosspoint
