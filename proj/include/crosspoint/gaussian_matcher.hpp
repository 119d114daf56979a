#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crossing_analysis.hpp"
#include "immse_integrals.hpp"

namespace crosspoint {

struct MatchResult {
  SymMatrix sigma_star;           // matched Σ_{x_G} (diagonal Λ for the independent matcher)
  double nu_star = 0.0;           // general / extension / minimal matchers
  VectorXd eta;                   // independent matcher
  SymMatrix c_matrix;             // C in normalized coordinates (general matchers)
  double alpha = 0.0;             // target I(X; Y(t_e)|U), nats
  double alpha_err = 0.0;
  double residual = 0.0;          // |I_G(Σ*, t_e) − α|
  double tolerance = 0.0;         // matcher tolerance on the residual
  int iterations = 0;
  double r_low = 0.0;             // r(1)
  double r_high = 0.0;            // r(0)
  std::vector<int> kept;          // coordinates with nonzero gain at t_e
  std::vector<std::string> notes;
};

namespace detail {

// Coordinates with a nonzero gain at t_e; the normalized problem x̃ = H(t_e)x
// lives on these.
struct Normalization {
  std::vector<int> kept, dropped;
  VectorXd gains;  // kept gains
};

inline Normalization normalization(const ChannelPath& path, double t_e) {
  Normalization nz;
  const VectorXd g = path.gains(t_e);
  std::vector<double> kg;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g(i) > 0.0) {
      nz.kept.push_back(static_cast<int>(i));
      kg.push_back(g(i));
    } else {
      nz.dropped.push_back(static_cast<int>(i));
    }
  }
  nz.gains = Eigen::Map<VectorXd>(kg.data(), static_cast<Eigen::Index>(kg.size()));
  return nz;
}

inline MatrixXd block(const MatrixXd& m, const std::vector<int>& r, const std::vector<int>& c) {
  MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(r[i], c[j]);
  return out;
}

// Maps a kept-block covariance back to full dimension. Dropped coordinates
// follow x_D = A·x_K + w with A = Σ_DK·Σ_KK⁺ and Cov(w) the Schur complement
// of the reference covariance, so reference − result = [I;A]·Δ·[I;A]ᵀ.
inline SymMatrix expand(const SymMatrix& kept_cov, const SymMatrix& reference, const Normalization& nz) {
  const Eigen::Index n = reference.dim();
  if (nz.dropped.empty()) return kept_cov;
  const MatrixXd& r = reference.matrix();
  const MatrixXd skk = block(r, nz.kept, nz.kept);
  const MatrixXd sdk = block(r, nz.dropped, nz.kept);
  const MatrixXd sdd = block(r, nz.dropped, nz.dropped);
  MatrixXd a = MatrixXd::Zero(sdk.rows(), sdk.cols());
  if (skk.size() > 0) a = sdk * skk.completeOrthogonalDecomposition().pseudoInverse();
  const MatrixXd schur = sdd - a * sdk.transpose();
  const MatrixXd k = kept_cov.matrix();
  MatrixXd out = MatrixXd::Zero(n, n);
  const MatrixXd dk = a * k;
  const MatrixXd dd = a * k * a.transpose() + schur;
  for (std::size_t i = 0; i < nz.kept.size(); ++i)
    for (std::size_t j = 0; j < nz.kept.size(); ++j) out(nz.kept[i], nz.kept[j]) = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (std::size_t i = 0; i < nz.dropped.size(); ++i) {
    for (std::size_t j = 0; j < nz.kept.size(); ++j) {
      out(nz.dropped[i], nz.kept[j]) = dk(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out(nz.kept[j], nz.dropped[i]) = dk(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    for (std::size_t j = 0; j < nz.dropped.size(); ++j) out(nz.dropped[i], nz.dropped[j]) = dd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return SymMatrix(out);
}

// Normalized quantities at the identity channel.
struct Normalized {
  Normalization nz;
  SymMatrix sigma;   // H_K·Σ_KK·H_K
  SymMatrix mmse;    // H_K·[E_{x|u}(t_e)]_KK·H_K
  MmseEstimate raw;  // full-dimension E_{x|u}(t_e)
  MiEstimate alpha;
};

inline Normalized normalize(const ConditionalInput& cond, const SymMatrix& reference, const ChannelPath& path, double t_e, const EstimatorConfig& cfg) {
  Normalized out;
  out.nz = normalization(path, t_e);
  const MatrixXd h = path.h(t_e);
  out.raw = conditional_mmse(cond, h, cfg);
  const MatrixXd gk = out.nz.gains.asDiagonal();
  out.sigma = SymMatrix(gk * block(reference.matrix(), out.nz.kept, out.nz.kept) * gk);
  out.mmse = SymMatrix(gk * block(out.raw.matrix.matrix(), out.nz.kept, out.nz.kept) * gk);
  out.alpha = mutual_information(cond, h, cfg.with_stream(0x616c706861ULL));
  return out;
}

inline SymMatrix denormalize(const SymMatrix& s, const Normalization& nz) {
  const VectorXd inv = nz.gains.cwiseInverse();
  return congruence(MatrixXd(inv.asDiagonal()), s);
}

}  // namespace detail

// r(ν) = −½·log det((Σ+I)⁻¹ + ν·C) with base_inv = (Σ+I)⁻¹.
inline double r_of_nu(const SymMatrix& base_inv, const SymMatrix& c, double nu) {
  return -0.5 * logdet_pd(base_inv + nu * c);
}

namespace detail {

// Bisection of r(ν) = α on [0, 1]. Targets outside [r(1), r(0)] by more than
// 4σ of α are rejected; smaller excursions are clamped to the endpoint.
inline void bisect_nu(const SymMatrix& base_inv, const SymMatrix& c, MatchResult& res) {
  const double scale = std::max(1.0, c.max_eigenvalue());
  res.r_high = r_of_nu(base_inv, c, 0.0);
  res.r_low = r_of_nu(base_inv, c, 1.0);
  const double slack = 4.0 * res.alpha_err + 1e-9;
  if (c.max_eigenvalue() <= 1e-12 * scale) {
    res.nu_star = 0.0;
    res.notes.push_back("C vanishes; nu* = 0");
    return;
  }
  if (res.alpha > res.r_high + slack || res.alpha < res.r_low - slack)
    throw NumericalError("match: target mutual information " + std::to_string(res.alpha) + " outside [r(1), r(0)] = [" + std::to_string(res.r_low) + ", " +
                         std::to_string(res.r_high) + "] beyond Monte Carlo tolerance");
  if (res.alpha >= res.r_high) {
    res.nu_star = 0.0;
    if (res.alpha > res.r_high) res.notes.push_back("target above r(0) within tolerance; clamped to nu* = 0");
    return;
  }
  if (res.alpha <= res.r_low) {
    res.nu_star = 1.0;
    if (res.alpha < res.r_low) res.notes.push_back("target below r(1) within tolerance; clamped to nu* = 1");
    return;
  }
  double lo = 0.0, hi = 1.0;
  int it = 0;
  while (hi - lo > 1e-10 && it < 200) {
    const double mid = 0.5 * (lo + hi);
    if (r_of_nu(base_inv, c, mid) > res.alpha) lo = mid;
    else hi = mid;
    ++it;
  }
  res.iterations = it;
  res.nu_star = 0.5 * (lo + hi);
}

// Shared construction for the general matcher and its upper-bounded variant:
// anchor Σ_anchor (Σ_x or Σ^ub), C = E_G(Σ_anchor) − E_{x|u} at identity.
inline MatchResult match_anchor(const Normalized& nm, const SymMatrix& anchor_full, const SymMatrix& anchor_norm) {
  MatchResult res;
  res.kept = nm.nz.kept;
  res.alpha = nm.alpha.value;
  res.alpha_err = nm.alpha.std_err;
  const Eigen::Index k = anchor_norm.dim();
  if (k == 0) {
    res.sigma_star = anchor_full;
    res.notes.push_back("all gains vanish at t_e");
    return res;
  }
  const SymMatrix eye = SymMatrix::identity(k);
  const SymMatrix base_inv = inverse_pd(anchor_norm + eye);
  SymMatrix c = (eye - base_inv) - nm.mmse;
  if (c.min_eigenvalue() < -c.psd_tolerance()) {
    res.notes.push_back("C had negative eigenvalue " + std::to_string(c.min_eigenvalue()) + " from sampling noise; projected onto the PSD cone");
    c = psd_projection(c);
  }
  res.c_matrix = c;
  bisect_nu(base_inv, c, res);
  const SymMatrix star_norm = inverse_pd(base_inv + res.nu_star * c) - eye;
  res.residual = std::abs(r_of_nu(base_inv, c, res.nu_star) - res.alpha);
  res.tolerance = 1e-8 + 4.0 * res.alpha_err;
  res.sigma_star = expand(denormalize(star_norm, nm.nz), anchor_full, nm.nz);
  return res;
}

}  // namespace detail

// Σ* with I_G(Σ*, t_e) = I(X; Y(t_e)|U), Σ* ⪯ Σ_x and Q(x|u, Σ*, t_e) ⪰ 0.
inline MatchResult match_general(const ConditionalInput& cond, const ChannelPath& path, double t_e, const EstimatorConfig& cfg) {
  require(t_e >= 0.0, "match_general: t_e must be nonnegative");
  require(path.dim() == cond.dim(), "match_general: dimension mismatch");
  const SymMatrix sx = overall_covariance(cond);
  const auto nm = detail::normalize(cond, sx, path, t_e, cfg);
  auto res = detail::match_anchor(nm, sx, nm.sigma);
  if (!nm.nz.dropped.empty()) res.notes.push_back("zero-gain coordinates at t_e completed by conditional regression on the kept block");
  return res;
}

// Upper-bounded variant of match_general: the anchor is a caller-supplied Σ^ub satisfying
// I ≤ I_G(Σ^ub) and Q(x|u, Σ^ub, t_e) ⪰ 0 (both checked at 4σ).
inline MatchResult match_extension(const ConditionalInput& cond, const ChannelPath& path, double t_e, const GaussianInput& ub, const EstimatorConfig& cfg) {
  require(path.dim() == cond.dim() && ub.dim() == cond.dim(), "match_extension: dimension mismatch");
  const auto nm = detail::normalize(cond, ub.covariance, path, t_e, cfg);
  const Eigen::Index k = nm.sigma.dim();
  if (k > 0) {
    const double iub = 0.5 * logdet_pd(nm.sigma + SymMatrix::identity(k));
    if (nm.alpha.value > iub + 4.0 * nm.alpha.std_err + 1e-9)
      throw InvalidArgument("match_extension: I(X;Y|U) exceeds the Gaussian mutual information of the upper bound");
    const SymMatrix q = (SymMatrix::identity(k) - inverse_pd(nm.sigma + SymMatrix::identity(k))) - nm.mmse;
    const VectorXd ginv = nm.nz.gains;
    const double err = (ginv.asDiagonal() * detail::block(nm.raw.std_err, nm.nz.kept, nm.nz.kept) * ginv.asDiagonal()).norm();
    if (q.min_eigenvalue() < -4.0 * err - q.psd_tolerance()) throw InvalidArgument("match_extension: Q at the upper bound is not PSD");
  }
  auto res = detail::match_anchor(nm, ub.covariance, nm.sigma);
  return res;
}

// Σ_g = (I − E_{x|u}(t′))⁻¹ − I: the Gaussian with Q(x|u, Σ_g, t′) = 0.
inline MatchResult minimal_match(const ConditionalInput& cond, const ChannelPath& path, double t_prime, const EstimatorConfig& cfg) {
  require(path.dim() == cond.dim(), "minimal_match: dimension mismatch");
  const SymMatrix sx = overall_covariance(cond);
  const auto nm = detail::normalize(cond, sx, path, t_prime, cfg);
  MatchResult res;
  res.kept = nm.nz.kept;
  res.alpha = nm.alpha.value;
  res.alpha_err = nm.alpha.std_err;
  res.nu_star = 1.0;
  const Eigen::Index k = nm.sigma.dim();
  if (k == 0) {
    res.sigma_star = sx;
    return res;
  }
  const SymMatrix eye = SymMatrix::identity(k);
  const SymMatrix gap = eye - nm.mmse;
  if (!(gap.min_eigenvalue() > 1e-12)) throw NumericalError("minimal_match: I - E is numerically singular");
  const SymMatrix star_norm = inverse_pd(gap) - eye;
  const double ig = 0.5 * logdet_pd(star_norm + eye);
  res.residual = std::max(0.0, ig - res.alpha);
  res.tolerance = 1e-8 + 4.0 * res.alpha_err;
  res.sigma_star = detail::expand(detail::denormalize(star_norm, nm.nz), sx, nm.nz);
  return res;
}

// Per-coordinate matching: Λ_ii = η_i·[Σ_x]_ii with ∫₀^{t_e} d_i dτ = 0.
// The Gaussian part of the integral is ½·log(1 + g_i(t_e)²·Λ_ii); the input
// part ∫ B_ii·[E_{x|u}]_ii dτ is integrated once per coordinate.
inline MatchResult match_independent(const ConditionalInput& cond, const ChannelPath& path, double t_e, const EstimatorConfig& cfg, const IntegrationOptions& opt = {}) {
  require(t_e > 0.0, "match_independent: t_e must be positive");
  require(path.dim() == cond.dim(), "match_independent: dimension mismatch");
  const Eigen::Index n = cond.dim();
  const VectorXd sx = overall_covariance(cond).diag();
  const VectorXd g = path.gains(t_e);

  std::vector<MiEstimate> targets(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    targets[static_cast<std::size_t>(i)] = integrate_path(
        path, t_e,
        [&, i](double tau, const EstimatorConfig& c) {
          auto e = conditional_mmse(cond, path.h(tau), c);
          const double b = path.b_diagonal(tau)(i);
          return IntegrandValue{b * e.matrix(i, i), b * e.std_err(i, i)};
        },
        cfg.with_stream(0x696e64ULL + static_cast<std::uint64_t>(i)), opt);
  }

  MatchResult res;
  res.eta = VectorXd::Zero(n);
  VectorXd lam = VectorXd::Zero(n);
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tg = targets[static_cast<std::size_t>(i)];
    res.alpha += tg.value;
    var += tg.std_err * tg.std_err;
    const double g2 = g(i) * g(i);
    if (g2 == 0.0 || sx(i) == 0.0) {
      res.eta(i) = 1.0;
      lam(i) = sx(i);
      continue;
    }
    auto f = [&](double eta) { return 0.5 * std::log1p(g2 * eta * sx(i)) - tg.value; };
    const double tol = std::max(1e-4, 0.5 * tg.std_err);
    if (f(1.0) < 0.0) {
      if (f(1.0) < -(4.0 * tg.std_err + 1e-9))
        throw NumericalError("match_independent: coordinate " + std::to_string(i) + " fails to bracket (target " + std::to_string(tg.value) +
                             " above the Gaussian value " + std::to_string(f(1.0) + tg.value) + ")");
      res.eta(i) = 1.0;
      res.notes.push_back("coordinate " + std::to_string(i) + " clamped to eta = 1 within tolerance");
    } else if (f(0.0) >= 0.0) {
      res.eta(i) = 0.0;
    } else {
      double lo = 0.0, hi = 1.0;
      int it = 0;
      while (it < 200 && (hi - lo > 1e-14)) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) lo = mid;
        else hi = mid;
        ++it;
        if (std::abs(f(mid)) < 1e-3 * tol && hi - lo < 1e-10) break;
      }
      res.iterations = std::max(res.iterations, it);
      res.eta(i) = 0.5 * (lo + hi);
    }
    lam(i) = res.eta(i) * sx(i);
  }
  res.alpha_err = std::sqrt(var);
  res.sigma_star = SymMatrix::diagonal(lam);
  double ig = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ig += 0.5 * std::log1p(g(i) * g(i) * lam(i));
  res.residual = std::abs(ig - res.alpha);
  res.tolerance = std::max(1e-4, 0.5 * res.alpha_err) * static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (g(i) > 0.0) res.kept.push_back(static_cast<int>(i));
  return res;
}

inline MatchResult match_general(const MixtureInput& x, const ChannelPath& path, double t_e, const EstimatorConfig& cfg) {
  return match_general(ConditionalInput::degenerate(x), path, t_e, cfg);
}
inline MatchResult match_independent(const MixtureInput& x, const ChannelPath& path, double t_e, const EstimatorConfig& cfg, const IntegrationOptions& opt = {}) {
  return match_independent(ConditionalInput::degenerate(x), path, t_e, cfg, opt);
}
inline MatchResult minimal_match(const MixtureInput& x, const ChannelPath& path, double t_prime, const EstimatorConfig& cfg) {
  return minimal_match(ConditionalInput::degenerate(x), path, t_prime, cfg);
}

// ---- post-condition checks with fresh randomness ----

struct MatchChecks {
  double mi_gaussian = 0.0;    // I_G(Σ*, t_e)
  double mi_input = 0.0;       // independent estimate of I(X; Y(t_e)|U)
  double mi_err = 0.0;
  bool mi_equal = false;       // |I_G − I| ≤ 1e-3 + 3·err
  double loewner_gap = 0.0;    // min-eig(Σ_x − Σ*) (kept block for the general matcher)
  bool loewner_ok = false;
  double q_min = 0.0;          // min over sampled t ≥ t_e of min-eig(Q)/(4σ) or d/(4σ)
  bool beyond_ok = true;       // Q ⪰ −4σ (or d ≥ −4σ) on the sampled points
  std::vector<double> sampled_t;

  bool all() const { return mi_equal && loewner_ok && beyond_ok; }
};

inline MatchChecks verify_match(const MatchResult& m, const ConditionalInput& cond, const ChannelPath& path, double t_e, const EstimatorConfig& cfg, bool independent, int points = 6) {
  MatchChecks c;
  const MatrixXd h = path.h(t_e);
  c.mi_gaussian = mi_gaussian(m.sigma_star, h).value;
  const auto mi = mutual_information(cond, h, cfg.with_stream(0x766572696679ULL));
  c.mi_input = mi.value;
  c.mi_err = mi.std_err;
  c.mi_equal = std::abs(c.mi_gaussian - c.mi_input) <= 1e-3 + 3.0 * std::hypot(c.mi_err, m.alpha_err);

  const SymMatrix sx = overall_covariance(cond);
  if (independent) {
    c.loewner_gap = (sx.diag() - m.sigma_star.diag()).minCoeff();
    c.loewner_ok = c.loewner_gap >= -1e-10 * (1.0 + sx.trace());
  } else {
    const std::vector<int>& kk = m.kept;
    const SymMatrix diff((sx - m.sigma_star).matrix());
    const SymMatrix kb(detail::block(diff.matrix(), kk, kk));
    c.loewner_gap = kk.empty() ? 0.0 : kb.min_eigenvalue();
    const double tol = 1e-8 * (1.0 + sx.trace()) + 4.0 * m.alpha_err * (1.0 + sx.max_eigenvalue());
    c.loewner_ok = c.loewner_gap >= -tol && diff.min_eigenvalue() >= -tol;
  }

  const GaussianInput g(m.sigma_star);
  c.q_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double t = t_e * (1.0 + 2.0 * static_cast<double>(k) / std::max(1, points - 1));
    c.sampled_t.push_back(t);
    auto q = q_matrix(cond, g, path, t, cfg.with_stream(0x626579ULL));
    if (independent) {
      const VectorXd b = path.b_diagonal(t);
      double d = 0.0;
      for (Eigen::Index i = 0; i < b.size(); ++i) d += b(i) * q.value(i, i);
      const double err = q.mmse.functional_std_err(MatrixXd(b.asDiagonal()));
      const double z = d / std::max(4.0 * err, 1e-9);
      c.q_min = std::min(c.q_min, z);
      if (d < -std::max(4.0 * err, 1e-9)) c.beyond_ok = false;
    } else {
      const double ev = q.value.min_eigenvalue();
      const double err = q.mmse.spectral_err();
      c.q_min = std::min(c.q_min, ev / std::max(4.0 * err, 1e-9));
      if (ev < -std::max(4.0 * err, 1e-9)) c.beyond_ok = false;
    }
  }
  return c;
}

}  // namespace crosspoint
