#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mmse_engine.hpp"

namespace crosspoint {

enum class SeriesKind { weighted_trace, diagonal, eigenvalue, d_i, d_sum, bq_eigenvalue };
enum class Direction { neg_to_nonneg, nonneg_to_neg, negative_zero_positive };
enum class Verdict { consistent, violation, inconclusive };

inline std::string to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::weighted_trace: return "weighted_trace";
    case SeriesKind::diagonal: return "diagonal";
    case SeriesKind::eigenvalue: return "eigenvalue";
    case SeriesKind::d_i: return "d_i";
    case SeriesKind::d_sum: return "d";
    case SeriesKind::bq_eigenvalue: return "bq_eigenvalue";
  }
  return "unknown";
}
inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::neg_to_nonneg: return "neg_to_nonneg";
    case Direction::nonneg_to_neg: return "nonneg_to_neg";
    case Direction::negative_zero_positive: return "negative_zero_positive";
  }
  return "unknown";
}
inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::violation: return "violation";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct Crossing {
  double t_a;
  double t_b;
  Direction direction;
};

// Checks of the structural items attached to a single-crossing statement:
// value ≤ 0 at the start when a crossing exists, increase before the
// crossing, nonnegativity after it, and decay to zero for large gains.
struct ItemChecks {
  bool start_nonpositive = true;
  bool increasing_before = true;
  bool nonneg_after = true;
  bool vanishes_at_limit = true;
  double limit_t = 0.0;
  double limit_value = 0.0;
  double limit_err = 0.0;
  double limit_bound = 0.0;

  bool all() const { return start_nonpositive && increasing_before && nonneg_after && vanishes_at_limit; }
};

struct CrossingReport {
  GainScanGrid grid;
  SeriesKind kind = SeriesKind::diagonal;
  int index = -1;  // diagonal / branch index, −1 for scalar series
  std::vector<double> values;
  std::vector<double> errors;
  std::vector<int> signs;
  std::vector<Crossing> crossings;
  Verdict verdict = Verdict::consistent;
  int isolated_flips = 0;
  std::vector<std::string> notes;
  std::optional<ItemChecks> items;

  int count(Direction d) const {
    return static_cast<int>(std::count_if(crossings.begin(), crossings.end(), [d](const Crossing& c) { return c.direction == d; }));
  }
  int neg_to_nonneg_count() const { return count(Direction::neg_to_nonneg) + count(Direction::negative_zero_positive); }
  int nonneg_to_neg_count() const { return count(Direction::nonneg_to_neg); }
};

inline double zero_band(double err) { return std::max(4.0 * err, 1e-9); }

inline int confident_sign(double value, double err) {
  const double band = zero_band(err);
  if (value > band) return 1;
  if (value < -band) return -1;
  return 0;
}

// Sign-pattern classification at 4σ. A single confirmed point whose sign
// disagrees with the neighbouring runs is reported as an isolated flip
// (inconclusive) instead of a transition.
inline CrossingReport classify_series(const GainScanGrid& grid, std::vector<double> values, std::vector<double> errors, SeriesKind kind, int index = -1) {
  require(values.size() == grid.size() && errors.size() == grid.size(), "classify_series: length mismatch");
  CrossingReport rep;
  rep.grid = grid;
  rep.kind = kind;
  rep.index = index;
  rep.values = std::move(values);
  rep.errors = std::move(errors);
  const std::size_t n = grid.size();
  rep.signs.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.signs[i] = confident_sign(rep.values[i], rep.errors[i]);

  struct Run {
    int sign;
    std::size_t first, last, count;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = rep.signs[i];
    if (s == 0) continue;
    if (!runs.empty() && runs.back().sign == s) {
      runs.back().last = i;
      ++runs.back().count;
    } else {
      runs.push_back({s, i, i, 1});
    }
  }

  // Drop isolated flips: an interior single MC point flanked by opposite
  // signs, or a single end point that would create a nonneg-to-neg change.
  bool changed = true;
  while (changed && runs.size() >= 2) {
    changed = false;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const Run& cur = runs[r];
      if (cur.count != 1 || rep.errors[cur.first] <= 0.0) continue;
      const bool has_prev = r > 0, has_next = r + 1 < runs.size();
      bool isolated = false;
      if (has_prev && has_next) {
        isolated = runs[r - 1].sign != cur.sign && runs[r + 1].sign != cur.sign;
      } else if (has_next) {
        isolated = cur.sign > 0 && runs[r + 1].sign < 0;
      } else if (has_prev) {
        isolated = cur.sign < 0 && runs[r - 1].sign > 0;
      }
      if (!isolated) continue;
      rep.notes.push_back("isolated sign flip at t=" + std::to_string(grid[cur.first]));
      ++rep.isolated_flips;
      runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(r));
      // Merge neighbours that now touch.
      for (std::size_t k = 0; k + 1 < runs.size();) {
        if (runs[k].sign == runs[k + 1].sign) {
          runs[k].last = runs[k + 1].last;
          runs[k].count += runs[k + 1].count;
          runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(k + 1));
        } else {
          ++k;
        }
      }
      changed = true;
      break;
    }
  }

  for (std::size_t r = 0; r + 1 < runs.size(); ++r) {
    const Run &a = runs[r], &b = runs[r + 1];
    bool zeros_between = false;
    for (std::size_t i = a.last + 1; i < b.first; ++i)
      if (rep.signs[i] == 0) zeros_between = true;
    if (a.sign < 0 && b.sign > 0) {
      rep.crossings.push_back({grid[a.last], grid[b.first], zeros_between ? Direction::negative_zero_positive : Direction::neg_to_nonneg});
    } else if (a.sign > 0 && b.sign < 0) {
      rep.crossings.push_back({grid[a.last], grid[b.first], Direction::nonneg_to_neg});
    }
  }

  if (rep.nonneg_to_neg_count() > 0 || rep.neg_to_nonneg_count() > 1) {
    rep.verdict = Verdict::violation;
  } else if (rep.isolated_flips > 0) {
    rep.verdict = Verdict::inconclusive;
  } else {
    rep.verdict = Verdict::consistent;
  }
  if (runs.empty()) rep.notes.push_back("series is zero within error bars on the whole grid; classified consistent with crossing point t'=0");
  return rep;
}

// Item checks on a classified series. `limit_*` describe the value at a large
// parameter where |value| ≤ limit_bound must hold up to 4σ.
inline ItemChecks check_items(const CrossingReport& rep, double limit_t, double limit_value, double limit_err, double limit_bound) {
  ItemChecks c;
  const std::size_t n = rep.values.size();
  std::optional<double> t_cross;
  for (const auto& x : rep.crossings)
    if (x.direction != Direction::nonneg_to_neg) {
      t_cross = x.t_a;
      break;
    }
  if (t_cross) {
    c.start_nonpositive = rep.values[0] <= zero_band(rep.errors[0]);
    for (std::size_t i = 0; i + 1 < n && rep.grid[i + 1] <= *t_cross; ++i) {
      const double tol = 4.0 * std::hypot(rep.errors[i], rep.errors[i + 1]) + 1e-9;
      if (rep.values[i + 1] - rep.values[i] < -tol) c.increasing_before = false;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (rep.grid[i] > *t_cross && rep.signs[i] < 0) {
        // An isolated flip is already reported separately; only count runs.
        bool isolated = (i == 0 || rep.signs[i - 1] > 0) && (i + 1 == n || rep.signs[i + 1] > 0) && rep.errors[i] > 0.0;
        if (!isolated) c.nonneg_after = false;
      }
  }
  c.limit_t = limit_t;
  c.limit_value = limit_value;
  c.limit_err = limit_err;
  c.limit_bound = limit_bound;
  c.vanishes_at_limit = std::abs(limit_value) <= limit_bound + 4.0 * limit_err + 1e-12;
  return c;
}

// ---- q_A for the scalar-parameter channel √γ·I ----

enum class Definiteness { psd, nsd, indefinite };

inline Definiteness classify_definiteness(const SymMatrix& a) {
  const VectorXd ev = a.eigenvalues();
  const double tol = a.psd_tolerance();
  const double lo = ev(0), hi = ev(ev.size() - 1);
  if (lo >= -tol) return Definiteness::psd;
  if (hi <= tol) return Definiteness::nsd;
  return Definiteness::indefinite;
}

// q_A(x, σ², γ) = σ²/(1+σ²γ)·Tr(A) − Tr(A·E_x(γ)).
inline ScalarEstimate q_weighted(const MixtureInput& x, double sigma2, double gamma, const SymMatrix& a, const EstimatorConfig& cfg) {
  require(sigma2 > 0.0, "q_weighted: sigma^2 must be positive");
  require(gamma >= 0.0, "q_weighted: gamma must be nonnegative");
  require(a.dim() == x.dim(), "q_weighted: dimension mismatch");
  switch (classify_definiteness(a)) {
    case Definiteness::indefinite:
      throw InvalidArgument("q_weighted: indefinite weight matrix has no crossing property");
    case Definiteness::nsd: {
      ScalarEstimate r = q_weighted(x, sigma2, gamma, -a, cfg);
      return {-r.value, r.std_err};
    }
    case Definiteness::psd: break;
  }
  const Eigen::Index n = x.dim();
  auto e = mmse_matrix(x, std::sqrt(gamma) * MatrixXd::Identity(n, n), cfg);
  const double g = sigma2 / (1.0 + sigma2 * gamma) * a.trace();
  return {g - (a.matrix() * e.matrix.matrix()).trace(), e.functional_std_err(a.matrix())};
}

struct WeightedReduction {
  double alpha = 0.0;
  MatrixXd a_bar;       // A = α·Ā·Āᵀ with Tr(Ā·Āᵀ) = n
  MixtureInput x_hat;   // law of Āᵀx
};

inline WeightedReduction reduce_weighted(const SymMatrix& a, const MixtureInput& x) {
  require(a.dim() == x.dim(), "reduce_weighted: dimension mismatch");
  if (classify_definiteness(a) != Definiteness::psd) throw InvalidArgument("reduce_weighted: A must be PSD");
  const double tr = a.trace();
  if (!(tr > 0.0)) throw InvalidArgument("reduce_weighted: A = 0 is degenerate (q is identically zero)");
  const double n = static_cast<double>(a.dim());
  WeightedReduction r;
  r.alpha = tr / n;
  r.a_bar = psd_sqrt(a * (1.0 / r.alpha));
  r.x_hat = linear_transform(x, r.a_bar.transpose());
  return r;
}

// α·q_I(x̂, σ², γ) where the error covariance of x̂ = Āᵀx is that of
// estimating x̂ from the original observation √γ·x + N.
inline ScalarEstimate q_reduced(const WeightedReduction& r, const MixtureInput& x, double sigma2, double gamma, const EstimatorConfig& cfg) {
  const Eigen::Index n = x.dim();
  auto e = mmse_matrix(x, std::sqrt(gamma) * MatrixXd::Identity(n, n), cfg);
  MatrixXd e_hat = r.a_bar.transpose() * e.matrix.matrix() * r.a_bar;
  const double nd = static_cast<double>(n);
  const double value = r.alpha * (nd * sigma2 / (1.0 + sigma2 * gamma) - e_hat.trace());
  MatrixXd w = r.a_bar * r.a_bar.transpose();
  return {value, r.alpha * e.functional_std_err(w)};
}

// Series of q_A over a γ grid with classification and item checks.
inline CrossingReport scan_weighted(const MixtureInput& x, double sigma2, const SymMatrix& a, const GainScanGrid& grid, const EstimatorConfig& cfg, double gamma_limit = 1e3) {
  std::vector<double> v(grid.size()), e(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    auto q = q_weighted(x, sigma2, grid[i], a, cfg.with_samples(cfg.samples));
    v[i] = q.value;
    e[i] = q.std_err;
  });
  auto rep = classify_series(grid, v, e, SeriesKind::weighted_trace);
  auto lim = q_weighted(x, sigma2, gamma_limit, a, cfg);
  rep.items = check_items(rep, gamma_limit, lim.value, lim.std_err, std::abs(a.trace()) / gamma_limit);
  return rep;
}

// ---- Q matrices along a path ----

struct QMatrix {
  SymMatrix value;
  double t = 0.0;
  SymMatrix gaussian_cov;
  bool conditioned = false;
  MmseEstimate mmse;       // E_{x(|u)}(t) with error bars
  SymMatrix gaussian_mmse; // E_G(Σ_{x_G}, t)

  double diag_err(Eigen::Index i) const { return mmse.std_err(i, i); }
};

inline QMatrix q_matrix(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg) {
  require(cond.dim() == g.dim() && path.dim() == g.dim(), "q_matrix: dimension mismatch");
  QMatrix q;
  const MatrixXd h = path.h(t);
  q.t = t;
  q.gaussian_cov = g.covariance;
  q.conditioned = cond.conditioned();
  q.mmse = conditional_mmse(cond, h, cfg);
  q.gaussian_mmse = gaussian_mmse(g.covariance, h);
  q.value = q.gaussian_mmse - q.mmse.matrix;
  return q;
}

inline QMatrix q_matrix(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg) {
  return q_matrix(ConditionalInput::degenerate(x), g, path, t, cfg);
}

// Smallest t at which every gain satisfies g_i(t)² ≥ target.
inline double limit_parameter(const ChannelPath& path, double target = 1e3) {
  double t = std::max(1.0, path.plateau_from());
  for (int it = 0; it < 200; ++it) {
    if (path.gains(t).minCoeff() * path.gains(t).minCoeff() >= target) return t;
    t *= 2.0;
  }
  throw NumericalError("limit_parameter: path gains do not grow");
}

inline std::vector<QMatrix> q_series(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, const std::vector<double>& ts, const EstimatorConfig& cfg) {
  std::vector<QMatrix> out(ts.size());
  // Grid points share the sample stream, so neighbouring values are
  // positively correlated and their differences are accurate.
  EstimatorConfig inner = cfg;
  inner.threads = 1;
  parallel_for(ts.size(), cfg.threads, [&](std::size_t i) { out[i] = q_matrix(cond, g, path, ts[i], inner); });
  return out;
}

// Per-diagonal single-crossing scans of [Q]_ii(t) for diagonal Λ.
inline std::vector<CrossingReport> scan_diagonals(const ConditionalInput& cond, const GaussianInput& lambda, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  require(lambda.covariance.is_diagonal(), "scan_diagonals: Lambda must be diagonal");
  auto qs = q_series(cond, lambda, path, grid.t_values, cfg);
  const double t_lim = limit_parameter(path);
  auto q_lim = q_matrix(cond, lambda, path, t_lim, cfg);
  const VectorXd g_lim = path.gains(t_lim);
  std::vector<CrossingReport> reps;
  for (Eigen::Index i = 0; i < cond.dim(); ++i) {
    std::vector<double> v, e;
    for (const auto& q : qs) {
      v.push_back(q.value(i, i));
      e.push_back(q.diag_err(i));
    }
    auto rep = classify_series(grid, v, e, SeriesKind::diagonal, static_cast<int>(i));
    rep.items = check_items(rep, t_lim, q_lim.value(i, i), q_lim.diag_err(i), 1.0 / (g_lim(i) * g_lim(i)));
    reps.push_back(std::move(rep));
  }
  return reps;
}

inline std::vector<CrossingReport> scan_diagonals(const MixtureInput& x, const GaussianInput& lambda, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  return scan_diagonals(ConditionalInput::degenerate(x), lambda, path, grid, cfg);
}

struct DFunctions {
  std::vector<CrossingReport> per_coordinate;  // d_i
  CrossingReport total;                        // d
  bool zero_at_origin = true;                  // d_i(0) = 0 whenever the grid starts at 0
};

// d_i(t) = [B(t)]_ii·[Q]_ii(t) and d = Σ_i d_i.
inline DFunctions d_functions(const ConditionalInput& cond, const GaussianInput& lambda, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  require(lambda.covariance.is_diagonal(), "d_functions: Lambda must be diagonal");
  auto qs = q_series(cond, lambda, path, grid.t_values, cfg);
  const Eigen::Index n = cond.dim();
  DFunctions out;
  std::vector<double> dv(grid.size()), de(grid.size());
  for (std::size_t k = 0; k < qs.size(); ++k) {
    const VectorXd b = path.b_diagonal(grid[k]);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += b(i) * qs[k].value(i, i);
    dv[k] = s;
    de[k] = qs[k].mmse.functional_std_err(MatrixXd(b.asDiagonal()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> v, e;
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const double b = path.b_diagonal(grid[k])(i);
      v.push_back(b * qs[k].value(i, i));
      e.push_back(b * qs[k].diag_err(i));
    }
    if (grid[0] == 0.0 && v[0] != 0.0) out.zero_at_origin = false;
    out.per_coordinate.push_back(classify_series(grid, v, e, SeriesKind::d_i, static_cast<int>(i)));
  }
  out.total = classify_series(grid, dv, de, SeriesKind::d_sum);
  return out;
}

inline DFunctions d_functions(const MixtureInput& x, const GaussianInput& lambda, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  return d_functions(ConditionalInput::degenerate(x), lambda, path, grid, cfg);
}

// ---- eigenvalue scans ----

struct SpectrumPoint {
  double t;
  VectorXd eig;  // ascending
  double err;
  VectorXd bq_eig;
  double bq_err;
};

inline SpectrumPoint spectrum_at(const QMatrix& q, const ChannelPath& path) {
  SpectrumPoint p;
  p.t = q.t;
  p.eig = q.value.eigenvalues();
  p.err = q.mmse.spectral_err();
  const VectorXd bh = path.b_diagonal(q.t).cwiseSqrt();
  p.bq_eig = congruence(MatrixXd(bh.asDiagonal()), q.value).eigenvalues();
  p.bq_err = (bh.asDiagonal() * q.mmse.std_err * bh.asDiagonal()).norm();
  return p;
}

// Sorted spectra along the grid, refined where consecutive spectra jump by
// more than 10% of the overall spectral range.
inline std::vector<SpectrumPoint> tracked_spectra(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg, int max_refinements = 64) {
  auto qs = q_series(cond, g, path, grid.t_values, cfg);
  std::vector<SpectrumPoint> pts;
  for (const auto& q : qs) pts.push_back(spectrum_at(q, path));
  for (int round = 0; round < 4 && max_refinements > 0; ++round) {
    double lo = 0.0, hi = 0.0;
    for (const auto& p : pts) {
      lo = std::min(lo, p.eig.minCoeff());
      hi = std::max(hi, p.eig.maxCoeff());
    }
    const double range = hi - lo;
    if (!(range > 0.0)) break;
    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const double jump = (pts[k + 1].eig - pts[k].eig).cwiseAbs().maxCoeff();
      if (jump > 0.1 * range && pts[k + 1].t - pts[k].t > 1e-9) mids.push_back(0.5 * (pts[k].t + pts[k + 1].t));
    }
    if (mids.empty()) break;
    if (static_cast<int>(mids.size()) > max_refinements) mids.resize(static_cast<std::size_t>(max_refinements));
    max_refinements -= static_cast<int>(mids.size());
    auto extra = q_series(cond, g, path, mids, cfg);
    for (const auto& q : extra) pts.push_back(spectrum_at(q, path));
    std::sort(pts.begin(), pts.end(), [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.t < b.t; });
  }
  return pts;
}

inline std::vector<CrossingReport> eigen_reports(const std::vector<SpectrumPoint>& pts, bool bq) {
  std::vector<double> ts;
  for (const auto& p : pts) ts.push_back(p.t);
  GainScanGrid grid(ts);
  const Eigen::Index n = pts.front().eig.size();
  std::vector<CrossingReport> reps;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> v, e;
    for (const auto& p : pts) {
      v.push_back(bq ? p.bq_eig(i) : p.eig(i));
      e.push_back(bq ? p.bq_err : p.err);
    }
    reps.push_back(classify_series(grid, v, e, bq ? SeriesKind::bq_eigenvalue : SeriesKind::eigenvalue, static_cast<int>(i)));
  }
  return reps;
}

inline std::vector<CrossingReport> scan_eigenvalues(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  auto pts = tracked_spectra(cond, g, path, grid, cfg);
  auto reps = eigen_reports(pts, false);
  const double t_lim = limit_parameter(path);
  auto q_lim = q_matrix(cond, g, path, t_lim, cfg);
  const VectorXd ev = q_lim.value.eigenvalues();
  const double gmin = path.gains(t_lim).minCoeff();
  for (std::size_t i = 0; i < reps.size(); ++i)
    reps[i].items = check_items(reps[i], t_lim, ev(static_cast<Eigen::Index>(i)), q_lim.mmse.spectral_err(), 1.0 / (gmin * gmin));
  return reps;
}

inline std::vector<CrossingReport> scan_eigenvalues(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  return scan_eigenvalues(ConditionalInput::degenerate(x), g, path, grid, cfg);
}

struct BqScan {
  std::vector<CrossingReport> q_reports;
  std::vector<CrossingReport> bq_reports;
  std::vector<bool> relation_holds;  // per grid point
  int violations = 0;
};

// Eigenvalues of B^½·Q·B^½ against those of Q: each sign must be 0 or match.
inline BqScan scan_bq_eigenvalues(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  auto pts = tracked_spectra(cond, g, path, grid, cfg);
  BqScan out;
  out.q_reports = eigen_reports(pts, false);
  out.bq_reports = eigen_reports(pts, true);
  for (const auto& p : pts) {
    bool ok = true;
    for (Eigen::Index i = 0; i < p.eig.size(); ++i) {
      const int sq = confident_sign(p.eig(i), p.err);
      const int sb = confident_sign(p.bq_eig(i), p.bq_err);
      if (sq * sb < 0) ok = false;
      // Sylvester inertia: a confirmed sign of B^½QB^½ needs the same sign
      // among the eigenvalues of Q at the paired index.
      if (sb != 0 && sq == 0 && p.err == 0.0 && std::abs(p.eig(i)) <= 1e-9) ok = false;
    }
    out.relation_holds.push_back(ok);
    if (!ok) ++out.violations;
  }
  return out;
}

inline BqScan scan_bq_eigenvalues(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, const GainScanGrid& grid, const EstimatorConfig& cfg) {
  return scan_bq_eigenvalues(ConditionalInput::degenerate(x), g, path, grid, cfg);
}

// ---- derivative lower bound ----

struct DerivativeBound {
  SymMatrix lhs;  // finite-difference D_t Q
  SymMatrix rhs;  // 2(E·B·E − E_G·B·E_G)
  bool holds = false;
  double min_gap = 0.0;      // min-eig(lhs − rhs)
  double tolerance = 0.0;    // discretization + 4σ Monte Carlo
  double discretization = 0.0;
  bool central = true;
};

inline DerivativeBound check_derivative_bound(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg, double delta = 1e-3) {
  require(t >= 0.0 && delta > 0.0, "check_derivative_bound: bad arguments");
  const auto kinks = path.kinks();
  auto kink_in = [&](double a, double b) {
    for (double k : kinks)
      if (k > a && k <= b) return true;
    return false;
  };
  DerivativeBound out;
  out.central = t - 2.0 * delta >= 0.0 && !kink_in(t - 2.0 * delta, t + 2.0 * delta);
  if (!out.central && kink_in(t, t + 2.0 * delta))
    throw InvalidArgument("check_derivative_bound: t lies within 2*delta of a path kink");

  // D(h): difference quotient of Q at step h; E part from paired samples.
  auto quotient = [&](double h, MatrixXd& se) {
    const double ta = out.central ? t + h : t + h;
    const double tb = out.central ? t - h : t;
    const double width = ta - tb;
    const MatrixXd ha = path.h(ta), hb = path.h(tb);
    auto de = conditional_mmse_difference(cond, ha, hb, cfg);
    MatrixXd dg = (gaussian_mmse(g.covariance, ha) - gaussian_mmse(g.covariance, hb)).matrix();
    se = de.std_err / width;
    return MatrixXd((dg - de.matrix.matrix()) / width);
  };
  MatrixXd se1, se2;
  MatrixXd d1 = quotient(delta, se1);
  MatrixXd d2 = quotient(2.0 * delta, se2);
  out.lhs = SymMatrix(d1);
  out.discretization = SymMatrix(d1 - d2).eigenvalues().cwiseAbs().maxCoeff();

  const MatrixXd h = path.h(t);
  auto e = conditional_mmse(cond, h, cfg);
  const MatrixXd b = path.b_diagonal(t).asDiagonal();
  const MatrixXd em = e.matrix.matrix();
  const MatrixXd eg = gaussian_mmse(g.covariance, h).matrix();
  out.rhs = SymMatrix(2.0 * (em * b * em - eg * b * eg));
  const double rhs_err = 4.0 * e.std_err.norm() * (b * em).norm();
  // The MC parts of lhs at steps δ and 2δ also enter the discretization
  // estimate; their noise is accounted for once via 4σ of the δ quotient.
  out.tolerance = out.discretization + 4.0 * (se1.norm() + rhs_err) + 4.0 * se2.norm() + 1e-9;
  out.min_gap = (out.lhs - out.rhs).min_eigenvalue();
  out.holds = out.min_gap >= -out.tolerance;
  return out;
}

inline DerivativeBound check_derivative_bound(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg, double delta = 1e-3) {
  return check_derivative_bound(ConditionalInput::degenerate(x), g, path, t, cfg, delta);
}

// ---- Fisher information ----

struct FisherReport {
  SymMatrix J;           // I − H·E·Hᵀ
  SymMatrix W;           // H·Q·Hᵀ
  SymMatrix J_gaussian;  // I − H·E_G·Hᵀ
  double t = 0.0;
  MatrixXd J_err;        // per-entry standard error inherited from E
  double identity_residual = 0.0;  // ‖(J − J_G) − W‖_max
};

inline FisherReport fisher(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg) {
  require(x.dim() == g.dim() && path.dim() == x.dim(), "fisher: dimension mismatch");
  const MatrixXd h = path.h(t);
  const Eigen::Index n = x.dim();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  auto e = mmse_matrix(x, h, cfg);
  const SymMatrix eg = gaussian_mmse(g.covariance, h);
  FisherReport r;
  r.t = t;
  r.J = SymMatrix(eye - h * e.matrix.matrix() * h.transpose());
  r.J_gaussian = SymMatrix(eye - h * eg.matrix() * h.transpose());
  r.W = SymMatrix(h * (eg - e.matrix).matrix() * h.transpose());
  r.J_err = (h.cwiseAbs() * e.std_err * h.cwiseAbs().transpose());
  r.identity_residual = ((r.J - r.J_gaussian) - r.W).matrix().cwiseAbs().maxCoeff();
  return r;
}

// Fisher matrix of Y from sampled scores: E[∇log f_Y ∇log f_Yᵀ].
inline MmseEstimate fisher_score_estimate(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  const Eigen::Index n = x.dim();
  const MixtureDensity dens = output_density(x, h);
  auto st = sample_input_noise(
      x, cfg, vech_size(n),
      [&] {
        return [&, s = dens.scratch(), y = VectorXd(n), sc = VectorXd(n), outer = MatrixXd(n, n)](const VectorXd& xs, const VectorXd& ns, double* out) mutable {
          y.noalias() = h * xs;
          y += ns;
          dens.score(y, s, sc);
          outer.noalias() = sc * sc.transpose();
          pack_vech(outer, out);
        };
      },
      full_entry_cov(n));
  auto est = estimate_from_stats(st, n);
  est.seed = cfg.seed;
  return est;
}

}  // namespace crosspoint
