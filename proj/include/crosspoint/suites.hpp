#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bc_capacity.hpp"
#include "crossing_analysis.hpp"
#include "gaussian_matcher.hpp"
#include "immse_integrals.hpp"
#include "io.hpp"
#include "reference_oracles.hpp"

namespace crosspoint {

struct SuiteOptions {
  std::uint64_t seed = 20240601;
  unsigned threads = 0;
  double scale = 1.0;  // multiplies instance counts (at least one instance each)
};

struct SuiteResult {
  int id = 0;
  std::string name;
  bool pass = true;
  bool violation = false;  // a crossing verdict of "violation" was found
  int instances = 0;
  int failed = 0;
  std::string summary;
  std::vector<std::string> failures;  // first few only
  std::uint64_t digest = 0;
  double seconds = 0.0;
};

namespace suites {

inline int count(int full, const SuiteOptions& o) { return std::max(1, static_cast<int>(std::lround(full * o.scale))); }

class Recorder {
 public:
  Recorder(int id, std::string name) {
    res_.id = id;
    res_.name = std::move(name);
    start_ = std::chrono::steady_clock::now();
  }
  void fail(const std::string& what) {
    res_.pass = false;
    ++res_.failed;
    if (res_.failures.size() < 8) res_.failures.push_back(what);
  }
  void check(bool ok, const std::string& what) {
    if (!ok) fail(what);
  }
  Digest& digest() { return digest_; }
  SuiteResult& result() { return res_; }
  SuiteResult finish(int instances, std::string summary) {
    res_.instances = instances;
    res_.summary = std::move(summary);
    res_.digest = digest_.value();
    res_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return res_;
  }

 private:
  SuiteResult res_;
  Digest digest_;
  std::chrono::steady_clock::time_point start_;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline EstimatorConfig mc_config(const SuiteOptions& o, std::uint64_t suite, std::size_t samples) {
  EstimatorConfig c;
  c.method = Method::automatic;
  c.seed = derive_key(o.seed, suite);
  c.samples = samples;
  c.threads = o.threads;
  return c;
}

inline CounterRng instance_rng(const SuiteOptions& o, std::uint64_t suite, int i) { return CounterRng(derive_key(o.seed, suite * 7919ULL), static_cast<std::uint64_t>(i)); }

inline std::uint64_t instance_seed(const SuiteOptions& o, std::uint64_t suite, int i) { return derive_key(derive_key(o.seed, suite), static_cast<std::uint64_t>(i)); }

inline VectorXd uniform_vector(CounterRng& rng, Eigen::Index n, double lo, double hi) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = lo + (hi - lo) * rng.uniform();
  return v;
}

// Two-anchor piecewise path at t = 1, 2 with increasing diagonal gains.
inline ChannelPath random_piecewise_path(CounterRng& rng, Eigen::Index n) {
  const VectorXd g1 = uniform_vector(rng, n, 0.3, 1.5);
  const VectorXd g2 = g1 + uniform_vector(rng, n, 0.1, 1.5);
  return make_path({DiagonalChannel(g1), DiagonalChannel(g2)});
}

struct PathCase {
  ChannelPath path;
  GainScanGrid grid;
  double t_mid;  // a representative interior parameter (snr 1 or the first anchor)
};

inline PathCase path_case(CounterRng& rng, Eigen::Index n, bool snr, std::size_t points) {
  if (snr) return {snr_path(100.0, n), GainScanGrid::zero_then_geometric(1e-2, 1e2, points), 1.0};
  return {random_piecewise_path(rng, n), GainScanGrid::linspace(0.0, 4.0, points), 1.0};
}

inline ConditionalInput random_conditional(int n, int branches, int k, std::uint64_t seed, CounterRng& rng, bool discrete = false) {
  std::vector<double> q(static_cast<std::size_t>(branches));
  double s = 0.0;
  for (auto& v : q) s += (v = 0.2 + rng.uniform());
  std::vector<ConditionalBranch> br;
  for (int b = 0; b < branches; ++b) {
    const std::uint64_t sb = derive_key(seed, static_cast<std::uint64_t>(b));
    br.push_back({q[static_cast<std::size_t>(b)] / s, discrete ? seeded_constellation(n, k, sb) : seeded_random_mixture(n, k, sb)});
  }
  return ConditionalInput(std::move(br));
}

inline void add(Digest& d, const CrossingReport& r) {
  for (double v : r.values) d.add(v);
  for (double v : r.errors) d.add(v);
  d.add(to_string(r.verdict));
  if (r.items) {
    d.add(r.items->limit_value);
    d.add(r.items->limit_err);
  }
}

inline void add(Digest& d, const MmseEstimate& e) {
  d.add(e.matrix);
  d.add(e.std_err);
}

inline void add(Digest& d, const MiEstimate& m) {
  d.add(m.value);
  d.add(m.std_err);
}

// Crossing discipline for one classified series.
inline std::string crossing_problem(const CrossingReport& r, bool need_items) {
  if (r.verdict == Verdict::violation) return "violation verdict";
  if (r.nonneg_to_neg_count() > 0) return "nonneg-to-neg transition";
  if (r.neg_to_nonneg_count() > 1) return "more than one neg-to-nonneg transition";
  if (need_items && r.items && !r.items->all()) {
    const auto& it = *r.items;
    if (!it.start_nonpositive) return "item: start not nonpositive";
    if (!it.increasing_before) return "item: not increasing before crossing";
    if (!it.nonneg_after) return "item: negative after crossing";
    return "item: no decay at limit (|" + fmt(it.limit_value) + "| > " + fmt(it.limit_bound) + " + 4*" + fmt(it.limit_err) + ")";
  }
  return {};
}

// ---- 1. Gaussian closed form ----

inline SuiteResult gaussian_closed_form(const SuiteOptions& o) {
  Recorder rec(1, "Gaussian closed-form equivalence");
  const int count_n = count(20, o);
  auto cfg = mc_config(o, 1, 20000);
  cfg.method = Method::monte_carlo;
  double worst = 0.0;
  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 1, i);
    const int n = 1 + i % 4;
    const SymMatrix cov = seeded_psd(n, instance_seed(o, 1, i), 1.5, 0.1);
    const VectorXd mean = uniform_vector(rng, n, -1.0, 1.0);
    const MatrixXd h = uniform_vector(rng, n, 0.2, 2.0).asDiagonal();
    const auto mc = mmse_matrix(MixtureInput::gaussian(cov, mean), h, cfg.with_stream(static_cast<std::uint64_t>(i)));
    const SymMatrix cf = gaussian_mmse(cov, h);
    add(rec.digest(), mc);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a; b < n; ++b) {
        // The posterior covariance of a Gaussian input does not depend on y,
        // so the sampling error is at rounding level.
        const double tol = 3.0 * mc.std_err(a, b) + 1e-12 * (1.0 + std::abs(cf(a, b)));
        const double d = std::abs(mc.matrix(a, b) - cf(a, b));
        worst = std::max(worst, d / tol);
        rec.check(d <= tol, "instance " + std::to_string(i) + " entry (" + std::to_string(a) + "," + std::to_string(b) + ") off by " + fmt(d));
      }
  }
  return rec.finish(count_n, "worst |MC-closed|/tol = " + fmt(worst));
}

// ---- 2. BPSK quadrature oracle ----

inline SuiteResult bpsk_oracle(const SuiteOptions& o) {
  Recorder rec(2, "BPSK oracle");
  auto cfg = mc_config(o, 2, 200000);
  cfg.method = Method::monte_carlo;
  double worst = 0.0;
  const std::vector<double> snrs{0.25, 0.5, 1.0, 2.0, 4.0};
  for (double s : snrs) {
    const double ref = oracle::bpsk_mmse(s, 64);
    const auto mc = mmse_matrix(bpsk(), MatrixXd::Constant(1, 1, std::sqrt(s)), cfg.with_stream(stream_for(s)));
    add(rec.digest(), mc);
    const double z = std::abs(mc.matrix(0, 0) - ref) / mc.std_err(0, 0);
    worst = std::max(worst, z);
    rec.check(z <= 3.0, "snr " + fmt(s) + ": MC " + fmt(mc.matrix(0, 0)) + " vs oracle " + fmt(ref) + " (" + fmt(z) + " sigma)");
  }
  return rec.finish(static_cast<int>(snrs.size()), "worst deviation " + fmt(worst) + " sigma");
}

// ---- 3. weighted-trace crossing q_A ----

inline SuiteResult weighted_crossing(const SuiteOptions& o) {
  Recorder rec(3, "Weighted-trace single crossing (q_A)");
  const int count_n = count(100, o);
  const auto cfg = mc_config(o, 3, 20000);
  const auto grid = GainScanGrid::zero_then_geometric(1e-2, 1e2, 50);
  int crossings = 0;
  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 3, i);
    const int n = 1 + i % 4, k = 2 + (i / 4) % 3;
    const std::uint64_t s = instance_seed(o, 3, i);
    const MixtureInput x = seeded_random_mixture(n, k, s);
    SymMatrix a = seeded_psd(n, derive_key(s, 0xa), 1.0);
    if (i % 5 == 0) {
      const VectorXd v = uniform_vector(rng, n, -1.0, 1.0);
      a = SymMatrix(v * v.transpose());
    }
    const double sigma2 = overall_covariance(x).trace() / n * (0.6 + 0.8 * rng.uniform());
    const auto rep = scan_weighted(x, sigma2, a, grid, cfg.with_stream(static_cast<std::uint64_t>(i)));
    add(rec.digest(), rep);
    crossings += rep.neg_to_nonneg_count();
    if (rep.verdict == Verdict::violation) rec.result().violation = true;
    const auto p = crossing_problem(rep, true);
    if (!p.empty()) rec.fail("instance " + std::to_string(i) + ": " + p);
  }
  return rec.finish(count_n, std::to_string(crossings) + " confirmed crossings, " + std::to_string(rec.result().failed) + " failing instances");
}

// ---- 4 and 5. per-diagonal and per-eigenvalue crossing ----

struct CrossingSuites {
  SuiteResult crossing;
  SuiteResult relation;
};

inline CrossingSuites matrix_crossing(const SuiteOptions& o) {
  Recorder rec(4, "Per-diagonal and per-eigenvalue single crossing");
  Recorder rel(5, "Sign relation between eigenvalues of B(t)Q and Q");
  const int count_n = count(50, o);
  const auto cfg = mc_config(o, 4, 20000);
  int series = 0, points = 0;

  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 4, i);
    const int n = 1 + i % 3;
    const std::uint64_t s = instance_seed(o, 4, i);
    const ConditionalInput cond = i % 2 == 1 ? random_conditional(n, 2, 2, s, rng) : ConditionalInput::degenerate(seeded_random_mixture(n, 2 + i % 3, s));
    const auto pc = path_case(rng, n, (i / 2) % 2 == 0, 60);
    const VectorXd lam = overall_covariance(cond).diag().cwiseProduct(uniform_vector(rng, n, 0.6, 1.4));
    const auto reps = scan_diagonals(cond, GaussianInput::diagonal(lam), pc.path, pc.grid, cfg.with_stream(static_cast<std::uint64_t>(i)));
    for (const auto& r : reps) {
      add(rec.digest(), r);
      ++series;
      if (r.verdict == Verdict::violation) rec.result().violation = true;
      const auto p = crossing_problem(r, true);
      if (!p.empty()) rec.fail("diagonal instance " + std::to_string(i) + " [" + std::to_string(r.index) + "]: " + p);
    }
  }

  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 40, i);
    const int n = 2 + i % 2;
    const std::uint64_t s = instance_seed(o, 40, i);
    const ConditionalInput cond = i % 2 == 0 ? random_conditional(n, 2, 2, s, rng) : ConditionalInput::degenerate(seeded_random_mixture(n, 2 + i % 3, s));
    const auto pc = path_case(rng, n, (i / 2) % 2 == 0, 60);
    const SymMatrix sx = overall_covariance(cond);
    SymMatrix sg = seeded_psd(n, derive_key(s, 0x67), 1.0, 0.05);
    sg = sg * (sx.trace() / sg.trace() * (0.6 + 0.8 * rng.uniform()));
    const GaussianInput g(sg);
    const auto ecfg = cfg.with_stream(0x10000ULL + static_cast<std::uint64_t>(i));
    const auto scan = scan_bq_eigenvalues(cond, g, pc.path, pc.grid, ecfg);
    const double t_lim = limit_parameter(pc.path);
    const auto q_lim = q_matrix(cond, g, pc.path, t_lim, ecfg);
    const VectorXd ev = q_lim.value.eigenvalues();
    const double gmin = pc.path.gains(t_lim).minCoeff();
    for (std::size_t k = 0; k < scan.q_reports.size(); ++k) {
      auto r = scan.q_reports[k];
      r.items = check_items(r, t_lim, ev(static_cast<Eigen::Index>(k)), q_lim.mmse.spectral_err(), 1.0 / (gmin * gmin));
      add(rec.digest(), r);
      ++series;
      if (r.verdict == Verdict::violation) rec.result().violation = true;
      const auto p = crossing_problem(r, true);
      if (!p.empty()) rec.fail("eigenvalue instance " + std::to_string(i) + " [" + std::to_string(k) + "]: " + p);
    }
    for (const auto& r : scan.bq_reports) {
      add(rec.digest(), r);
      ++series;
      if (r.verdict == Verdict::violation) rec.result().violation = true;
      const auto p = crossing_problem(r, false);
      if (!p.empty()) rec.fail("B(t)Q eigenvalue instance " + std::to_string(i) + " [" + std::to_string(r.index) + "]: " + p);
    }
    for (std::size_t k = 0; k < scan.relation_holds.size(); ++k) {
      ++points;
      rel.digest().add(scan.relation_holds[k] ? 1.0 : 0.0);
      if (!scan.relation_holds[k]) rel.fail("eigenvalue instance " + std::to_string(i) + " at t=" + fmt(scan.q_reports.front().grid[k]));
    }
  }
  CrossingSuites out;
  out.crossing = rec.finish(2 * count_n, std::to_string(series) + " series, " + std::to_string(rec.result().failed) + " failing");
  out.relation = rel.finish(count_n, std::to_string(points) + " grid points, " + std::to_string(rel.result().failed) + " sign mismatches");
  return out;
}

// ---- 6. derivative lower bound ----

inline SuiteResult derivative_bound(const SuiteOptions& o) {
  Recorder rec(6, "Derivative lower bound");
  const int count_n = count(20, o);
  const auto cfg = mc_config(o, 6, 20000);
  double worst_gap = 0.0, worst_eq = 0.0;
  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 6, i);
    const int n = 1 + i % 3;
    const std::uint64_t s = instance_seed(o, 6, i);
    const bool gaussian = i % 4 == 0;
    ConditionalInput cond;
    if (gaussian) cond = ConditionalInput::degenerate(MixtureInput::gaussian(seeded_psd(n, s, 1.0, 0.1)));
    else if (i % 4 == 3) cond = random_conditional(n, 2, 2, s, rng);
    else cond = ConditionalInput::degenerate(seeded_random_mixture(n, 2 + i % 3, s));
    const bool snr = i % 2 == 0;
    const auto pc = path_case(rng, n, snr, 2);
    const SymMatrix sg = i % 3 == 0 ? SymMatrix::diagonal(overall_covariance(cond).diag() * (0.6 + 0.8 * rng.uniform()))
                                    : seeded_psd(n, derive_key(s, 0x67), 1.0, 0.1);
    const GaussianInput g(sg);
    for (int k = 0; k < 10; ++k) {
      const double t = snr ? 0.05 * std::pow(400.0, k / 9.0) : 0.15 + 0.41 * k;
      const auto d = check_derivative_bound(cond, g, pc.path, t, cfg.with_stream(static_cast<std::uint64_t>(i * 16 + k)));
      rec.digest().add(d.lhs);
      rec.digest().add(d.rhs);
      worst_gap = std::min(worst_gap, d.min_gap / d.tolerance);
      rec.check(d.holds, "instance " + std::to_string(i) + " t=" + fmt(t) + ": min gap " + fmt(d.min_gap) + " < -" + fmt(d.tolerance));
      if (gaussian) {
        const double dev = (d.lhs - d.rhs).eigenvalues().cwiseAbs().maxCoeff();
        worst_eq = std::max(worst_eq, dev / d.tolerance);
        rec.check(dev <= d.tolerance, "Gaussian instance " + std::to_string(i) + " t=" + fmt(t) + ": |lhs-rhs| " + fmt(dev) + " > " + fmt(d.tolerance));
      }
    }
  }
  return rec.finish(count_n, "worst gap/tol " + fmt(worst_gap) + ", Gaussian equality worst dev/tol " + fmt(worst_eq));
}

// ---- 7. three-way mutual information ----

struct MiCase {
  ConditionalInput cond;
  ChannelPath path;
  double t_end;
};

inline MiCase mi_case(const SuiteOptions& o, int i) {
  auto rng = instance_rng(o, 7, i);
  const int n = 1 + i % 3;
  const std::uint64_t s = instance_seed(o, 7, i);
  ConditionalInput cond;
  switch (i % 5) {
    case 0: cond = ConditionalInput::degenerate(MixtureInput::gaussian(seeded_psd(n, s, 1.0, 0.1))); break;
    case 1: {
      std::vector<ConditionalBranch> br;
      br.push_back({0.4, MixtureInput::gaussian(seeded_psd(n, s, 1.0, 0.1))});
      br.push_back({0.6, MixtureInput::gaussian(seeded_psd(n, derive_key(s, 1), 0.5, 0.1), uniform_vector(rng, n, -1, 1))});
      cond = ConditionalInput(std::move(br));
      break;
    }
    case 2: cond = ConditionalInput::degenerate(seeded_random_mixture(n, 3, s)); break;
    case 3: cond = random_conditional(n, 2, 3, s, rng); break;
    default: cond = ConditionalInput::degenerate(seeded_constellation(n, 4, s)); break;
  }
  const bool snr = i % 2 == 0;
  return {cond, snr ? snr_path(100.0, n) : random_piecewise_path(rng, n), 2.0};
}

inline bool all_gaussian(const ConditionalInput& c) {
  for (const auto& b : c.branches())
    if (!b.input.is_single_gaussian()) return false;
  return true;
}

inline SuiteResult mi_agreement(const SuiteOptions& o) {
  Recorder rec(7, "Three-way mutual information agreement");
  const int count_n = count(20, o);
  auto cfg = mc_config(o, 7, 40000);
  IntegrationOptions opt;
  opt.max_intervals = 64;
  double worst = 0.0;
  int comparisons = 0;
  for (int i = 0; i < count_n; ++i) {
    const auto mc = mi_case(o, i);
    const MatrixXd h = mc.path.h(mc.t_end);
    std::vector<MiEstimate> est;
    std::vector<std::string> names;
    if (all_gaussian(mc.cond)) {
      est.push_back(mutual_information(mc.cond, h, cfg));
      names.push_back("closed form");
    }
    est.push_back(mi_direct(mc.cond, h, cfg.with_stream(0x100ULL + static_cast<std::uint64_t>(i))));
    names.push_back("direct");
    auto icfg = cfg.with_stream(0x200ULL + static_cast<std::uint64_t>(i)).with_samples(10000);
    est.push_back(mi_immse(mc.cond, mc.path, mc.t_end, icfg, opt));
    names.push_back("I-MMSE");
    for (const auto& e : est) add(rec.digest(), e);
    for (std::size_t a = 0; a < est.size(); ++a)
      for (std::size_t b = a + 1; b < est.size(); ++b) {
        ++comparisons;
        const double tol = 3.0 * std::hypot(est[a].std_err, est[b].std_err) + 1e-9;
        const double d = std::abs(est[a].value - est[b].value);
        worst = std::max(worst, d / tol);
        rec.check(d <= tol, "instance " + std::to_string(i) + ": " + names[a] + " " + fmt(est[a].value) + " vs " + names[b] + " " + fmt(est[b].value) +
                                " (tol " + fmt(tol) + ")");
      }
  }
  return rec.finish(count_n, std::to_string(comparisons) + " comparisons, worst |diff|/tol = " + fmt(worst));
}

// ---- 8. entropy power inequality ----

inline SuiteResult epi_suite(const SuiteOptions& o) {
  Recorder rec(8, "Entropy power inequality special case");
  const int count_n = count(20, o);
  const auto cfg = mc_config(o, 8, 40000);
  std::vector<double> snrs;
  for (int k = 0; k < 12; ++k) snrs.push_back(0.01 * std::pow(1e4, k / 11.0));
  double worst_lim = 0.0, min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count_n; ++i) {
    const int n = 1 + i % 2;
    const std::uint64_t s = instance_seed(o, 8, i);
    EpiSpec spec{seeded_random_mixture(n, 2 + i % 3, s), i % 2 == 0 ? SymMatrix::identity(n) : seeded_psd(n, derive_key(s, 0x4e), 1.0, 0.2), GainScanGrid(snrs), 0.0};
    const auto r = epi_check(spec, cfg.with_stream(static_cast<std::uint64_t>(i)));
    for (const auto& p : r.points) {
      rec.digest().add(p.delta);
      rec.digest().add(p.err);
    }
    rec.digest().add(r.limit_delta);
    rec.digest().add(r.epi_slack);
    worst_lim = std::max(worst_lim, std::abs(r.limit_delta));
    min_slack = std::min(min_slack, r.epi_slack);
    for (const auto& p : r.points)
      rec.check(p.ok, "instance " + std::to_string(i) + " snr " + fmt(p.snr) + ": delta " + fmt(p.delta) + " > 3*" + fmt(p.err));
    rec.check(std::abs(r.limit_delta) <= 2e-2, "instance " + std::to_string(i) + ": |delta(1e3)| = " + fmt(std::abs(r.limit_delta)));
    rec.check(r.epi_holds, "instance " + std::to_string(i) + ": entropy power slack " + fmt(r.epi_slack) + " (err " + fmt(r.epi_err) + ")");
  }
  return rec.finish(count_n, "max |delta(1e3)| = " + fmt(worst_lim) + ", min EPI slack = " + fmt(min_slack));
}

// ---- 9. Gaussian matchers ----

inline SuiteResult matcher_suite(const SuiteOptions& o) {
  Recorder rec(9, "Gaussian matchers");
  const int count_n = count(20, o);
  const auto cfg = mc_config(o, 9, 40000);
  IntegrationOptions opt;
  opt.max_intervals = 32;
  double worst_res = 0.0;
  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 9, i);
    const int n = 1 + i % 3;
    const std::uint64_t s = instance_seed(o, 9, i);
    const ConditionalInput cond = i % 3 == 2 ? random_conditional(n, 2, 2, s, rng) : ConditionalInput::degenerate(seeded_random_mixture(n, 2 + i % 3, s));
    const bool snr = i % 2 == 0;
    const auto pc = path_case(rng, n, snr, 2);
    const double t_e = 1.0;
    const auto icfg = cfg.with_stream(static_cast<std::uint64_t>(i));
    const std::string tag = "instance " + std::to_string(i);
    try {
      const auto m = match_general(cond, pc.path, t_e, icfg);
      rec.digest().add(m.sigma_star);
      rec.digest().add(m.nu_star);
      const auto c = verify_match(m, cond, pc.path, t_e, icfg, false);
      worst_res = std::max(worst_res, std::abs(c.mi_gaussian - c.mi_input));
      rec.check(c.mi_equal, tag + " general: I_G " + fmt(c.mi_gaussian) + " vs I " + fmt(c.mi_input));
      rec.check(c.loewner_ok, tag + " general: Sigma* not below Sigma_x (gap " + fmt(c.loewner_gap) + ")");
      rec.check(c.beyond_ok, tag + " general: Q negative beyond t_e (" + fmt(c.q_min) + ")");
      // r(ν) strictly decreasing on a fine grid whenever C ≠ 0.
      if (m.c_matrix.dim() > 0 && m.c_matrix.max_eigenvalue() > 0.0) {
        const auto nz = detail::normalization(pc.path, t_e);
        const MatrixXd gk = nz.gains.asDiagonal();
        const SymMatrix sig(gk * detail::block(overall_covariance(cond).matrix(), nz.kept, nz.kept) * gk);
        const SymMatrix base_inv = inverse_pd(sig + SymMatrix::identity(sig.dim()));
        double prev = r_of_nu(base_inv, m.c_matrix, 0.0);
        for (int k = 1; k <= 200; ++k) {
          const double r = r_of_nu(base_inv, m.c_matrix, k / 200.0);
          if (!(r < prev)) {
            rec.fail(tag + ": r(nu) not strictly decreasing at nu=" + fmt(k / 200.0));
            break;
          }
          prev = r;
        }
      }
    } catch (const NumericalError& e) {
      rec.fail(tag + " general: " + e.what());
    }
    try {
      const auto m = match_independent(cond, pc.path, t_e, icfg.with_stream(0x1d), opt);
      rec.digest().add(m.sigma_star);
      rec.digest().add(m.eta);
      const auto c = verify_match(m, cond, pc.path, t_e, icfg.with_stream(0x1d), true);
      rec.check(c.loewner_ok, tag + " independent: Lambda not below diag(Sigma_x)");
      rec.check(c.beyond_ok, tag + " independent: d negative beyond t_e (" + fmt(c.q_min) + ")");
      rec.check(m.residual <= 1e-3 + 3.0 * m.alpha_err + m.tolerance, tag + " independent: residual " + fmt(m.residual));
    } catch (const NumericalError& e) {
      rec.fail(tag + " independent: " + e.what());
    }
  }
  return rec.finish(2 * count_n, "max |I_G - I| (general) = " + fmt(worst_res));
}

// ---- 10. broadcast channel ----

inline std::vector<DiagonalChannel> degraded_users(CounterRng& rng, int m, Eigen::Index n) {
  std::vector<DiagonalChannel> u;
  VectorXd g = uniform_vector(rng, n, 0.2, 0.8);
  for (int j = 0; j < m; ++j) {
    u.push_back(DiagonalChannel(g));
    g += uniform_vector(rng, n, 0.1, 0.8);
  }
  return u;
}

inline std::vector<SymMatrix> random_splits(const SymMatrix& s, int m, CounterRng& rng) {
  // Σg_j = S^½·P_j·S^½ with P_j a random partition of the identity.
  const Eigen::Index n = s.dim();
  const MatrixXd root = psd_sqrt(s);
  MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  const MatrixXd v = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
  std::vector<VectorXd> w(static_cast<std::size_t>(m), VectorXd::Zero(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double tot = 0.0;
    std::vector<double> p(static_cast<std::size_t>(m));
    for (auto& x : p) tot += (x = rng.uniform() + 0.05);
    for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)](i) = p[static_cast<std::size_t>(j)] / tot;
  }
  std::vector<SymMatrix> out;
  for (int j = 0; j < m; ++j) out.push_back(SymMatrix(root * v * w[static_cast<std::size_t>(j)].asDiagonal() * v.transpose() * root));
  return out;
}

inline SuiteResult bc_suite(const SuiteOptions& o) {
  Recorder rec(10, "Broadcast channel regions");
  auto cfg = mc_config(o, 10, 40000);
  cfg.method = Method::monte_carlo;
  int checks = 0;

  // 50 two-user instances, then 10 three-user ones.
  const int sp2 = count(50, o), sp = sp2 + count(10, o);
  for (int i = 0; i < sp; ++i) {
    auto rng = instance_rng(o, 10, i);
    const int n = 1 + i % 3, m = i < sp2 ? 2 : 3;
    const SymMatrix s = seeded_psd(n, instance_seed(o, 10, i), 2.0, 0.2);
    const auto inst = BcInstance::covariance(degraded_users(rng, m, n), s);
    const auto splits = random_splits(s, m, rng);
    const auto cf = region_covariance(inst, splits);
    const auto ach = achievable_point(superposition_input(splits), inst, cfg.with_stream(static_cast<std::uint64_t>(i)));
    rec.digest().add(ach.rates);
    rec.digest().add(ach.errors);
    for (Eigen::Index j = 0; j < m; ++j) {
      ++checks;
      const double d = std::abs(ach.rates(j) - cf.rates(j));
      rec.check(d <= 3.0 * ach.errors(j) + 1e-12, "superposition instance " + std::to_string(i) + " user " + std::to_string(j + 1) + ": " + fmt(ach.rates(j)) + " vs " +
                                                    fmt(cf.rates(j)));
    }
  }

  const int chains = count(50, o);
  auto dcfg = cfg.with_samples(20000);
  dcfg.method = Method::automatic;
  int contained = 0;
  for (int i = 0; i < chains; ++i) {
    auto rng = instance_rng(o, 11, i);
    const int n = 1 + i % 2;
    const std::uint64_t s = instance_seed(o, 11, i);
    const ConditionalInput cond = random_conditional(n, 2 + i % 2, 2 + i % 3, s, rng, true);
    const auto chain = two_user_chain(cond);
    const auto users = degraded_users(rng, 2, n);
    const SymMatrix sx = overall_covariance(cond);
    const auto pa = BcInstance::per_antenna(users, sx.diag() * (1.0 + 0.3 * rng.uniform()));
    const auto cv = BcInstance::covariance(users, sx + seeded_psd(n, derive_key(s, 0x5), 0.3));
    const auto pt = achievable_point(chain, pa, dcfg.with_stream(static_cast<std::uint64_t>(i)));
    check_constraint(chain, cv);
    rec.digest().add(pt.rates);
    rec.digest().add(pt.errors);
    for (const auto* inst : {&pa, &cv}) {
      ++checks;
      const auto c = containment(pt, *inst, {}, s);
      rec.digest().add(c.worst_z);
      if (c.contained) ++contained;
      rec.check(c.contained, "chain " + std::to_string(i) + " (" + to_string(inst->constraint) + "): not inside the outer bound (best z " + fmt(c.worst_z) + ")");
    }
  }

  const int exact = count(10, o);
  double tele = 0.0;
  for (int i = 0; i < exact; ++i) {
    auto rng = instance_rng(o, 12, i);
    const int n = 1 + i % 3, m = 2 + i % 3;
    const SymMatrix s = seeded_psd(n, instance_seed(o, 12, i), 2.0, 0.2);
    const auto users = degraded_users(rng, m, n);
    const auto splits = random_splits(s, m, rng);
    const auto inst = BcInstance::covariance(users, s);
    CompoundBcInstance comp;
    for (const auto& u : users) comp.groups.push_back({u});
    comp.cov = s;
    const auto a = region_covariance(inst, splits);
    const auto b = region_compound(comp, splits);
    ++checks;
    rec.check(a.rates == b.rates, "compound instance " + std::to_string(i) + ": K_j = 1 region differs");
    std::vector<DiagonalChannel> same(static_cast<std::size_t>(m), users.back());
    const auto t = region_covariance(BcInstance::covariance(same, s), splits);
    const double sum = t.rates.sum();
    const double ref = 0.5 * logdet_pd(SymMatrix(MatrixXd::Identity(n, n) + users.back().matrix() * s.matrix() * users.back().matrix()));
    tele = std::max(tele, std::abs(sum - ref));
    ++checks;
    rec.check(std::abs(sum - ref) <= 1e-12, "telescoping instance " + std::to_string(i) + ": |sum - logdet| = " + fmt(std::abs(sum - ref)));
    rec.digest().add(a.rates);
    rec.digest().add(sum);
  }
  return rec.finish(sp + chains + exact, std::to_string(checks) + " checks, " + std::to_string(contained) + "/" + std::to_string(2 * chains) +
                                             " chain points contained, telescoping max err " + fmt(tele));
}

// ---- 11. Fisher information ----

inline SuiteResult fisher_suite(const SuiteOptions& o) {
  Recorder rec(11, "Fisher information identities");
  const int count_n = count(15, o);
  auto cfg = mc_config(o, 11, 40000);
  cfg.method = Method::monte_carlo;
  double worst = 0.0, worst_alg = 0.0;
  for (int i = 0; i < count_n; ++i) {
    auto rng = instance_rng(o, 11, i);
    const int n = 1 + i % 3;
    const std::uint64_t s = instance_seed(o, 111, i);
    const MixtureInput x = i % 3 == 2 ? seeded_constellation(n, 3, s) : seeded_random_mixture(n, 2 + i % 3, s);
    const auto pc = path_case(rng, n, i % 2 == 0, 2);
    const double t = 0.5 + rng.uniform();
    const GaussianInput g(seeded_psd(n, derive_key(s, 0x67), 1.0, 0.1));
    const auto f = fisher(x, g, pc.path, t, cfg.with_stream(2 * static_cast<std::uint64_t>(i)));
    const MatrixXd h = pc.path.h(t);
    const auto js = fisher_score_estimate(x, h, cfg.with_stream(2 * static_cast<std::uint64_t>(i) + 1));
    rec.digest().add(f.J);
    add(rec.digest(), js);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a; b < n; ++b) {
        const double tol = 4.0 * std::hypot(js.std_err(a, b), f.J_err(a, b)) + 1e-12;
        const double d = std::abs(js.matrix(a, b) - f.J(a, b));
        worst = std::max(worst, d / tol);
        rec.check(d <= tol, "instance " + std::to_string(i) + " J(" + std::to_string(a) + "," + std::to_string(b) + "): score " + fmt(js.matrix(a, b)) + " vs I-HEH " +
                                fmt(f.J(a, b)));
      }
    const SymMatrix jg_direct = inverse_pd(SymMatrix(h * g.covariance.matrix() * h.transpose() + MatrixXd::Identity(n, n)));
    const double alg = std::max(f.identity_residual, (jg_direct - f.J_gaussian).matrix().cwiseAbs().maxCoeff());
    worst_alg = std::max(worst_alg, alg);
    rec.check(alg <= 1e-10, "instance " + std::to_string(i) + ": W = HQH or Gaussian J identity off by " + fmt(alg));
  }
  auto bcfg = cfg.with_samples(200000);
  for (double snr : {0.5, 1.0, 2.0}) {
    const double ref = oracle::bpsk_fisher(snr);
    const auto js = fisher_score_estimate(bpsk(), MatrixXd::Constant(1, 1, std::sqrt(snr)), bcfg.with_stream(stream_for(snr)));
    add(rec.digest(), js);
    const double z = std::abs(js.matrix(0, 0) - ref) / js.std_err(0, 0);
    worst = std::max(worst, z / 3.0);
    rec.check(z <= 3.0, "BPSK snr " + fmt(snr) + ": score J " + fmt(js.matrix(0, 0)) + " vs oracle " + fmt(ref));
  }
  return rec.finish(count_n + 3, "worst |diff|/tol = " + fmt(worst) + ", algebraic identities max err " + fmt(worst_alg));
}

// ---- driver ----

inline std::vector<SuiteResult> run_suites(const SuiteOptions& o, const std::function<void(const SuiteResult&)>& on_done = {}) {
  std::vector<SuiteResult> out;
  auto push = [&](SuiteResult r) {
    if (on_done) on_done(r);
    out.push_back(std::move(r));
  };
  push(gaussian_closed_form(o));
  push(bpsk_oracle(o));
  push(weighted_crossing(o));
  auto mc = matrix_crossing(o);
  push(mc.crossing);
  push(mc.relation);
  push(derivative_bound(o));
  push(mi_agreement(o));
  push(epi_suite(o));
  push(matcher_suite(o));
  push(bc_suite(o));
  push(fisher_suite(o));
  return out;
}

// Determinism: the same suites under another worker count must reproduce
// every digest.
inline SuiteResult determinism(const std::vector<SuiteResult>& first, const SuiteOptions& o, unsigned other_threads) {
  Recorder rec(12, "Determinism across thread counts");
  SuiteOptions b = o;
  b.threads = other_threads;
  const auto second = run_suites(b);
  for (std::size_t k = 0; k < first.size() && k < second.size(); ++k) {
    rec.digest().add(static_cast<double>(second[k].digest));
    rec.check(first[k].digest == second[k].digest, "suite " + std::to_string(first[k].id) + " digest " + hex64(first[k].digest) + " != " + hex64(second[k].digest));
  }
  return rec.finish(static_cast<int>(first.size()), std::to_string(first.size()) + " suites re-run with " + std::to_string(other_threads) + " threads");
}

inline json to_json(const SuiteResult& r) {
  return {{"id", r.id},         {"name", r.name},           {"pass", r.pass},   {"violation", r.violation}, {"instances", r.instances},
          {"failed", r.failed}, {"summary", r.summary},     {"failures", r.failures}, {"digest", hex64(r.digest)}};
}

}  // namespace suites
}  // namespace crosspoint
