#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "crossing_analysis.hpp"
#include "mmse_engine.hpp"
#include "quadrature.hpp"

namespace crosspoint {

inline constexpr double kTwoPiE = 2.0 * 3.14159265358979323846 * 2.718281828459045;

enum class MiMethod { closed_form, direct_mc, direct_quadrature, immse_integral, difference };

inline std::string to_string(MiMethod m) {
  switch (m) {
    case MiMethod::closed_form: return "closed_form";
    case MiMethod::direct_mc: return "direct_mc";
    case MiMethod::direct_quadrature: return "direct_quadrature";
    case MiMethod::immse_integral: return "immse_integral";
    case MiMethod::difference: return "difference";
  }
  return "unknown";
}

// Mutual information in nats.
struct MiEstimate {
  double value = 0.0;
  double std_err = 0.0;
  MiMethod method = MiMethod::closed_form;
  double quadrature_err = 0.0;  // I-MMSE integral only
  double mc_err = 0.0;          // I-MMSE integral only
  std::size_t nodes = 0;        // I-MMSE integral only
};

inline MiEstimate mi_gaussian(const SymMatrix& cov, const MatrixXd& h) {
  require(h.cols() == cov.dim(), "mi_gaussian: dimension mismatch");
  const MatrixXd m = MatrixXd::Identity(h.rows(), h.rows()) + h * cov.matrix() * h.transpose();
  return {0.5 * logdet_pd(SymMatrix(m)), 0.0, MiMethod::closed_form};
}

namespace detail {

// I(X;Y) for Y = HX + N by the tensor Gauss–Hermite rule over each
// component's output law: h(Y) − (n/2)·log(2πe).
inline MiEstimate mi_direct_quadrature(const MixtureInput& x, const MatrixXd& h, int order) {
  const Eigen::Index n = x.dim();
  if (n > 3) throw InvalidArgument("mi_direct: quadrature is only available for dim <= 3");
  const auto rule = gauss_hermite(order);
  const std::size_t q = rule.nodes.size();
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= q;
  const MixtureDensity dens = output_density(x, h);
  auto s = dens.scratch();
  VectorXd z(n), y(n);
  double hy = 0.0;
  for (const auto& c : x.components()) {
    MatrixXd sy = h * c.cov.matrix() * h.transpose() + MatrixXd::Identity(n, n);
    Eigen::LLT<MatrixXd> llt(0.5 * (sy + sy.transpose()));
    const MatrixXd l = llt.matrixL();
    const VectorXd ym = h * c.mean;
    double part = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      double w = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t a = rem % q;
        rem /= q;
        z(i) = rule.nodes[a];
        w *= rule.weights[a];
      }
      y = ym;
      y.noalias() += l * z;
      part -= w * dens.log_density(y, s);
    }
    hy += c.weight * part;
  }
  return {hy - 0.5 * static_cast<double>(n) * std::log(kTwoPiE), 0.0, MiMethod::direct_quadrature};
}

}  // namespace detail

// I(X;Y) = h(Y) − h(N) with h(Y) from the exact mixture density of Y. The
// log-density of the sampled noise is subtracted sample by sample, which is
// h(N) in expectation and removes most of the variance.
inline MiEstimate mi_direct(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  require(h.rows() == x.dim() && h.cols() == x.dim(), "mi_direct: dimension mismatch");
  if (cfg.method == Method::quadrature) return detail::mi_direct_quadrature(x, h, cfg.quad_order);
  const Eigen::Index n = x.dim();
  const MixtureDensity dens = output_density(x, h);
  const double log_norm = -0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
  auto st = sample_input_noise(
      x, cfg, 1,
      [&] {
        return [&, s = dens.scratch(), y = VectorXd(n)](const VectorXd& xs, const VectorXd& ns, double* out) mutable {
          y.noalias() = h * xs;
          y += ns;
          out[0] = log_norm - 0.5 * ns.squaredNorm() - dens.log_density(y, s);
        };
      },
      false);
  return {st.mean(0), st.std_err(0), MiMethod::direct_mc};
}

inline MiEstimate combine_mi(const std::vector<MiEstimate>& parts, const std::vector<double>& q) {
  MiEstimate out;
  double var = 0.0;
  for (std::size_t u = 0; u < parts.size(); ++u) {
    out.value += q[u] * parts[u].value;
    var += q[u] * q[u] * parts[u].std_err * parts[u].std_err;
  }
  out.std_err = std::sqrt(var);
  out.method = parts.front().method;
  return out;
}

// I(X;Y|U) = Σ_u q_u I(X;Y|U=u).
inline MiEstimate mi_direct(const ConditionalInput& cond, const MatrixXd& h, const EstimatorConfig& cfg) {
  std::vector<MiEstimate> parts;
  std::vector<double> q;
  for (std::size_t u = 0; u < cond.size(); ++u) {
    parts.push_back(mi_direct(cond[u].input, h, branch_config(cfg, cond.size(), u)));
    q.push_back(cond[u].q);
  }
  return combine_mi(parts, q);
}

// Closed form when every branch is a single Gaussian (its mean does not
// matter), direct estimate otherwise.
inline MiEstimate mutual_information(const ConditionalInput& cond, const MatrixXd& h, const EstimatorConfig& cfg) {
  bool gaussian = cfg.method != Method::monte_carlo && cfg.method != Method::quadrature;
  for (const auto& b : cond.branches()) gaussian = gaussian && b.input.is_single_gaussian();
  if (!gaussian) return mi_direct(cond, h, cfg);
  MiEstimate out;
  for (const auto& b : cond.branches()) out.value += b.q * mi_gaussian(b.input[0].cov, h).value;
  return out;
}

inline MiEstimate mutual_information(const MixtureInput& x, const MatrixXd& h, const EstimatorConfig& cfg) {
  return mutual_information(ConditionalInput::degenerate(x), h, cfg);
}

// Differential entropy of a mixture with positive definite components.
inline ScalarEstimate differential_entropy(const MixtureInput& x, const EstimatorConfig& cfg) {
  if (!x.has_pd_components()) throw InvalidArgument("differential_entropy: singular component covariance (entropy is -infinity)");
  if (x.is_single_gaussian()) return {0.5 * logdet_pd(SymMatrix(kTwoPiE * x[0].cov.matrix())), 0.0};
  const MixtureDensity dens(x);
  auto st = sample_input_noise(
      x, cfg, 1, [&] { return [&, s = dens.scratch()](const VectorXd& xs, const VectorXd&, double* out) mutable { out[0] = -dens.log_density(xs, s); }; }, false);
  return {st.mean(0), st.std_err(0)};
}

// ---- I-MMSE path integral ----

struct IntegrationOptions {
  int min_intervals = 8;    // per segment, even
  int max_intervals = 128;  // per segment
  double abs_tol = 1e-4;
};

struct IntegrandValue {
  double value = 0.0;
  double std_err = 0.0;
};

// Composite Simpson over [0, t_end] split at the path kinks, doubling the
// number of intervals until successive estimates differ by less than
// max(abs_tol, 0.5·MC error). f(τ, cfg) evaluates the integrand; every node
// gets its own stream keyed on τ.
template <class F>
MiEstimate integrate_path(const ChannelPath& path, double t_end, F&& f, const EstimatorConfig& cfg, const IntegrationOptions& opt = {}) {
  require(t_end >= 0.0, "integrate_path: t_end must be nonnegative");
  MiEstimate out;
  out.method = MiMethod::immse_integral;
  if (t_end == 0.0) return out;
  std::vector<double> br{0.0};
  for (double k : path.kinks())
    if (k > 0.0 && k < t_end) br.push_back(k);
  br.push_back(t_end);

  std::map<double, IntegrandValue> cache;
  auto ensure = [&](const std::vector<double>& taus) {
    std::vector<double> todo;
    for (double t : taus)
      if (!cache.count(t)) todo.push_back(t);
    std::sort(todo.begin(), todo.end());
    todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
    std::vector<IntegrandValue> vals(todo.size());
    EstimatorConfig inner = cfg;
    inner.threads = todo.size() > 1 ? 1 : cfg.threads;
    parallel_for(todo.size(), cfg.threads, [&](std::size_t i) { vals[i] = f(todo[i], inner.with_stream(stream_for(todo[i]))); });
    for (std::size_t i = 0; i < todo.size(); ++i) cache[todo[i]] = vals[i];
  };
  // B(t) uses right derivatives, so a segment ending at a kink is closed with
  // the left limit (one ulp below the kink).
  const auto kinks = path.kinks();
  auto node = [&](std::size_t seg, int m, int j) {
    const double a = br[seg], b = br[seg + 1];
    if (j < m) return a + (b - a) * static_cast<double>(j) / static_cast<double>(m);
    return std::find(kinks.begin(), kinks.end(), b) != kinks.end() ? std::nextafter(b, a) : b;
  };
  auto simpson = [&](int m, double& mc_var) {
    std::vector<double> taus;
    for (std::size_t s = 0; s + 1 < br.size(); ++s)
      for (int j = 0; j <= m; ++j) taus.push_back(node(s, m, j));
    ensure(taus);
    double total = 0.0;
    mc_var = 0.0;
    std::map<double, double> weight;
    for (std::size_t s = 0; s + 1 < br.size(); ++s) {
      const double hstep = (br[s + 1] - br[s]) / static_cast<double>(m);
      for (int j = 0; j <= m; ++j) {
        const double c = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        weight[node(s, m, j)] += c * hstep / 3.0;
      }
    }
    for (const auto& [t, w] : weight) {
      const auto& v = cache.at(t);
      total += w * v.value;
      mc_var += w * w * v.std_err * v.std_err;
    }
    return total;
  };

  int m = std::max(2, opt.min_intervals + (opt.min_intervals % 2));
  double var_prev = 0.0, var_cur = 0.0;
  double prev = simpson(m, var_prev);
  double cur = prev;
  double diff = 0.0;
  for (;;) {
    if (2 * m > opt.max_intervals) break;
    m *= 2;
    cur = simpson(m, var_cur);
    diff = std::abs(cur - prev);
    if (diff < std::max(opt.abs_tol, 0.5 * std::sqrt(var_cur))) break;
    prev = cur;
    var_prev = var_cur;
  }
  if (var_cur == 0.0 && cur == prev) var_cur = var_prev;
  out.value = cur;
  out.quadrature_err = diff / 15.0;
  out.mc_err = std::sqrt(var_cur);
  out.std_err = out.quadrature_err + out.mc_err;
  out.nodes = cache.size();
  return out;
}

// I(X; Y(t_end)|U) = ∫₀^{t_end} Tr(B(τ)·E_{x|u}(τ)) dτ.
inline MiEstimate mi_immse(const ConditionalInput& cond, const ChannelPath& path, double t_end, const EstimatorConfig& cfg, const IntegrationOptions& opt = {}) {
  require(path.dim() == cond.dim(), "mi_immse: dimension mismatch");
  return integrate_path(
      path, t_end,
      [&](double tau, const EstimatorConfig& c) {
        const MatrixXd b = path.b_diagonal(tau).asDiagonal();
        auto e = conditional_mmse(cond, path.h(tau), c);
        return IntegrandValue{(b * e.matrix.matrix()).trace(), e.functional_std_err(b)};
      },
      cfg, opt);
}

inline MiEstimate mi_immse(const MixtureInput& x, const ChannelPath& path, double t_end, const EstimatorConfig& cfg, const IntegrationOptions& opt = {}) {
  return mi_immse(ConditionalInput::degenerate(x), path, t_end, cfg, opt);
}

// ---- Δ𝗜 ----

enum class DeltaMode { difference, integral };

// Δ𝗜(t) = I_G(Σ_{x_G}, H(t)) − I(X; Y(t)|U), either as a difference of MI
// estimates or as ∫₀^t Tr(B·Q) dτ.
inline MiEstimate delta_i(const ConditionalInput& cond, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg, DeltaMode mode = DeltaMode::difference, const IntegrationOptions& opt = {}) {
  require(cond.dim() == g.dim() && path.dim() == g.dim(), "delta_i: dimension mismatch");
  if (t == 0.0) return {0.0, 0.0, mode == DeltaMode::difference ? MiMethod::difference : MiMethod::immse_integral};
  if (mode == DeltaMode::difference) {
    const MatrixXd h = path.h(t);
    auto mi = mutual_information(cond, h, cfg);
    return {mi_gaussian(g.covariance, h).value - mi.value, mi.std_err, MiMethod::difference};
  }
  return integrate_path(
      path, t,
      [&](double tau, const EstimatorConfig& c) {
        const MatrixXd b = path.b_diagonal(tau).asDiagonal();
        auto q = q_matrix(cond, g, path, tau, c);
        return IntegrandValue{(b * q.value.matrix()).trace(), q.mmse.functional_std_err(b)};
      },
      cfg, opt);
}

inline MiEstimate delta_i(const MixtureInput& x, const GaussianInput& g, const ChannelPath& path, double t, const EstimatorConfig& cfg, DeltaMode mode = DeltaMode::difference, const IntegrationOptions& opt = {}) {
  return delta_i(ConditionalInput::degenerate(x), g, path, t, cfg, mode, opt);
}

// ---- EPI special case ----

struct EpiSpec {
  MixtureInput input;
  SymMatrix noise_cov;
  GainScanGrid snr_grid;
  double alpha = 0.0;  // filled by epi_check
};

struct EpiPoint {
  double snr;
  double delta;
  double err;
  bool ok;
};

struct EpiReport {
  double h_x = 0.0;
  double h_x_err = 0.0;
  double alpha = 0.0;
  double alpha_err = 0.0;
  std::vector<EpiPoint> points;
  bool delta_nonpositive = true;
  double limit_snr = 1e3;
  double limit_delta = 0.0;
  double limit_err = 0.0;
  double h_sum = 0.0;      // h(X + N)
  double h_sum_err = 0.0;
  double epi_lhs = 0.0;    // exp(2h(X+N)/n)
  double epi_rhs = 0.0;    // exp(2h(X)/n) + exp(2h(N)/n)
  double epi_slack = 0.0;  // lhs − rhs
  double epi_err = 0.0;
  bool epi_holds = false;
};

inline EpiReport epi_check(EpiSpec& spec, const EstimatorConfig& cfg, double limit_snr = 1e3) {
  const MixtureInput& x = spec.input;
  const Eigen::Index n = x.dim();
  const double nd = static_cast<double>(n);
  require(spec.noise_cov.dim() == n, "epi_check: dimension mismatch");
  if (!(spec.noise_cov.min_eigenvalue() > 0.0)) throw InvalidArgument("epi_check: noise covariance must be positive definite");
  if (!x.has_pd_components()) throw InvalidArgument("epi_check: singular component covariance (h(X) = -infinity)");

  EpiReport r;
  r.limit_snr = limit_snr;
  const auto hx = differential_entropy(x, cfg.with_stream(0x6878));
  r.h_x = hx.value;
  r.h_x_err = hx.std_err;
  const double logdet_n = logdet_pd(spec.noise_cov);
  r.alpha = std::exp(hx.value / nd) / std::sqrt(kTwoPiE * std::exp(logdet_n / nd));
  r.alpha_err = r.alpha * hx.std_err / nd;
  spec.alpha = r.alpha;

  // Whitened problem: x̃ = V⁻¹x with Σ_N = V·Vᵀ, compared against N(0, α²I).
  Eigen::LLT<MatrixXd> llt(spec.noise_cov.matrix());
  const MatrixXd vinv = MatrixXd(llt.matrixL()).triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
  const MixtureInput xt = linear_transform(x, vinv);
  const double a2 = r.alpha * r.alpha;

  auto delta_at = [&](double snr, EpiPoint& p) {
    const MatrixXd h = std::sqrt(snr) * MatrixXd::Identity(n, n);
    auto mi = mi_direct(xt, h, cfg.with_stream(stream_for(snr)));
    const double ig = 0.5 * nd * std::log1p(snr * a2);
    const double dig = nd * snr * r.alpha / (1.0 + snr * a2) * r.alpha_err;
    p.snr = snr;
    p.delta = ig - mi.value;
    p.err = std::hypot(mi.std_err, dig);
    p.ok = p.delta <= 3.0 * p.err + 1e-12;
  };
  r.points.resize(spec.snr_grid.size());
  for (std::size_t i = 0; i < spec.snr_grid.size(); ++i) delta_at(spec.snr_grid[i], r.points[i]);
  for (const auto& p : r.points) r.delta_nonpositive = r.delta_nonpositive && p.ok;
  EpiPoint lim{};
  delta_at(limit_snr, lim);
  r.limit_delta = lim.delta;
  r.limit_err = lim.err;

  // h(X+N) = I(x̃; x̃ + ñ) + h(N).
  auto mi1 = mi_direct(xt, MatrixXd::Identity(n, n), cfg.with_stream(0x68736d));
  const double hn = 0.5 * nd * std::log(kTwoPiE) + 0.5 * logdet_n;
  r.h_sum = mi1.value + hn;
  r.h_sum_err = mi1.std_err;
  r.epi_lhs = std::exp(2.0 * r.h_sum / nd);
  const double ex = std::exp(2.0 * r.h_x / nd);
  r.epi_rhs = ex + std::exp(2.0 * hn / nd);
  r.epi_slack = r.epi_lhs - r.epi_rhs;
  r.epi_err = std::hypot(r.epi_lhs * 2.0 / nd * r.h_sum_err, ex * 2.0 / nd * r.h_x_err);
  r.epi_holds = r.epi_slack >= -3.0 * r.epi_err - 1e-12;
  return r;
}

}  // namespace crosspoint
