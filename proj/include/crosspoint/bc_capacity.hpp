#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gaussian_matcher.hpp"
#include "immse_integrals.hpp"

namespace crosspoint {

enum class ConstraintKind { per_antenna, covariance };

inline std::string to_string(ConstraintKind k) { return k == ConstraintKind::per_antenna ? "per_antenna" : "covariance"; }

// Degraded parallel Gaussian BC: H₁ ⪯ … ⪯ H_M with standard noise.
struct BcInstance {
  std::vector<DiagonalChannel> users;
  ConstraintKind constraint = ConstraintKind::covariance;
  VectorXd power;   // per-antenna P
  SymMatrix cov;    // covariance S

  static BcInstance per_antenna(std::vector<DiagonalChannel> users, VectorXd p) {
    BcInstance b;
    b.users = std::move(users);
    b.constraint = ConstraintKind::per_antenna;
    b.power = std::move(p);
    b.validate();
    return b;
  }
  static BcInstance covariance(std::vector<DiagonalChannel> users, SymMatrix s) {
    BcInstance b;
    b.users = std::move(users);
    b.constraint = ConstraintKind::covariance;
    b.cov = std::move(s);
    b.validate();
    return b;
  }

  std::size_t size() const { return users.size(); }
  Eigen::Index dim() const { return users.front().dim(); }

  // The constraint as a matrix: diag(P) or S.
  SymMatrix budget() const { return constraint == ConstraintKind::per_antenna ? SymMatrix::diagonal(power) : cov; }

  void validate() const {
    require(!users.empty(), "BcInstance: at least one user required");
    const Eigen::Index n = users.front().dim();
    for (std::size_t j = 0; j < users.size(); ++j) {
      require(users[j].dim() == n, "BcInstance: user dimension mismatch");
      if (j > 0) require((users[j].gains - users[j - 1].gains).minCoeff() >= 0.0, "BcInstance: users must satisfy H_1 <= ... <= H_M");
    }
    if (constraint == ConstraintKind::per_antenna) {
      require(power.size() == n && power.minCoeff() >= 0.0, "BcInstance: per-antenna powers must be nonnegative");
    } else {
      require(cov.dim() == n && cov.min_eigenvalue() > 0.0, "BcInstance: covariance constraint must be positive definite");
    }
  }
};

struct CompoundBcInstance {
  std::vector<std::vector<DiagonalChannel>> groups;  // realizations per user
  SymMatrix cov;

  std::size_t size() const { return groups.size(); }
  Eigen::Index dim() const { return groups.front().front().dim(); }

  void validate() const {
    require(!groups.empty(), "CompoundBcInstance: at least one user required");
    const Eigen::Index n = groups.front().front().dim();
    require(cov.dim() == n && cov.min_eigenvalue() > 0.0, "CompoundBcInstance: covariance constraint must be positive definite");
    for (const auto& g : groups) {
      require(!g.empty(), "CompoundBcInstance: every user needs a realization");
      for (const auto& h : g) require(h.dim() == n && h.gains.minCoeff() > 0.0, "CompoundBcInstance: realizations must be diagonal positive definite");
    }
  }

  // H*_{(j+1)j}: midpoint of the largest layer-j and the smallest
  // layer-(j+1) diagonal entries.
  std::vector<DiagonalChannel> bridges() const {
    validate();
    std::vector<DiagonalChannel> out;
    const Eigen::Index n = dim();
    for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
      VectorXd lo = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
      VectorXd hi = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
      for (const auto& h : groups[j]) lo = lo.cwiseMax(h.gains);
      for (const auto& h : groups[j + 1]) hi = hi.cwiseMin(h.gains);
      if ((hi - lo).minCoeff() < 0.0)
        throw InvalidArgument("CompoundBcInstance: realizations of user " + std::to_string(j + 1) + " are not dominated by those of user " + std::to_string(j + 2) +
                              " (not a degraded compound instance)");
      out.push_back(DiagonalChannel(0.5 * (lo + hi)));
    }
    return out;
  }
};

struct RatePoint {
  VectorXd rates;
  VectorXd errors;              // zero for closed-form points
  std::vector<SymMatrix> splits;  // Σg_1 … Σg_M
};

namespace detail {

inline double half_logdet(const DiagonalChannel& h, const SymMatrix& k) { return mi_gaussian(k, h.matrix()).value; }

// Cumulative K_j = Σ_{l≥j} Σg_l, j = 1..M+1 (K_{M+1} = 0).
inline std::vector<SymMatrix> cumulative(const std::vector<SymMatrix>& splits) {
  const Eigen::Index n = splits.front().dim();
  std::vector<SymMatrix> k(splits.size() + 1, SymMatrix::zero(n));
  for (std::size_t j = splits.size(); j-- > 0;) k[j] = k[j + 1] + splits[j];
  return k;
}

inline VectorXd rates_for(const std::vector<DiagonalChannel>& users, const std::vector<SymMatrix>& k) {
  const std::size_t m = users.size();
  VectorXd r(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) r(static_cast<Eigen::Index>(j)) = half_logdet(users[j], k[j]) - half_logdet(users[j], k[j + 1]);
  return r;
}

}  // namespace detail

// Per-antenna region point from the diagonal chain P ⪰ Λ₁ ⪰ … ⪰ Λ_{M−1} ⪰ 0.
inline RatePoint region_per_antenna(const BcInstance& inst, const std::vector<VectorXd>& lambdas) {
  require(inst.constraint == ConstraintKind::per_antenna, "region_per_antenna: instance has no per-antenna constraint");
  const std::size_t m = inst.size();
  require(lambdas.size() + 1 == m, "region_per_antenna: need M-1 diagonal splits");
  std::vector<VectorXd> chain{inst.power};
  for (const auto& l : lambdas) {
    require(l.size() == inst.dim(), "region_per_antenna: split dimension mismatch");
    chain.push_back(l);
  }
  chain.push_back(VectorXd::Zero(inst.dim()));
  const double tol = 1e-12 * (1.0 + inst.power.sum());
  for (std::size_t j = 0; j + 1 < chain.size(); ++j)
    if ((chain[j] - chain[j + 1]).minCoeff() < -tol) throw InvalidArgument("region_per_antenna: splits violate P >= Lambda_1 >= ... >= 0");
  RatePoint rp;
  std::vector<SymMatrix> k;
  for (const auto& c : chain) k.push_back(SymMatrix::diagonal(c.cwiseMax(0.0)));
  for (std::size_t j = 0; j < m; ++j) rp.splits.push_back(k[j] - k[j + 1]);
  rp.rates = detail::rates_for(inst.users, k);
  rp.errors = VectorXd::Zero(static_cast<Eigen::Index>(m));
  return rp;
}

inline void check_covariance_splits(const std::vector<SymMatrix>& splits, const SymMatrix& s, std::size_t m) {
  require(splits.size() == m, "region_covariance: need one split per user");
  SymMatrix total = SymMatrix::zero(s.dim());
  for (const auto& g : splits) {
    require(g.dim() == s.dim(), "region_covariance: split dimension mismatch");
    if (!g.is_psd()) throw InvalidArgument("region_covariance: splits must be PSD");
    total = total + g;
  }
  if (!loewner_leq(total, s, 1e-10 * (1.0 + s.trace()))) throw InvalidArgument("region_covariance: splits exceed the covariance constraint");
}

inline RatePoint region_covariance(const BcInstance& inst, const std::vector<SymMatrix>& splits) {
  require(inst.constraint == ConstraintKind::covariance, "region_covariance: instance has no covariance constraint");
  check_covariance_splits(splits, inst.cov, inst.size());
  RatePoint rp;
  rp.splits = splits;
  rp.rates = detail::rates_for(inst.users, detail::cumulative(splits));
  rp.errors = VectorXd::Zero(rp.rates.size());
  return rp;
}

// Worst realization per user.
inline RatePoint region_compound(const CompoundBcInstance& inst, const std::vector<SymMatrix>& splits) {
  inst.bridges();
  check_covariance_splits(splits, inst.cov, inst.size());
  const auto k = detail::cumulative(splits);
  RatePoint rp;
  rp.splits = splits;
  rp.rates.resize(static_cast<Eigen::Index>(inst.size()));
  for (std::size_t j = 0; j < inst.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : inst.groups[j]) best = std::min(best, detail::half_logdet(h, k[j]) - detail::half_logdet(h, k[j + 1]));
    rp.rates(static_cast<Eigen::Index>(j)) = best;
  }
  rp.errors = VectorXd::Zero(rp.rates.size());
  return rp;
}

// Layered input V₁ ⊂ … ⊂ V_{M−1} ⊂ X. levels[j] is the law of X given V_j
// (levels[0]: X itself).
struct SuperpositionChain {
  std::vector<ConditionalInput> levels;

  std::size_t users() const { return levels.size(); }
  Eigen::Index dim() const { return levels.front().dim(); }
};

// V_j = V_{j−1} + U_j with U_j ~ N(0, Σg_j), X = V_M. Conditional mutual
// information given V_j = v does not depend on v, so X | V_j is represented
// by the single law N(0, Σ_{l>j} Σg_l).
inline SuperpositionChain superposition_input(const std::vector<SymMatrix>& splits) {
  require(!splits.empty(), "superposition_input: at least one split required");
  for (const auto& g : splits)
    if (!g.is_psd()) throw InvalidArgument("superposition_input: splits must be PSD");
  const auto k = detail::cumulative(splits);
  SuperpositionChain ch;
  for (std::size_t j = 0; j < splits.size(); ++j) ch.levels.push_back(ConditionalInput::degenerate(MixtureInput::gaussian(psd_projection(k[j]))));
  return ch;
}

// Two-user chain from a conditional family X | U.
inline SuperpositionChain two_user_chain(const ConditionalInput& x_given_u) {
  SuperpositionChain ch;
  ch.levels.push_back(ConditionalInput::degenerate(marginalize(x_given_u)));
  ch.levels.push_back(x_given_u);
  return ch;
}

inline void check_constraint(const SuperpositionChain& chain, const BcInstance& inst) {
  const SymMatrix sx = overall_covariance(chain.levels.front());
  const double tol = 1e-9 * (1.0 + inst.budget().trace());
  if (inst.constraint == ConstraintKind::per_antenna) {
    if ((inst.power - sx.diag()).minCoeff() < -tol) throw InvalidArgument("achievable_point: input violates the per-antenna constraint");
  } else if (!loewner_leq(sx, inst.cov, tol)) {
    throw InvalidArgument("achievable_point: input violates the covariance constraint");
  }
}

// R_j = I(X;Y_j|V_{j−1}) − I(X;Y_j|V_j) with V₀ empty and V_M = X.
inline RatePoint achievable_point(const SuperpositionChain& chain, const BcInstance& inst, const EstimatorConfig& cfg) {
  require(chain.users() == inst.size(), "achievable_point: chain length must equal the number of users");
  check_constraint(chain, inst);
  const std::size_t m = inst.size();
  RatePoint rp;
  rp.rates.resize(static_cast<Eigen::Index>(m));
  rp.errors.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const MatrixXd h = inst.users[j].matrix();
    const auto a = mutual_information(chain.levels[j], h, cfg.with_stream(0x6263ULL + 2 * j));
    MiEstimate b;
    if (j + 1 < m) b = mutual_information(chain.levels[j + 1], h, cfg.with_stream(0x6263ULL + 2 * j + 1));
    rp.rates(static_cast<Eigen::Index>(j)) = a.value - b.value;
    rp.errors(static_cast<Eigen::Index>(j)) = std::hypot(a.std_err, b.std_err);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const SymMatrix hi = overall_covariance(chain.levels[j]);
    const SymMatrix lo = j + 1 < m ? overall_covariance(chain.levels[j + 1]) : SymMatrix::zero(inst.dim());
    rp.splits.push_back(hi - lo);
  }
  return rp;
}

// ---- outer-bound containment ----

struct Containment {
  bool contained = false;
  RatePoint bound;        // the region point that dominates
  double worst_z = 0.0;   // min_j (bound_j − point_j)/err_j at the dominating split
  int splits_tried = 0;
};

namespace detail {

inline RatePoint boundary_point(const BcInstance& inst, const std::vector<double>& w, const MatrixXd& v) {
  const std::size_t m = inst.size();
  if (inst.constraint == ConstraintKind::per_antenna) {
    std::vector<VectorXd> lam;
    for (std::size_t j = 1; j < m; ++j) lam.push_back(inst.power * w[j - 1]);
    (void)v;
    return region_per_antenna(inst, lam);
  }
  const MatrixXd sh = psd_sqrt(inst.cov);
  std::vector<SymMatrix> k{inst.cov};
  for (std::size_t j = 1; j < m; ++j) {
    VectorXd d = VectorXd::Constant(inst.dim(), w[j - 1]);
    k.push_back(SymMatrix(sh * v * d.asDiagonal() * v.transpose() * sh));
  }
  k.push_back(SymMatrix::zero(inst.dim()));
  std::vector<SymMatrix> splits;
  for (std::size_t j = 0; j < m; ++j) splits.push_back(psd_projection(k[j] - k[j + 1]));
  return region_covariance(inst, splits);
}

inline bool dominates(const RatePoint& bound, const RatePoint& pt, double& z) {
  z = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (Eigen::Index j = 0; j < pt.rates.size(); ++j) {
    const double err = std::max(pt.errors(j), 1e-12);
    const double gap = bound.rates(j) - pt.rates(j);
    z = std::min(z, gap / err);
    if (gap < -4.0 * pt.errors(j) - 1e-10) ok = false;
  }
  return ok;
}

}  // namespace detail

// Searches for a region point dominating `pt` coordinatewise up to 4σ: the
// supplied witness splits first, then nested random splits.
inline Containment containment(const RatePoint& pt, const BcInstance& inst, const std::vector<RatePoint>& witnesses, std::uint64_t seed, int tries = 4000) {
  Containment c;
  c.worst_z = -std::numeric_limits<double>::infinity();
  auto consider = [&](const RatePoint& b) {
    ++c.splits_tried;
    double z;
    const bool ok = detail::dominates(b, pt, z);
    if (ok && (!c.contained || z > c.worst_z)) {
      c.contained = true;
      c.bound = b;
      c.worst_z = z;
    } else if (!c.contained && z > c.worst_z) {
      c.bound = b;
      c.worst_z = z;
    }
    return ok;
  };
  for (const auto& w : witnesses)
    if (consider(w)) return c;
  const std::size_t m = inst.size();
  const Eigen::Index n = inst.dim();
  for (int t = 0; t < tries; ++t) {
    CounterRng rng(derive_key(seed, 0x636f6e74ULL), static_cast<std::uint64_t>(t));
    std::vector<double> w(m > 1 ? m - 1 : 0);
    for (auto& x : w) x = rng.uniform();
    std::sort(w.begin(), w.end(), std::greater<double>());
    MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<MatrixXd> qr(g);
    const MatrixXd v = qr.householderQ();
    if (consider(detail::boundary_point(inst, w, v))) return c;
  }
  return c;
}

// ---- converse witness (two users) ----

struct WitnessReport {
  ConstraintKind constraint = ConstraintKind::covariance;
  MatchResult match;
  RatePoint achievable;
  RatePoint bound;          // region point built from the matched covariance
  double mi_t1_input = 0.0; // I(X; Y₁|U)
  double mi_t1_gauss = 0.0; // I_G(Σ*, H₁)
  double mi_t1_err = 0.0;
  bool matched_equal = false;
  double mi_t2_input = 0.0; // I(X; Y₂|U)
  double mi_t2_gauss = 0.0; // I_G(Σ*, H₂)
  double mi_t2_err = 0.0;
  bool dominance = false;   // I(X;Y₂|U) ≤ I_G at t₂ (within 4σ)
  double integrand_min_z = 0.0;  // min over the subgrid of d/(4σ) or Tr(BQ)/(4σ)
  bool integrand_ok = false;
  bool contains = false;    // bound ⪰ achievable coordinatewise (4σ)
  std::vector<std::string> notes;

  bool certified() const { return matched_equal && dominance && integrand_ok && contains; }
};

// Numerical skeleton of the two-user converse: match at t₁ (user 1), check
// the Gaussian dominates at t₂ (user 2) and that the resulting bound contains
// the achievable point of the chain.
inline WitnessReport converse_witness(const SuperpositionChain& chain, const BcInstance& inst, const EstimatorConfig& cfg, int subgrid = 20) {
  require(inst.size() == 2 && chain.users() == 2, "converse_witness: two-user instances only");
  check_constraint(chain, inst);
  WitnessReport rep;
  rep.constraint = inst.constraint;
  const ConditionalInput& xu = chain.levels[1];
  const auto path = make_path(inst.users);
  const double t1 = 1.0, t2 = 2.0;
  const bool per_antenna = inst.constraint == ConstraintKind::per_antenna;

  rep.match = per_antenna ? match_independent(xu, path, t1, cfg) : match_general(xu, path, t1, cfg);
  const SymMatrix& sg = rep.match.sigma_star;

  const auto mi1 = mutual_information(xu, inst.users[0].matrix(), cfg.with_stream(0x773174ULL));
  rep.mi_t1_input = mi1.value;
  rep.mi_t1_gauss = mi_gaussian(sg, inst.users[0].matrix()).value;
  rep.mi_t1_err = std::hypot(mi1.std_err, rep.match.alpha_err);
  rep.matched_equal = std::abs(rep.mi_t1_gauss - rep.mi_t1_input) <= 1e-3 + 3.0 * rep.mi_t1_err;

  const auto mi2 = mutual_information(xu, inst.users[1].matrix(), cfg.with_stream(0x773274ULL));
  rep.mi_t2_input = mi2.value;
  rep.mi_t2_gauss = mi_gaussian(sg, inst.users[1].matrix()).value;
  rep.mi_t2_err = std::hypot(mi2.std_err, rep.match.alpha_err);
  rep.dominance = rep.mi_t2_input <= rep.mi_t2_gauss + 4.0 * rep.mi_t2_err + 1e-9;

  const GaussianInput g(sg);
  rep.integrand_min_z = std::numeric_limits<double>::infinity();
  rep.integrand_ok = true;
  for (int k = 0; k < subgrid; ++k) {
    const double t = t1 + (t2 - t1) * static_cast<double>(k) / std::max(1, subgrid - 1);
    auto q = q_matrix(xu, g, path, t, cfg.with_stream(0x737562ULL));
    const VectorXd b = path.b_diagonal(t);
    double v = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) v += b(i) * q.value(i, i);
    const double err = q.mmse.functional_std_err(MatrixXd(b.asDiagonal()));
    const double band = std::max(4.0 * err, 1e-9);
    rep.integrand_min_z = std::min(rep.integrand_min_z, v / band);
    if (v < -band) rep.integrand_ok = false;
  }

  rep.achievable = achievable_point(chain, inst, cfg);
  if (per_antenna) {
    rep.bound = region_per_antenna(inst, {sg.diag().cwiseMin(inst.power)});
  } else {
    const SymMatrix s2 = sg;
    rep.bound = region_covariance(inst, {psd_projection(inst.cov - s2), s2});
  }
  double z;
  RatePoint loose = rep.achievable;
  // The bound inherits the matched MI's uncertainty on top of the point's.
  for (Eigen::Index j = 0; j < loose.errors.size(); ++j) loose.errors(j) = std::hypot(loose.errors(j), rep.match.alpha_err);
  rep.contains = detail::dominates(rep.bound, loose, z);
  return rep;
}

}  // namespace crosspoint
