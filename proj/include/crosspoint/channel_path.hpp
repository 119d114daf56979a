#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "matrix_kernel.hpp"

namespace crosspoint {

struct DiagonalChannel {
  VectorXd gains;

  DiagonalChannel() = default;
  explicit DiagonalChannel(VectorXd g) : gains(std::move(g)) {
    require(gains.size() >= 1, "DiagonalChannel: empty gain vector");
    for (Eigen::Index i = 0; i < gains.size(); ++i)
      require(gains(i) >= 0.0 && std::isfinite(gains(i)), "DiagonalChannel: gains must be finite and nonnegative");
  }
  static DiagonalChannel scaled_identity(Eigen::Index n, double g) {
    return DiagonalChannel(VectorXd::Constant(n, g));
  }

  Eigen::Index dim() const { return gains.size(); }
  MatrixXd matrix() const { return MatrixXd(gains.asDiagonal()); }
  SymMatrix sym() const { return SymMatrix::diagonal(gains); }
};

// Strictly increasing list of scan parameters.
struct GainScanGrid {
  std::vector<double> t_values;
  bool includes_anchors = false;

  GainScanGrid() = default;
  explicit GainScanGrid(std::vector<double> t, bool anchors = false) : t_values(std::move(t)), includes_anchors(anchors) {
    require(!t_values.empty(), "GainScanGrid: empty grid");
    for (std::size_t i = 0; i < t_values.size(); ++i) {
      require(t_values[i] >= 0.0 && std::isfinite(t_values[i]), "GainScanGrid: values must be finite and nonnegative");
      if (i > 0) require(t_values[i] > t_values[i - 1], "GainScanGrid: values must be strictly increasing");
    }
  }

  std::size_t size() const { return t_values.size(); }
  double operator[](std::size_t i) const { return t_values[i]; }

  static GainScanGrid linspace(double a, double b, std::size_t n) {
    require(n >= 2 && b > a, "GainScanGrid::linspace: need n >= 2 and b > a");
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    t.back() = b;
    return GainScanGrid(std::move(t));
  }

  // 0 followed by n − 1 log-spaced points on [lo, hi].
  static GainScanGrid zero_then_geometric(double lo, double hi, std::size_t n) {
    require(n >= 2 && lo > 0.0 && hi > lo, "GainScanGrid::zero_then_geometric: bad arguments");
    std::vector<double> t{0.0};
    const std::size_t m = n - 1;
    for (std::size_t i = 0; i < m; ++i) {
      double f = m == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(m - 1);
      t.push_back(lo * std::pow(hi / lo, f));
    }
    t.back() = hi;
    return GainScanGrid(std::move(t));
  }
};

// Monotone diagonal path t ↦ H(t) with H(0) = 0. Two kinds exist: piecewise
// linear through anchors (then linear growth past the last anchor), and the
// scalar-snr path g_i(t) = √t.
class ChannelPath {
 public:
  enum class Kind { piecewise_linear, sqrt_snr };

  struct Anchor {
    double t;
    DiagonalChannel channel;
  };

  static ChannelPath piecewise(std::vector<Anchor> anchors) {
    require(!anchors.empty(), "make_path: at least one anchor required");
    const Eigen::Index n = anchors.front().channel.dim();
    double prev_t = 0.0;
    VectorXd prev_g = VectorXd::Zero(n);
    for (const auto& a : anchors) {
      require(a.channel.dim() == n, "make_path: anchor dimension mismatch");
      require(a.t > prev_t, "make_path: anchor times must be positive and strictly increasing");
      for (Eigen::Index i = 0; i < n; ++i)
        if (a.channel.gains(i) < prev_g(i)) throw InvalidArgument("make_path: anchors do not form a Loewner chain");
      prev_t = a.t;
      prev_g = a.channel.gains;
    }
    ChannelPath p;
    p.kind_ = Kind::piecewise_linear;
    p.dim_ = n;
    p.anchors_ = std::move(anchors);
    const Anchor& last = p.anchors_.back();
    p.tail_slope_ = VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double g = last.channel.gains(i);
      p.tail_slope_(i) = g > 0.0 ? g / last.t : 1.0;
    }
    return p;
  }

  static ChannelPath sqrt_snr(Eigen::Index n, double snr_max) {
    require(n >= 1, "snr_path: dimension must be positive");
    require(snr_max > 0.0, "snr_path: snr_max must be positive");
    ChannelPath p;
    p.kind_ = Kind::sqrt_snr;
    p.dim_ = n;
    p.snr_max_ = snr_max;
    return p;
  }

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  double snr_max() const { return snr_max_; }
  double plateau_from() const { return kind_ == Kind::piecewise_linear ? anchors_.back().t : 0.0; }

  // Times where g' may jump; integrals are split there.
  std::vector<double> kinks() const {
    std::vector<double> k;
    for (const auto& a : anchors_) k.push_back(a.t);
    return k;
  }

  VectorXd gains(double t) const {
    require(t >= 0.0, "ChannelPath: t must be nonnegative");
    if (kind_ == Kind::sqrt_snr) return VectorXd::Constant(dim_, std::sqrt(t));
    double t0 = 0.0;
    VectorXd g0 = VectorXd::Zero(dim_);
    for (const auto& a : anchors_) {
      if (t == a.t) return a.channel.gains;
      if (t < a.t) {
        double lam = (t - t0) / (a.t - t0);
        return (1.0 - lam) * g0 + lam * a.channel.gains;
      }
      t0 = a.t;
      g0 = a.channel.gains;
    }
    return g0 + (t - t0) * tail_slope_;
  }

  // Right derivative of the gains.
  VectorXd slopes(double t) const {
    require(t >= 0.0, "ChannelPath: t must be nonnegative");
    if (kind_ == Kind::sqrt_snr) {
      return VectorXd::Constant(dim_, t > 0.0 ? 0.5 / std::sqrt(t) : std::numeric_limits<double>::infinity());
    }
    double t0 = 0.0;
    VectorXd g0 = VectorXd::Zero(dim_);
    for (const auto& a : anchors_) {
      if (t < a.t) return (a.channel.gains - g0) / (a.t - t0);
      t0 = a.t;
      g0 = a.channel.gains;
    }
    return tail_slope_;
  }

  DiagonalChannel at(double t) const { return DiagonalChannel(gains(t)); }
  MatrixXd h(double t) const { return MatrixXd(gains(t).asDiagonal()); }

  // Diagonal of B(t) = H(t)·(D_t H(t))ᵀ.
  VectorXd b_diagonal(double t) const {
    if (kind_ == Kind::sqrt_snr) {
      require(t >= 0.0, "ChannelPath: t must be nonnegative");
      return VectorXd::Constant(dim_, 0.5);
    }
    return gains(t).cwiseProduct(slopes(t));
  }

 private:
  Kind kind_ = Kind::piecewise_linear;
  Eigen::Index dim_ = 1;
  std::vector<Anchor> anchors_;
  VectorXd tail_slope_;
  double snr_max_ = 0.0;
};

// Anchors at default times 1, 2, …, M.
inline ChannelPath make_path(const std::vector<DiagonalChannel>& anchors) {
  std::vector<ChannelPath::Anchor> a;
  for (std::size_t k = 0; k < anchors.size(); ++k) a.push_back({static_cast<double>(k + 1), anchors[k]});
  return ChannelPath::piecewise(std::move(a));
}

inline ChannelPath make_path(const std::vector<DiagonalChannel>& anchors, const std::vector<double>& times) {
  require(anchors.size() == times.size(), "make_path: anchors and times differ in length");
  std::vector<ChannelPath::Anchor> a;
  for (std::size_t k = 0; k < anchors.size(); ++k) a.push_back({times[k], anchors[k]});
  return ChannelPath::piecewise(std::move(a));
}

inline ChannelPath snr_path(double snr_max, Eigen::Index n = 1) { return ChannelPath::sqrt_snr(n, snr_max); }

// B(t) with the right-derivative convention at kinks. On the snr path the
// product √t·(1/(2√t)) is ½ for every t, and its limit ½ is used at t = 0.
inline SymMatrix b_matrix(const ChannelPath& path, double t) { return SymMatrix::diagonal(path.b_diagonal(t)); }

}  // namespace crosspoint
