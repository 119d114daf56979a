#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace crosspoint {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Dense real symmetric matrix. Symmetry is enforced on construction by
// averaging with the transpose, so entries(i,j) == entries(j,i) bit-exactly.
class SymMatrix {
 public:
  SymMatrix() : m_(MatrixXd::Zero(1, 1)) {}

  explicit SymMatrix(const MatrixXd& m) {
    require(m.rows() == m.cols(), "SymMatrix: matrix must be square");
    require(m.rows() >= 1, "SymMatrix: dimension must be at least 1");
    m_ = 0.5 * (m + m.transpose());
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m_.cols(); ++j) m_(j, i) = m_(i, j);
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(MatrixXd::Identity(n, n)); }
  static SymMatrix zero(Eigen::Index n) { return SymMatrix(MatrixXd::Zero(n, n)); }
  static SymMatrix diagonal(const VectorXd& d) { return SymMatrix(MatrixXd(d.asDiagonal())); }

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  VectorXd diag() const { return m_.diagonal(); }

  bool is_diagonal(double tol = 0.0) const {
    for (Eigen::Index i = 0; i < dim(); ++i)
      for (Eigen::Index j = 0; j < dim(); ++j)
        if (i != j && std::abs(m_(i, j)) > tol) return false;
    return true;
  }

  // Ascending eigenvalues.
  VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  double min_eigenvalue() const { return eigenvalues()(0); }
  double max_eigenvalue() const { return eigenvalues()(dim() - 1); }

  // Default PSD tolerance: scale-aware 1e-10 * (1 + |trace|).
  double psd_tolerance() const { return 1e-10 * (1.0 + std::abs(trace())); }
  bool is_psd(double tol) const { return min_eigenvalue() >= -tol; }
  bool is_psd() const { return is_psd(psd_tolerance()); }

  SymMatrix operator+(const SymMatrix& o) const { return SymMatrix(m_ + o.m_); }
  SymMatrix operator-(const SymMatrix& o) const { return SymMatrix(m_ - o.m_); }
  SymMatrix operator-() const { return SymMatrix(-m_); }
  SymMatrix operator*(double s) const { return SymMatrix(s * m_); }
  friend SymMatrix operator*(double s, const SymMatrix& a) { return a * s; }

  bool operator==(const SymMatrix& o) const { return m_ == o.m_; }

 private:
  MatrixXd m_;
};

inline void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* what) {
  if (a.dim() != b.dim()) throw InvalidArgument(std::string(what) + ": dimension mismatch");
}

// A ⪯ B  iff  min-eigenvalue(B − A) ≥ −tol.
inline bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
  require_same_dim(a, b, "loewner_leq");
  require(tol >= 0.0, "loewner_leq: tolerance must be nonnegative");
  return (b - a).min_eigenvalue() >= -tol;
}

// Congruence S·A·Sᵀ for a general square S.
inline SymMatrix congruence(const MatrixXd& s, const SymMatrix& a) {
  return SymMatrix(s * a.matrix() * s.transpose());
}

// Symmetric PSD square root; tiny negative eigenvalues are clipped to zero.
inline MatrixXd psd_sqrt(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.matrix());
  VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// Eigen-projection onto the PSD cone.
inline SymMatrix psd_projection(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.matrix());
  VectorXd d = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

inline SymMatrix inverse_pd(const SymMatrix& a) {
  Eigen::LLT<MatrixXd> llt(a.matrix());
  if (llt.info() != Eigen::Success) throw NumericalError("inverse_pd: matrix is not positive definite");
  return SymMatrix(llt.solve(MatrixXd::Identity(a.dim(), a.dim())));
}

inline double logdet_pd(const SymMatrix& a) {
  Eigen::LLT<MatrixXd> llt(a.matrix());
  if (llt.info() != Eigen::Success) throw NumericalError("logdet_pd: matrix is not positive definite");
  const MatrixXd& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

struct SimDiagResult {
  MatrixXd transform;  // S
  VectorXd diagA;      // diag of S·A·Sᵀ
  VectorXd diagB;      // diag of S·B·Sᵀ
};

// Simultaneous diagonalization of two PSD matrices by congruence.
// The common null space is split off with an orthonormal basis; on the reduced
// pair (A', B') we whiten B' by its Cholesky factor when B' is definite and
// otherwise whiten A' + B', which is always definite once the common null
// space has been removed.
inline SimDiagResult simultaneous_diagonalize(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "simultaneous_diagonalize");
  require(a.is_psd(), "simultaneous_diagonalize: A is not PSD");
  require(b.is_psd(), "simultaneous_diagonalize: B is not PSD");
  const Eigen::Index n = a.dim();

  SymMatrix sum = a + b;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sum.matrix());
  const double null_tol = 1e-10 * (1.0 + std::abs(sum.trace()));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (es.eigenvalues()(i) > null_tol) ++r;
  // Eigenvalues are ascending: the first n − r columns span the common null space.
  MatrixXd u0 = es.eigenvectors().leftCols(n - r);
  MatrixXd ur = es.eigenvectors().rightCols(r);

  MatrixXd s(n, n);
  if (r > 0) {
    MatrixXd ar = ur.transpose() * a.matrix() * ur;
    MatrixXd br = ur.transpose() * b.matrix() * ur;
    ar = 0.5 * (ar + ar.transpose());
    br = 0.5 * (br + br.transpose());

    Eigen::LLT<MatrixXd> llt_b(br);
    const bool b_definite = llt_b.info() == Eigen::Success &&
                            SymMatrix(br).min_eigenvalue() > 1e-10 * (1.0 + std::abs(br.trace()));
    MatrixXd w;
    if (b_definite) {
      w = llt_b.matrixL().solve(MatrixXd::Identity(r, r));
    } else {
      Eigen::LLT<MatrixXd> llt_s(ar + br);
      if (llt_s.info() != Eigen::Success)
        throw NumericalError("simultaneous_diagonalize: reduced pair is not definite");
      w = llt_s.matrixL().solve(MatrixXd::Identity(r, r));
    }
    MatrixXd aw = w * ar * w.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es_w(0.5 * (aw + aw.transpose()));
    MatrixXd t = es_w.eigenvectors().transpose() * w;
    s.topRows(r) = t * ur.transpose();
  }
  if (n - r > 0) s.bottomRows(n - r) = u0.transpose();

  SimDiagResult res;
  res.transform = s;
  res.diagA = (s * a.matrix() * s.transpose()).diagonal();
  res.diagB = (s * b.matrix() * s.transpose()).diagonal();
  return res;
}

// μ_max(D1·A·D1 − D2·A·D2) for diagonal D1 ⪰ D2 ⪰ 0 (given as vectors).
inline double max_eig_gap(const SymMatrix& a, const VectorXd& d1, const VectorXd& d2) {
  require(d1.size() == a.dim() && d2.size() == a.dim(), "max_eig_gap: dimension mismatch");
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    if (!(d2(i) >= 0.0)) throw InvalidArgument("max_eig_gap: D2 must be nonnegative");
    if (!(d1(i) >= d2(i))) throw InvalidArgument("max_eig_gap: D1 must dominate D2");
  }
  MatrixXd m1 = d1.asDiagonal() * a.matrix() * d1.asDiagonal();
  MatrixXd m2 = d2.asDiagonal() * a.matrix() * d2.asDiagonal();
  return SymMatrix(m1 - m2).max_eigenvalue();
}

}  // namespace crosspoint
