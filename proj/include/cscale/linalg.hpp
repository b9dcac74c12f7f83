#pragma once

// Dense complex linear algebra: eigendecomposition, Hermitian eigensolves,
// pivoted solves and numerical-range support points. LAPACK does the heavy
// lifting; this layer owns the contracts (canonical ordering, residuals,
// error kinds).

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "cscale/errors.hpp"

namespace cscale {

using cplx = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

namespace detail {
inline lapack_complex_double* lp(cplx* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}
}  // namespace detail

/// Sort key for eigenvalue multisets: real part, then imaginary part.
inline bool canonical_less(const cplx& a, const cplx& b) noexcept {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

struct EigenResult {
  std::vector<cplx> eigenvalues;
  MatrixXc vectors;              // columns, same order as eigenvalues; empty if not requested
  std::vector<double> residuals; // ||A v - lambda v|| / ||A||_F per pair

  double max_residual() const {
    double r = 0.0;
    for (double x : residuals) r = std::max(r, x);
    return r;
  }
};

struct EigOptions {
  bool vectors = true;
  std::size_t max_dim = 3600;
};

/// Eigenvalues (and optionally right eigenvectors) of a general complex matrix.
inline EigenResult eig_dense(const MatrixXc& A, EigOptions opt = {}) {
  if (A.rows() != A.cols()) throw DimensionMismatchError("eig_dense: matrix not square");
  const auto n = static_cast<lapack_int>(A.rows());
  if (static_cast<std::size_t>(n) > opt.max_dim) {
    throw InvalidSizeError("eig_dense: dimension " + std::to_string(n) +
                           " exceeds cap " + std::to_string(opt.max_dim));
  }
  EigenResult out;
  if (n == 0) return out;
  MatrixXc work = A;
  std::vector<cplx> w(n);
  MatrixXc vr = opt.vectors ? MatrixXc(n, n) : MatrixXc(1, 1);
  cplx dummy;
  const lapack_int info = LAPACKE_zgeev(
      LAPACK_COL_MAJOR, 'N', opt.vectors ? 'V' : 'N', n, detail::lp(work.data()), n,
      detail::lp(w.data()), detail::lp(&dummy), 1, detail::lp(vr.data()),
      opt.vectors ? n : 1);
  if (info > 0) {
    throw ConvergenceError("eig_dense: QR iteration failed to converge at index " +
                               std::to_string(info - 1),
                           static_cast<std::size_t>(info - 1));
  }
  if (info < 0) throw Error("eig_dense: illegal argument " + std::to_string(-info));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return canonical_less(w[a], w[b]); });
  out.eigenvalues.resize(n);
  for (lapack_int k = 0; k < n; ++k) out.eigenvalues[k] = w[order[k]];
  if (opt.vectors) {
    out.vectors.resize(n, n);
    for (lapack_int k = 0; k < n; ++k) out.vectors.col(k) = vr.col(order[k]);
    const double anorm = std::max(A.norm(), 1e-300);
    const MatrixXc AV = A * out.vectors;
    out.residuals.resize(n);
    for (lapack_int k = 0; k < n; ++k) {
      const VectorXc v = out.vectors.col(k);
      out.residuals[k] = (AV.col(k) - out.eigenvalues[k] * v).norm() / (anorm * v.norm());
    }
  }
  return out;
}

/// Eigenvalues only, canonical order.
inline std::vector<cplx> eigenvalues(const MatrixXc& A, std::size_t max_dim = 3600) {
  return eig_dense(A, EigOptions{false, max_dim}).eigenvalues;
}

struct HermitianEigen {
  Eigen::VectorXd values;  // ascending
  MatrixXc vectors;        // empty unless requested
};

/// Eigen-decomposition of the Hermitian matrix A (lower triangle is read).
inline HermitianEigen eig_hermitian(const MatrixXc& A, bool vectors = false) {
  if (A.rows() != A.cols()) throw DimensionMismatchError("eig_hermitian: matrix not square");
  const auto n = static_cast<lapack_int>(A.rows());
  HermitianEigen out;
  MatrixXc work = A;
  out.values.resize(n);
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n,
                                         detail::lp(work.data()), n, out.values.data());
  if (info > 0) {
    throw ConvergenceError("eig_hermitian: failed to converge", static_cast<std::size_t>(info - 1));
  }
  if (info < 0) throw Error("eig_hermitian: illegal argument");
  if (vectors) out.vectors = std::move(work);
  return out;
}

/// Largest eigenvalue and its unit eigenvector of a Hermitian matrix.
inline std::pair<double, VectorXc> hermitian_top(const MatrixXc& A) {
  const auto n = static_cast<lapack_int>(A.rows());
  MatrixXc work = A;
  lapack_int found = 0;
  Eigen::VectorXd w(n);
  VectorXc z(n);
  std::vector<lapack_int> isuppz(2);
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', n, detail::lp(work.data()), n, 0.0, 0.0, n, n, 0.0,
      &found, w.data(), detail::lp(z.data()), n, isuppz.data());
  if (info != 0 || found != 1) {
    throw ConvergenceError("hermitian_top: zheevr failed", static_cast<std::size_t>(std::max<lapack_int>(info, 0)));
  }
  return {w(0), z};
}

/// x with A x = b via LU with partial pivoting.
inline VectorXc solve_linear(const MatrixXc& A, const VectorXc& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw DimensionMismatchError("solve_linear: dimension mismatch");
  }
  const auto n = static_cast<lapack_int>(A.rows());
  MatrixXc lu = A;
  VectorXc x = b;
  std::vector<lapack_int> ipiv(n);
  const lapack_int info = LAPACKE_zgesv(LAPACK_COL_MAJOR, n, 1, detail::lp(lu.data()), n,
                                        ipiv.data(), detail::lp(x.data()), n);
  if (info > 0) {
    throw SingularMatrixError("solve_linear: exactly singular pivot at index " +
                                  std::to_string(info - 1),
                              static_cast<std::size_t>(info - 1));
  }
  if (info < 0) throw Error("solve_linear: illegal argument");
  return x;
}

namespace detail {

inline bool is_tridiagonal(const MatrixXc& A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (std::abs(i - j) > 1 && A(i, j) != cplx(0.0)) return false;
  return true;
}

// Top eigenpair of a Hermitian tridiagonal matrix given by its real diagonal
// and complex subdiagonal. A diagonal unitary makes it real symmetric.
inline std::pair<double, VectorXc> hermitian_top_tridiagonal(std::vector<double> d,
                                                             const std::vector<cplx>& sub) {
  const auto n = static_cast<lapack_int>(d.size());
  VectorXc phase(n);
  std::vector<double> e(std::max<lapack_int>(n, 1));
  phase(0) = 1.0;
  for (lapack_int k = 0; k + 1 < n; ++k) {
    e[k] = std::abs(sub[k]);
    phase(k + 1) = e[k] > 0.0 ? phase(k) * sub[k] / e[k] : phase(k);
  }
  lapack_int found = 0;
  double w = 0.0;
  std::vector<double> z(n);
  std::vector<lapack_int> isuppz(2);
  const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0,
                                         0.0, n, n, 0.0, &found, &w, z.data(), n, isuppz.data());
  if (info != 0 || found != 1) {
    throw ConvergenceError("hermitian_top: dstevr failed", static_cast<std::size_t>(std::max<lapack_int>(info, 0)));
  }
  VectorXc v(n);
  for (lapack_int k = 0; k < n; ++k) v(k) = phase(k) * z[k];
  return {w, v};
}

}  // namespace detail

/// Support points of the numerical range in the directions e^{i phi}: the top
/// eigenvector of the Hermitian part of e^{-i phi} A, mapped through w^* A w.
/// Tridiagonal A (every radial block) takes an O(n) path.
inline std::vector<cplx> numerical_range_support(const MatrixXc& A,
                                                 const std::vector<double>& angles) {
  if (A.rows() != A.cols()) throw DimensionMismatchError("numerical_range_support: not square");
  const Eigen::Index n = A.rows();
  const bool tri = n > 1 && detail::is_tridiagonal(A);
  std::vector<cplx> pts;
  pts.reserve(angles.size());
  for (double phi : angles) {
    const cplx rot = std::polar(1.0, -phi);
    VectorXc w;
    if (tri) {
      std::vector<double> d(n);
      std::vector<cplx> sub(n - 1);
      for (Eigen::Index k = 0; k < n; ++k) d[k] = (rot * A(k, k)).real();
      for (Eigen::Index k = 0; k + 1 < n; ++k) {
        sub[k] = 0.5 * (rot * A(k + 1, k) + std::conj(rot * A(k, k + 1)));
      }
      w = detail::hermitian_top_tridiagonal(std::move(d), sub).second;
    } else {
      const MatrixXc B = rot * A;
      const MatrixXc H = 0.5 * (B + B.adjoint());
      w = hermitian_top(H).second;
    }
    pts.push_back(w.dot(A * w) / w.squaredNorm());
  }
  return pts;
}

/// Support points in m equally spaced directions.
inline std::vector<cplx> numerical_range_boundary(const MatrixXc& A, int m) {
  if (m < 8) throw InvalidSizeError("numerical_range_boundary: need m >= 8");
  if (A.rows() != A.cols()) throw DimensionMismatchError("numerical_range_boundary: not square");
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::vector<double> angles(m);
  for (int k = 0; k < m; ++k) angles[k] = two_pi * k / m;
  return numerical_range_support(A, angles);
}

}  // namespace cscale
