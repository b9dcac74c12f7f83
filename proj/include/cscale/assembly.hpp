#pragma once

// Finite-difference blocks of the dilated operators. One transverse mode at a
// time: the cylinder end gives a tridiagonal block, the corner a Kronecker sum
// of two such blocks. Matrices are kept sparse and densified on demand.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cscale/dilation.hpp"
#include "cscale/errors.hpp"
#include "cscale/geometry.hpp"
#include "cscale/linalg.hpp"

namespace cscale {

using SparseC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

enum class OperatorKind { Cylinder, Corner, Channel };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Cylinder: return "cyl";
    case OperatorKind::Corner: return "corner";
    case OperatorKind::Channel: return "channel";
  }
  return "?";
}

struct ModeOperator {
  SparseC matrix;
  OperatorKind kind = OperatorKind::Cylinder;
  DilationParameter theta;
  double mu = 0.0;
  std::string label;
  std::vector<HalfLineGrid> grids;  // one per radial variable
  CutoffProfile profile;
  // Corner only: the two radial factors (without mu and V) of the Kronecker sum.
  std::vector<SparseC> factors;

  Eigen::Index dim() const noexcept { return matrix.rows(); }
  MatrixXc dense() const { return MatrixXc(matrix); }
  /// Quadrature weight of one node (h, or h1 h2).
  double cell() const {
    double c = 1.0;
    for (const auto& g : grids) c *= g.h();
    return c;
  }
};

/// Discrete L^2 norm with node weight `cell`.
inline double grid_norm(const VectorXc& f, double cell) { return std::sqrt(cell) * f.norm(); }

/// <f, g> = cell * sum f_j conj(g_j); the second slot is conjugate-linear.
inline cplx grid_inner(const VectorXc& f, const VectorXc& g, double cell) {
  return cell * g.dot(f);
}

namespace detail {

// Triplets of a2 D2 + a1 D1 + a0 + shift(u) on `grid`, with the grid's
// boundary condition at 0 and Dirichlet at u_max.
inline std::vector<Triplet> radial_triplets(const DilationParameter& theta,
                                            const CutoffProfile& profile,
                                            const HalfLineGrid& grid,
                                            const std::function<double(double)>& shift) {
  const int n = grid.n();
  const double h = grid.h();
  const double inv_h2 = 1.0 / (h * h);
  const double inv_2h = 1.0 / (2.0 * h);
  std::vector<Triplet> t;
  t.reserve(3 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = grid.node(i);
    const CoefficientTriple c = dilation_coefficients(profile, theta.theta(), u);
    const cplx lower = c.a2 * inv_h2 - c.a1 * inv_2h;
    const cplx upper = c.a2 * inv_h2 + c.a1 * inv_2h;
    cplx diag = c.a2 * (-2.0 * inv_h2) + (c.a0 + shift(u));
    if (i == 0) {
      // Ghost value at u = 0: zero (Dirichlet) or equal to the first node (Neumann).
      if (grid.bc0() == BoundaryCondition::Neumann) diag += lower;
    } else {
      t.emplace_back(i, i - 1, lower);
    }
    t.emplace_back(i, i, diag);
    if (i + 1 < n) t.emplace_back(i, i + 1, upper);
  }
  return t;
}

inline SparseC from_triplets(Eigen::Index n, const std::vector<Triplet>& t) {
  SparseC m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

/// The 1D dilated block a2 D2 + a1 D1 + a0 + v on one grid (no transverse shift).
inline SparseC radial_block(const DilationParameter& theta, const CutoffProfile& profile,
                            const HalfLineGrid& grid, const PotentialProfile& v) {
  if (grid.u_max() <= profile.R()) {
    throw GridMismatchError("grid u_max must exceed the full-scaling radius R");
  }
  const auto t = detail::radial_triplets(theta, profile, grid, [&](double u) { return v(u); });
  return detail::from_triplets(grid.n(), t);
}

/// One transverse-mode block of the dilated cylinder-end operator.
inline ModeOperator assemble_cyl_mode(const DilationParameter& theta, double mu,
                                      const HalfLineGrid& grid, const PotentialProfile& v,
                                      const CutoffProfile& profile = CutoffProfile()) {
  if (grid.u_max() <= profile.R()) {
    throw GridMismatchError("assemble_cyl_mode: u_max must exceed R");
  }
  if (v.support_end() > profile.K()) {
    throw SupportViolationError("assemble_cyl_mode: potential support exceeds K");
  }
  ModeOperator op;
  op.kind = OperatorKind::Cylinder;
  op.theta = theta;
  op.mu = mu;
  op.grids = {grid};
  op.profile = profile;
  const auto t = detail::radial_triplets(theta, profile, grid,
                                         [&](double u) { return mu + v(u); });
  op.matrix = detail::from_triplets(grid.n(), t);
  return op;
}

/// A1 (x) I + I (x) A2 as sparse triplets; index = i1 * n2 + i2.
inline std::vector<Triplet> kronecker_sum_triplets(const SparseC& A1, const SparseC& A2) {
  const Eigen::Index n1 = A1.rows();
  const Eigen::Index n2 = A2.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(A1.nonZeros() * n2 + A2.nonZeros() * n1));
  for (Eigen::Index r = 0; r < n1; ++r) {
    for (SparseC::InnerIterator it(A1, r); it; ++it) {
      for (Eigen::Index k = 0; k < n2; ++k) {
        t.emplace_back(r * n2 + k, it.col() * n2 + k, it.value());
      }
    }
  }
  for (Eigen::Index k = 0; k < n1; ++k) {
    for (Eigen::Index r = 0; r < n2; ++r) {
      for (SparseC::InnerIterator it(A2, r); it; ++it) {
        t.emplace_back(k * n2 + r, k * n2 + it.col(), it.value());
      }
    }
  }
  return t;
}

// Factored corner operator A1 (x) I + I (x) A2 + diag(V) + mu, applied without
// ever forming the product matrix. Used where grids are far too long to densify.
struct KroneckerOperator {
  SparseC A1;
  SparseC A2;
  double mu = 0.0;
  CornerPotential V;
  std::vector<HalfLineGrid> grids;
  DilationParameter theta;
};

inline KroneckerOperator assemble_corner_factors(const DilationParameter& theta, double mu,
                                                 const CornerModel& model) {
  model.validate();
  KroneckerOperator k;
  k.A1 = radial_block(theta, model.profile, model.grid1, model.end_potential1);
  k.A2 = radial_block(theta, model.profile, model.grid2, model.end_potential2);
  k.mu = mu;
  k.V = model.corner_potential;
  k.grids = {model.grid1, model.grid2};
  k.theta = theta;
  return k;
}

/// One transverse-mode block of the dilated corner operator:
/// A1 (x) I + I (x) A2 + diag(V) + mu I.
inline ModeOperator assemble_corner_mode(const DilationParameter& theta, double mu,
                                         const CornerModel& model) {
  model.validate();
  ModeOperator op;
  op.kind = OperatorKind::Corner;
  op.theta = theta;
  op.mu = mu;
  op.grids = {model.grid1, model.grid2};
  op.profile = model.profile;
  SparseC A1 = radial_block(theta, model.profile, model.grid1, model.end_potential1);
  SparseC A2 = radial_block(theta, model.profile, model.grid2, model.end_potential2);
  auto t = kronecker_sum_triplets(A1, A2);
  const int n1 = model.grid1.n();
  const int n2 = model.grid2.n();
  for (int i1 = 0; i1 < n1; ++i1) {
    for (int i2 = 0; i2 < n2; ++i2) {
      const double V = model.corner_potential(model.grid1.node(i1), model.grid2.node(i2));
      t.emplace_back(i1 * n2 + i2, i1 * n2 + i2, cplx(mu + V, 0.0));
    }
  }
  op.matrix = detail::from_triplets(static_cast<Eigen::Index>(n1) * n2, t);
  op.factors = {std::move(A1), std::move(A2)};
  return op;
}

namespace detail {

// Value of the grid function at extended index m (node u = m h), using the
// boundary condition at 0 and zero extension beyond u_max.
inline cplx extended_value(const VectorXc& f, const HalfLineGrid& g, long m) {
  const long n = g.n();
  if (m >= n + 1) return 0.0;
  if (m >= 1) return f(m - 1);
  const bool neumann = g.bc0() == BoundaryCondition::Neumann;
  if (m == 0) return neumann ? f(0) : cplx(0.0);
  const long mirror = -m;
  const cplx v = mirror >= n + 1 ? cplx(0.0) : f(mirror - 1);
  return neumann ? v : -v;
}

}  // namespace detail

/// Cubic Lagrange interpolation of grid samples at a real point x >= 0.
inline cplx interpolate_cubic(const VectorXc& f, const HalfLineGrid& g, double x) {
  const double p = x / g.h();
  // snap to a node when x is one up to rounding, so nodes reproduce exactly
  const double nearest = std::round(p);
  if (std::abs(p - nearest) < 1e-9) return detail::extended_value(f, g, static_cast<long>(nearest));
  const double base = std::floor(p);
  const long m0 = static_cast<long>(base);
  const double t = p - base;
  const double w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w_0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w_1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w_2 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return w_m1 * detail::extended_value(f, g, m0 - 1) + w_0 * detail::extended_value(f, g, m0) +
         w_1 * detail::extended_value(f, g, m0 + 1) + w_2 * detail::extended_value(f, g, m0 + 2);
}

/// (U_theta f)(u_j) = f(psi_theta(u_j)) psi_theta'(u_j)^{1/2} for real theta >= 0.
inline VectorXc discrete_dilation(cplx theta, const VectorXc& f, const HalfLineGrid& grid,
                                  const CutoffProfile& profile = CutoffProfile()) {
  if (!is_unitary_theta(theta)) {
    throw ComplexThetaError("discrete_dilation is defined only for real theta >= 0");
  }
  if (f.size() != grid.n()) throw DimensionMismatchError("discrete_dilation: size mismatch");
  VectorXc out(grid.n());
  for (int j = 0; j < grid.n(); ++j) {
    const double u = grid.node(j);
    if (u <= profile.K() || theta == cplx(0.0)) {
      out(j) = f(j);  // psi is the identity here
      continue;
    }
    const ScalingJet jet = psi_jet(profile, theta, u);
    out(j) = interpolate_cubic(f, grid, jet.psi.real()) * std::sqrt(jet.dpsi.real());
  }
  return out;
}

/// Samples (U_theta^{-1} f)(u_j) = f(alpha(u_j)) psi'(alpha(u_j))^{-1/2} of a closed-form f.
inline VectorXc inverse_dilation_sampled(double theta, const std::function<cplx(double)>& f,
                                         const HalfLineGrid& grid,
                                         const CutoffProfile& profile = CutoffProfile()) {
  VectorXc out(grid.n());
  for (int j = 0; j < grid.n(); ++j) {
    const double a = alpha_inverse(profile, theta, grid.node(j));
    const double d = psi_jet(profile, cplx(theta, 0.0), a).dpsi.real();
    out(j) = f(a) / std::sqrt(d);
  }
  return out;
}

inline VectorXc sample(const std::function<cplx(double)>& f, const HalfLineGrid& grid) {
  VectorXc out(grid.n());
  for (int j = 0; j < grid.n(); ++j) out(j) = f(grid.node(j));
  return out;
}

/// ||(U A_0 U^{-1} - A_theta) f|| / ||f|| for one closed-form test function.
inline double conjugation_residual_for(double theta, const HalfLineGrid& grid, double mu,
                                       const PotentialProfile& v,
                                       const std::function<cplx(double)>& f,
                                       const CutoffProfile& profile = CutoffProfile()) {
  const ModeOperator a0 = assemble_cyl_mode(DilationParameter(0.0), mu, grid, v, profile);
  const ModeOperator at = assemble_cyl_mode(DilationParameter(theta), mu, grid, v, profile);
  const VectorXc fv = sample(f, grid);
  const VectorXc g = inverse_dilation_sampled(theta, f, grid, profile);
  const VectorXc lg = a0.matrix * g;
  const VectorXc ulg = discrete_dilation(theta, lg, grid, profile);
  const VectorXc diff = ulg - at.matrix * fv;
  return diff.norm() / fv.norm();
}

/// Fixed battery of smooth, effectively compactly supported test functions.
inline std::vector<std::function<cplx(double)>> conjugation_battery(
    const CutoffProfile& profile = CutoffProfile()) {
  const double K = profile.K();
  const double R = profile.R();
  const double mid = 0.5 * (K + R);
  auto gauss = [](double c, double w) {
    return [c, w](double u) -> cplx {
      const double z = (u - c) / w;
      return std::exp(-z * z);
    };
  };
  auto wave = [](double c, double w, double k) {
    return [c, w, k](double u) -> cplx {
      const double z = (u - c) / w;
      return std::exp(-z * z) * std::polar(1.0, k * u);
    };
  };
  return {gauss(mid, 0.6), wave(mid + 0.5, 1.0, 1.5), wave(R + 2.0, 0.8, 2.0),
          gauss(R + 1.0, 1.2)};
}

/// Max over the battery of the discrete conjugation defect. Zero at theta = 0.
inline double conjugation_residual(double theta, const HalfLineGrid& grid, double mu,
                                   const PotentialProfile& v,
                                   const CutoffProfile& profile = CutoffProfile()) {
  if (theta < 0.0) throw ComplexThetaError("conjugation_residual: theta must be >= 0");
  double worst = 0.0;
  for (const auto& f : conjugation_battery(profile)) {
    worst = std::max(worst, conjugation_residual_for(theta, grid, mu, v, f, profile));
  }
  return worst;
}

/// Plain-text complex triplets: header "row,col,re,im", zero-based indices,
/// 17 significant digits.
inline void write_triplets(std::ostream& os, const SparseC& m) {
  os << "row,col,re,im\n";
  char buf[128];
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseC::InnerIterator it(m, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g,%.17g\n",
                    static_cast<long long>(it.row()), static_cast<long long>(it.col()),
                    it.value().real(), it.value().imag());
      os << buf;
    }
  }
}

inline SparseC read_triplets(std::istream& is, Eigen::Index n) {
  std::string line;
  std::getline(is, line);
  if (line != "row,col,re,im") throw Error("read_triplets: bad header");
  std::vector<Triplet> t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    long long r = 0, c = 0;
    double re = 0.0, im = 0.0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf,%lf", &r, &c, &re, &im) != 4) {
      throw Error("read_triplets: malformed line '" + line + "'");
    }
    t.emplace_back(r, c, cplx(re, im));
  }
  return detail::from_triplets(n, t);
}

}  // namespace cscale
