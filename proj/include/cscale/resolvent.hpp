#pragma once

// Analytic vectors (compact interior part plus a closed-form tail in 1/u),
// their continuation to complex dilation, and resolvent matrix elements
//   <(A_theta - lambda)^{-1} U_theta f, U_conj(theta) g>
// evaluated along paths in the spectral plane.

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cscale/assembly.hpp"
#include "cscale/dilation.hpp"
#include "cscale/errors.hpp"
#include "cscale/geometry.hpp"
#include "cscale/linalg.hpp"

namespace cscale {

inline constexpr int kMaxTailDegree = 6;

// One component per transverse mode. The interior part is supported in
// [0, K-1]; the tail is kappa(u) u^{-2} p(1/u) with kappa the smoothstep on
// [K-1, K].
class AnalyticVector {
public:
  AnalyticVector(HalfLineGrid grid, CutoffProfile profile, std::vector<VectorXc> interior,
                 std::vector<std::vector<cplx>> tails)
      : grid_(std::move(grid)), profile_(profile), interior_(std::move(interior)),
        tails_(std::move(tails)) {
    if (interior_.size() != tails_.size()) {
      throw DimensionMismatchError("AnalyticVector: interior/tail mode counts differ");
    }
    const double edge = profile_.K() - 1.0;
    for (const auto& g : interior_) {
      if (g.size() != grid_.n()) throw DimensionMismatchError("AnalyticVector: interior size");
      for (int j = 0; j < grid_.n(); ++j) {
        if (grid_.node(j) >= edge && g(j) != cplx(0.0)) {
          throw SupportViolationError("AnalyticVector: interior part must vanish at and beyond K-1");
        }
      }
    }
    for (const auto& p : tails_) {
      if (static_cast<int>(p.size()) > kMaxTailDegree + 1) {
        throw InvalidSizeError("AnalyticVector: tail degree exceeds cap");
      }
    }
  }

  const HalfLineGrid& grid() const noexcept { return grid_; }
  const CutoffProfile& profile() const noexcept { return profile_; }
  std::size_t modes() const noexcept { return interior_.size(); }
  const std::vector<cplx>& tail(std::size_t i) const { return tails_.at(i); }
  const VectorXc& interior(std::size_t i) const { return interior_.at(i); }
  double scale() const noexcept { return scale_; }

  /// kappa(u): 0 below K-1, 1 above K.
  double kappa(double u) const { return smoothstep7(u - (profile_.K() - 1.0)).value; }

  /// Tail polynomial u^{-2} p(1/u) at a complex point.
  cplx tail_value(std::size_t mode, cplx z) const {
    const auto& p = tails_.at(mode);
    const cplx w = 1.0 / z;
    cplx acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * w + *it;
    return acc * w * w;
  }

  /// Undilated samples (1-kappa) g + kappa h, including the normalization.
  VectorXc reconstruct(std::size_t mode) const {
    VectorXc out(grid_.n());
    for (int j = 0; j < grid_.n(); ++j) out(j) = evaluate(mode, grid_.node(j));
    return out;
  }

  cplx evaluate(std::size_t mode, double u) const {
    const int j = static_cast<int>(std::lround(u / grid_.h())) - 1;
    cplx interior = 0.0;
    if (j >= 0 && j < grid_.n() && std::abs(grid_.node(j) - u) < 1e-12 * (1.0 + u)) {
      interior = interior_.at(mode)(j);
    }
    const double k = kappa(u);
    const cplx tail = (k == 0.0 || tails_.at(mode).empty()) ? cplx(0.0) : k * tail_value(mode, u);
    return scale_ * ((1.0 - k) * interior + tail);
  }

  double norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < modes(); ++i) s += reconstruct(i).squaredNorm();
    return std::sqrt(s * grid_.h());
  }

  void set_scale(double s) { scale_ = s; }

private:
  HalfLineGrid grid_;
  CutoffProfile profile_;
  std::vector<VectorXc> interior_;
  std::vector<std::vector<cplx>> tails_;
  double scale_ = 1.0;
};

/// Builds and normalizes to unit discrete norm.
inline AnalyticVector make_analytic_vector(const HalfLineGrid& grid,
                                           std::vector<VectorXc> interior,
                                           std::vector<std::vector<cplx>> tails,
                                           const CutoffProfile& profile = CutoffProfile()) {
  AnalyticVector v(grid, profile, std::move(interior), std::move(tails));
  const double n = v.norm();
  if (n == 0.0) throw Error("make_analytic_vector: zero vector");
  v.set_scale(1.0 / n);
  return v;
}

/// U_theta applied in closed form: interior untouched, tail evaluated at the
/// complex point psi_theta(u) with weight psi_theta'(u)^{1/2}.
inline VectorXc dilate_vector(const AnalyticVector& f, std::size_t mode, cplx theta) {
  if (!in_gamma(theta) && !is_unitary_theta(theta)) {
    throw Error("dilate_vector: theta must be in Gamma or real >= 0");
  }
  const HalfLineGrid& g = f.grid();
  const double K = f.profile().K();
  VectorXc out(g.n());
  for (int j = 0; j < g.n(); ++j) {
    const double u = g.node(j);
    if (u <= K || f.tail(mode).empty()) {
      out(j) = f.evaluate(mode, u);
    } else {
      const ScalingJet jet = psi_jet(f.profile(), theta, u);
      out(j) = f.scale() * f.tail_value(mode, jet.psi) * std::sqrt(jet.dpsi);
    }
  }
  return out;
}

/// General grid functions only dilate for real theta; complex theta needs an analytic vector.
inline VectorXc dilate_vector(const VectorXc& f, const HalfLineGrid& grid, cplx theta,
                              const CutoffProfile& profile = CutoffProfile()) {
  if (!is_unitary_theta(theta)) {
    throw NonAnalyticVectorError("dilate_vector: complex theta requires an analytic vector");
  }
  return discrete_dilation(theta, f, grid, profile);
}

/// x with T x = b for a tridiagonal T (banded LU with partial pivoting).
inline VectorXc solve_tridiagonal(const SparseC& T, const VectorXc& b) {
  const auto n = static_cast<lapack_int>(T.rows());
  // Band storage for kl = ku = 1 plus kl extra rows for pivoting fill-in.
  const lapack_int ldab = 4;
  std::vector<cplx> ab(static_cast<std::size_t>(ldab) * n, cplx(0.0));
  for (Eigen::Index r = 0; r < T.outerSize(); ++r) {
    for (SparseC::InnerIterator it(T, r); it; ++it) {
      const auto i = static_cast<lapack_int>(it.row());
      const auto j = static_cast<lapack_int>(it.col());
      if (std::abs(i - j) > 1) throw Error("solve_tridiagonal: matrix is not tridiagonal");
      ab[static_cast<std::size_t>(j) * ldab + (2 + i - j)] = it.value();
    }
  }
  VectorXc x = b;
  std::vector<lapack_int> ipiv(n);
  const lapack_int info = LAPACKE_zgbsv(LAPACK_COL_MAJOR, n, 1, 1, 1,
                                        detail::lp(ab.data()), ldab, ipiv.data(),
                                        detail::lp(x.data()), n);
  if (info > 0) {
    throw SingularMatrixError("solve_tridiagonal: singular pivot at index " +
                                  std::to_string(info - 1),
                              static_cast<std::size_t>(info - 1));
  }
  if (info < 0) throw Error("solve_tridiagonal: illegal argument");
  return x;
}

// Per-mode dilated cylinder blocks at one theta with their spectra, so that
// many lambda can be evaluated against the same operator.
struct ResolventContext {
  DilationParameter theta;
  std::vector<ModeOperator> blocks;            // one per mode
  std::vector<std::vector<cplx>> spectra;      // eigenvalues of each block
  double distance_floor = 1e-3;

  double distance_to_spectrum(cplx lambda) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : spectra) {
      for (cplx z : s) d = std::min(d, std::abs(z - lambda));
    }
    return d;
  }
};

inline ResolventContext make_resolvent_context(const DilationParameter& theta,
                                               const CrossSectionSpectrum& cs,
                                               const HalfLineGrid& grid,
                                               const PotentialProfile& v,
                                               const CutoffProfile& profile = CutoffProfile(),
                                               bool with_spectra = true) {
  ResolventContext ctx;
  ctx.theta = theta;
  const auto distinct = distinct_thresholds(cs);
  std::vector<std::vector<cplx>> base;
  for (double mu : cs.mus) {
    ctx.blocks.push_back(assemble_cyl_mode(theta, mu, grid, v, profile));
  }
  if (with_spectra) {
    // Blocks of equal threshold are identical; solve once per distinct value.
    for (double mu : distinct) {
      const ModeOperator op = assemble_cyl_mode(theta, mu, grid, v, profile);
      base.push_back(eigenvalues(op.dense(), 4000));
    }
    for (double mu : cs.mus) {
      const auto it = std::find(distinct.begin(), distinct.end(), mu);
      ctx.spectra.push_back(base[static_cast<std::size_t>(it - distinct.begin())]);
    }
  }
  return ctx;
}

/// Fine grids are too long for a dense eigensolve. Borrow the spectrum of the
/// same model on a coarser grid for the distance floor instead.
inline void attach_proxy_spectra(ResolventContext& ctx, const CrossSectionSpectrum& cs,
                                 const HalfLineGrid& coarse, const PotentialProfile& v,
                                 const CutoffProfile& profile = CutoffProfile()) {
  if (cs.mus.size() != ctx.blocks.size()) {
    throw DimensionMismatchError("attach_proxy_spectra: mode count mismatch");
  }
  const ResolventContext proxy = make_resolvent_context(ctx.theta, cs, coarse, v, profile, true);
  ctx.spectra = proxy.spectra;
}

/// sum over modes of <(A_i - lambda)^{-1} U_theta f_i, U_conj(theta) g_i>.
inline cplx matrix_element(cplx lambda, const ResolventContext& ctx, const AnalyticVector& f,
                           const AnalyticVector& g) {
  if (f.modes() != ctx.blocks.size() || g.modes() != ctx.blocks.size()) {
    throw DimensionMismatchError("matrix_element: mode count mismatch");
  }
  if (!ctx.spectra.empty()) {
    const double d = ctx.distance_to_spectrum(lambda);
    if (d < ctx.distance_floor) {
      throw NearSingularError("matrix_element: lambda within " + std::to_string(d) +
                                  " of the computed spectrum",
                              d);
    }
  }
  const cplx theta = ctx.theta.theta();
  cplx total = 0.0;
  for (std::size_t i = 0; i < ctx.blocks.size(); ++i) {
    const ModeOperator& A = ctx.blocks[i];
    SparseC shifted = A.matrix;
    for (Eigen::Index k = 0; k < shifted.rows(); ++k) shifted.coeffRef(k, k) -= lambda;
    const VectorXc x = solve_tridiagonal(shifted, dilate_vector(f, i, theta));
    const VectorXc y = dilate_vector(g, i, std::conj(theta));
    total += grid_inner(x, y, A.cell());
  }
  return total;
}

enum class TraceFlag { Ok, NearSpectrum, PoleCandidate, SolveError };

inline const char* to_string(TraceFlag f) {
  switch (f) {
    case TraceFlag::Ok: return "ok";
    case TraceFlag::NearSpectrum: return "near-spectrum";
    case TraceFlag::PoleCandidate: return "pole-candidate";
    case TraceFlag::SolveError: return "solve-error";
  }
  return "?";
}

struct ContinuationTrace {
  std::vector<cplx> lambdas;
  std::vector<cplx> values;
  std::vector<TraceFlag> flags;
  cplx theta;
  double second_difference = 0.0;  // max |v[k+1] - 2 v[k] + v[k-1]| / max |v| over clean triples

  std::size_t count(TraceFlag f) const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), f));
  }
};

/// Matrix elements along a path. Points closer than the distance floor to the
/// spectrum are flagged and skipped; local |value| maxima within two path
/// steps of an eigenvalue are flagged as pole candidates.
inline ContinuationTrace continuation_scan(const std::vector<cplx>& path,
                                           const ResolventContext& ctx,
                                           const AnalyticVector& f, const AnalyticVector& g) {
  ContinuationTrace tr;
  tr.theta = ctx.theta.theta();
  tr.lambdas = path;
  tr.values.assign(path.size(), cplx(std::numeric_limits<double>::quiet_NaN(), 0.0));
  tr.flags.assign(path.size(), TraceFlag::Ok);
  for (std::size_t k = 0; k < path.size(); ++k) {
    try {
      tr.values[k] = matrix_element(path[k], ctx, f, g);
    } catch (const NearSingularError&) {
      tr.flags[k] = TraceFlag::NearSpectrum;
    } catch (const Error&) {
      tr.flags[k] = TraceFlag::SolveError;
    }
  }
  const std::vector<TraceFlag> solved = tr.flags;  // neighbours judged before any pole marking
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (solved[k] != TraceFlag::Ok) continue;
    double step = 0.0;
    if (k > 0) step = std::max(step, std::abs(path[k] - path[k - 1]));
    if (k + 1 < path.size()) step = std::max(step, std::abs(path[k + 1] - path[k]));
    const double a = std::abs(tr.values[k]);
    const bool left = k == 0 || solved[k - 1] != TraceFlag::Ok || std::abs(tr.values[k - 1]) < a;
    const bool right = k + 1 == path.size() || solved[k + 1] != TraceFlag::Ok ||
                       std::abs(tr.values[k + 1]) < a;
    if (left && right && !ctx.spectra.empty() && ctx.distance_to_spectrum(path[k]) <= 2.0 * step) {
      tr.flags[k] = TraceFlag::PoleCandidate;
    }
  }
  double vmax = 0.0, d2 = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (tr.flags[k] == TraceFlag::Ok) vmax = std::max(vmax, std::abs(tr.values[k]));
  }
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    if (tr.flags[k - 1] != TraceFlag::Ok || tr.flags[k] != TraceFlag::Ok ||
        tr.flags[k + 1] != TraceFlag::Ok) {
      continue;
    }
    d2 = std::max(d2, std::abs(tr.values[k + 1] - 2.0 * tr.values[k] + tr.values[k - 1]));
  }
  tr.second_difference = vmax > 0.0 ? d2 / vmax : 0.0;
  return tr;
}

/// Trace as CSV: re_lambda,im_lambda,re_value,im_value,flag.
inline void write_trace_csv(std::ostream& os, const ContinuationTrace& tr) {
  os << "re_lambda,im_lambda,re_value,im_value,flag\n";
  char buf[160];
  for (std::size_t k = 0; k < tr.lambdas.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s\n", tr.lambdas[k].real(),
                  tr.lambdas[k].imag(), tr.values[k].real(), tr.values[k].imag(),
                  to_string(tr.flags[k]));
    os << buf;
  }
}

}  // namespace cscale
