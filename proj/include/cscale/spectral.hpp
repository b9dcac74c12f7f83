#pragma once

// Predicted essential-spectrum rays, ray/discrete classification, two-theta
// resonance detection, the Kronecker-sum spectral identity, sector fitting
// and a contour-integral holomorphy probe.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cscale/assembly.hpp"
#include "cscale/dilation.hpp"
#include "cscale/geometry.hpp"
#include "cscale/linalg.hpp"

namespace cscale {

enum class RayOrigin { CrossSectionThreshold, EndEigenvalue, EndResonance };

inline const char* to_string(RayOrigin r) {
  switch (r) {
    case RayOrigin::CrossSectionThreshold: return "threshold";
    case RayOrigin::EndEigenvalue: return "end-eigenvalue";
    case RayOrigin::EndResonance: return "end-resonance";
  }
  return "?";
}

// Rays {origin + direction t : t >= 0} sharing one direction theta'.
struct RayFamily {
  std::vector<cplx> origins;
  cplx direction{1.0, 0.0};
  std::vector<RayOrigin> provenance;

  std::size_t size() const noexcept { return origins.size(); }
  void add(cplx origin, RayOrigin tag) {
    origins.push_back(origin);
    provenance.push_back(tag);
  }
};

/// Cylinder end: one ray per cross-section eigenvalue (multiplicity kept).
inline RayFamily predict_essential(const DilationParameter& theta,
                                   const CrossSectionSpectrum& cs) {
  RayFamily f;
  f.direction = theta.prime();
  for (double mu : cs.mus) f.add(cplx(mu, 0.0), RayOrigin::CrossSectionThreshold);
  return f;
}

/// Corner: threshold rays plus one ray from every supplied end-operator
/// point eigenvalue (real ones are eigenvalues, nonreal ones resonances).
inline RayFamily predict_essential(const DilationParameter& theta,
                                   const CrossSectionSpectrum& cs,
                                   const std::vector<std::vector<cplx>>& end_eigs) {
  RayFamily f = predict_essential(theta, cs);
  for (const auto& list : end_eigs) {
    for (cplx g : list) {
      f.add(g, g.imag() == 0.0 ? RayOrigin::EndEigenvalue : RayOrigin::EndResonance);
    }
  }
  return f;
}

/// Distance from z to the closed ray origin + direction [0, inf).
inline double ray_distance(cplx z, cplx origin, cplx direction) {
  const cplx w = z - origin;
  const double t = (w * std::conj(direction)).real() / std::norm(direction);
  if (t <= 0.0) return std::abs(w);
  return std::abs(w - direction * t);
}

/// Ray parameter of the orthogonal projection, clamped at 0.
inline double ray_parameter(cplx z, cplx origin, cplx direction) {
  const double t = ((z - origin) * std::conj(direction)).real() / std::norm(direction);
  return std::max(0.0, t);
}

struct RayBoundEigenvalue {
  cplx value;
  std::size_t ray = 0;
  double t = 0.0;
  double distance = 0.0;
};

struct DiscreteEigenvalue {
  cplx value;
  std::size_t nearest_ray = 0;
  double distance = 0.0;  // to the nearest ray
};

struct SpectrumClassification {
  std::vector<RayBoundEigenvalue> ray_bound;
  std::vector<DiscreteEigenvalue> discrete;
  double tolerance = 0.0;
};

inline SpectrumClassification classify_spectrum(const std::vector<cplx>& eigs,
                                                const RayFamily& rays, double tol) {
  if (!(tol > 0.0)) throw Error("classify_spectrum: tolerance must be > 0");
  SpectrumClassification c;
  c.tolerance = tol;
  for (cplx z : eigs) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const double d = ray_distance(z, rays.origins[r], rays.direction);
      if (d < best) {
        best = d;
        arg = r;
      }
    }
    if (best <= tol) {
      c.ray_bound.push_back(
          {z, arg, ray_parameter(z, rays.origins[arg], rays.direction), best});
    } else {
      c.discrete.push_back({z, arg, best});
    }
  }
  return c;
}

/// Default classification tolerance 20 h^2 (1 + |mu_max|).
inline double default_classification_tol(double h, double mu_max) {
  return 20.0 * h * h * (1.0 + std::abs(mu_max));
}

struct ResonanceMatch {
  cplx value_a;
  cplx value_b;
  double drift = 0.0;
  bool real = false;  // real matches are eigenvalue candidates of the undilated operator

  cplx value() const { return 0.5 * (value_a + value_b); }
};

struct ResonanceOptions {
  double class_tol = 1e-2;   // classification tolerance at each theta
  double match_tol = 1e-4;   // max |lambda_a - lambda_b| for a match
  // |Im| / (1 + |lambda|) below which a match counts as real. Bound states of the
  // discretized dilated operator carry O(h^2) imaginary parts, so this cannot
  // sit below the discretization floor.
  double real_tol = 1e-4;
};

/// Discrete eigenvalues common to two dilation angles. Matching is greedy by
/// distance; each eigenvalue is used at most once.
inline std::vector<ResonanceMatch> detect_resonances(const std::vector<cplx>& eigs_a,
                                                     const DilationParameter& theta_a,
                                                     const std::vector<cplx>& eigs_b,
                                                     const DilationParameter& theta_b,
                                                     const RayFamily& rays_a,
                                                     const RayFamily& rays_b,
                                                     ResonanceOptions opt = {}) {
  (void)theta_a;
  (void)theta_b;
  const auto ca = classify_spectrum(eigs_a, rays_a, opt.class_tol);
  const auto cb = classify_spectrum(eigs_b, rays_b, opt.class_tol);
  struct Cand {
    double d;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < ca.discrete.size(); ++i) {
    for (std::size_t j = 0; j < cb.discrete.size(); ++j) {
      const double d = std::abs(ca.discrete[i].value - cb.discrete[j].value);
      if (d <= opt.match_tol) cands.push_back({d, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<bool> used_a(ca.discrete.size()), used_b(cb.discrete.size());
  std::vector<ResonanceMatch> out;
  for (const auto& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = true;
    ResonanceMatch m;
    m.value_a = ca.discrete[c.i].value;
    m.value_b = cb.discrete[c.j].value;
    m.drift = c.d;
    m.real = std::abs(m.value().imag()) <= opt.real_tol * (1.0 + std::abs(m.value()));
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(), [](const ResonanceMatch& x, const ResonanceMatch& y) {
    return canonical_less(x.value(), y.value());
  });
  return out;
}

struct MultisetMatch {
  double max_mismatch = 0.0;
  std::size_t unmatched = 0;  // pairs whose nearest partner exceeded the refusal threshold
};

/// Greedy nearest-neighbour matching of two equal-size multisets.
inline MultisetMatch match_multisets(const std::vector<cplx>& a, const std::vector<cplx>& b,
                                     double refuse = 1e-4) {
  MultisetMatch r;
  if (a.size() != b.size()) {
    r.unmatched = std::max(a.size(), b.size()) - std::min(a.size(), b.size());
    r.max_mismatch = std::numeric_limits<double>::infinity();
  }
  std::vector<bool> used(b.size(), false);
  for (cplx z : a) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = b.size();
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(z - b[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    if (arg == b.size()) break;
    used[arg] = true;
    if (best > refuse) ++r.unmatched;
    r.max_mismatch = std::max(r.max_mismatch, best);
  }
  return r;
}

struct IchinoseReport {
  std::vector<cplx> computed;
  std::vector<cplx> predicted;
  double max_mismatch = 0.0;
  std::size_t unmatched = 0;
  bool ok() const { return unmatched == 0; }
};

/// Dense Kronecker sum A (x) I + I (x) B.
inline MatrixXc kronecker_sum(const MatrixXc& A, const MatrixXc& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.rows();
  MatrixXc C = MatrixXc::Zero(n * m, n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (A(i, j) == cplx(0.0)) continue;
      for (Eigen::Index k = 0; k < m; ++k) C(i * m + k, j * m + k) += A(i, j);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) C.block(i * m, i * m, m, m) += B;
  return C;
}

/// sigma(A (x) I + I (x) B) against the sum set sigma(A) + sigma(B).
inline IchinoseReport ichinose_sumcheck(const MatrixXc& A, const MatrixXc& B,
                                        std::size_t max_dim = 3600, double refuse = 1e-4) {
  if (static_cast<std::size_t>(A.rows() * B.rows()) > max_dim) {
    throw InvalidSizeError("ichinose_sumcheck: product dimension exceeds cap");
  }
  IchinoseReport r;
  r.computed = eigenvalues(kronecker_sum(A, B), max_dim);
  const auto ea = eigenvalues(A, max_dim);
  const auto eb = eigenvalues(B, max_dim);
  for (cplx x : ea) {
    for (cplx y : eb) r.predicted.push_back(x + y);
  }
  std::sort(r.predicted.begin(), r.predicted.end(), canonical_less);
  const MultisetMatch m = match_multisets(r.predicted, r.computed, refuse);
  r.max_mismatch = m.max_mismatch;
  r.unmatched = m.unmatched;
  return r;
}

struct SectorFit {
  double gamma = 0.0;
  double k = 0.0;
  /// Half-opening angle of the sector |arg z| <= arctan(1/k).
  double half_angle() const { return std::atan(1.0 / k); }
};

/// Smallest gamma >= 0 with Re(s) + gamma >= k |Im(s)| for every sample.
inline double minimal_sector_shift(const std::vector<cplx>& samples, double k) {
  double g = 0.0;
  for (cplx s : samples) g = std::max(g, k * std::abs(s.imag()) - s.real());
  return g;
}

/// Directions in which the support point of a convex set maximizes
/// k |Im z| - Re z, two per k. Feeding the support points in these directions
/// to sector_search makes its shift exact for every k on the grid.
inline std::vector<double> sector_edge_angles(const std::vector<double>& k_grid) {
  std::vector<double> out;
  for (double k : k_grid) {
    if (!(k > 0.0)) continue;
    out.push_back(std::arg(cplx(-1.0, k)));
    out.push_back(std::arg(cplx(-1.0, -k)));
  }
  return out;
}

/// Largest k in k_grid whose minimal shift stays within gamma_cap.
inline std::optional<SectorFit> sector_search(const std::vector<cplx>& samples,
                                              std::vector<double> k_grid,
                                              double gamma_cap = 10.0) {
  std::sort(k_grid.begin(), k_grid.end(), std::greater<>());
  for (double k : k_grid) {
    if (!(k > 0.0)) continue;
    const double g = minimal_sector_shift(samples, k);
    if (g <= gamma_cap) return SectorFit{g, k};
  }
  return std::nullopt;
}

/// |trapezoidal contour integral of fn| / (radius max|fn|) on a circle.
inline double holomorphy_check(const std::function<cplx(cplx)>& fn, cplx center,
                               double radius, int m) {
  if (m < 16) throw InvalidSizeError("holomorphy_check: need m >= 16");
  constexpr double two_pi = 6.283185307179586476925286766559;
  cplx integral = 0.0;
  double fmax = 0.0;
  for (int k = 0; k < m; ++k) {
    const cplx e = std::polar(1.0, two_pi * k / m);
    const cplx v = fn(center + radius * e);
    fmax = std::max(fmax, std::abs(v));
    integral += v * cplx(0.0, 1.0) * radius * e;
  }
  integral *= two_pi / m;
  if (fmax == 0.0) return 0.0;
  return std::abs(integral) / (radius * fmax);
}

/// Point spectrum of the end operator: discrete eigenvalues of the radial
/// block (off the ray theta'[0, inf)) shifted by every cross-section threshold.
inline std::vector<cplx> end_point_spectrum(const DilationParameter& theta,
                                            const CutoffProfile& profile,
                                            const HalfLineGrid& grid,
                                            const PotentialProfile& v,
                                            const CrossSectionSpectrum& cs, double tol,
                                            double real_tol = 1e-4) {
  const SparseC block = radial_block(theta, profile, grid, v);
  const auto eigs = eigenvalues(MatrixXc(block));
  RayFamily base;
  base.direction = theta.prime();
  base.add(0.0, RayOrigin::CrossSectionThreshold);
  const auto cls = classify_spectrum(eigs, base, tol);
  std::vector<cplx> out;
  for (const auto& d : cls.discrete) {
    cplx g = d.value;
    if (theta.unitary() || std::abs(g.imag()) < real_tol * (1.0 + std::abs(g))) g = cplx(g.real(), 0.0);
    for (double mu : cs.mus) out.push_back(g + mu);
  }
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

}  // namespace cscale
