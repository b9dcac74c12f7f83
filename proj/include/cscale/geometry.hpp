#pragma once

// Desk-scale model geometries: cross-section spectra, uniform half-line
// grids, and compactly supported potentials standing in for the compact
// interior pieces.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cscale/dilation.hpp"
#include "cscale/errors.hpp"

namespace cscale {

struct CrossSectionSpectrum {
  std::vector<double> mus;          // sorted, with multiplicity
  std::vector<std::string> labels;  // one per entry of mus
  int truncation = 0;               // number of retained modes
};

/// Circle of the given radius: (k/radius)^2 for k = 0, 1, 1, 2, 2, ...
inline CrossSectionSpectrum circle_cross_section(int n_modes, double radius) {
  if (n_modes < 1 || !(radius > 0.0)) {
    throw InvalidSizeError("circle_cross_section: need n_modes >= 1, radius > 0");
  }
  CrossSectionSpectrum cs;
  cs.truncation = n_modes;
  cs.mus.push_back(0.0);
  cs.labels.push_back("k=0");
  for (int k = 1; static_cast<int>(cs.mus.size()) < n_modes; ++k) {
    const double mu = (k / radius) * (k / radius);
    for (const char* sign : {"cos", "sin"}) {
      if (static_cast<int>(cs.mus.size()) == n_modes) break;
      cs.mus.push_back(mu);
      cs.labels.push_back(std::string(sign) + " k=" + std::to_string(k));
    }
  }
  return cs;
}

/// Arbitrary finite list of thresholds; sorted on construction.
inline CrossSectionSpectrum explicit_cross_section(std::vector<double> mus) {
  if (mus.empty()) throw InvalidSizeError("explicit_cross_section: empty list");
  for (double m : mus) {
    if (!(m >= 0.0)) throw InvalidSizeError("explicit_cross_section: negative threshold");
  }
  std::sort(mus.begin(), mus.end());
  CrossSectionSpectrum cs;
  cs.truncation = static_cast<int>(mus.size());
  for (std::size_t i = 0; i < mus.size(); ++i) {
    cs.labels.push_back("mode " + std::to_string(i));
  }
  cs.mus = std::move(mus);
  return cs;
}

/// Distinct thresholds of a cross-section (multiplicity collapsed).
inline std::vector<double> distinct_thresholds(const CrossSectionSpectrum& cs) {
  std::vector<double> out;
  for (double m : cs.mus) {
    if (out.empty() || m != out.back()) out.push_back(m);
  }
  return out;
}

enum class BoundaryCondition { Dirichlet, Neumann };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "neumann";
}

// Uniform grid u_j = j h, j = 1..n, with h = u_max/(n+1). Dirichlet at u_max.
class HalfLineGrid {
public:
  HalfLineGrid(double u_max, int n, BoundaryCondition bc0)
      : u_max_(u_max), n_(n), h_(u_max / (n + 1)), bc0_(bc0) {
    if (!(u_max > 0.0) || n < 16) {
      throw InvalidSizeError("make_grid: need u_max > 0 and n >= 16");
    }
  }
  double u_max() const noexcept { return u_max_; }
  int n() const noexcept { return n_; }
  double h() const noexcept { return h_; }
  BoundaryCondition bc0() const noexcept { return bc0_; }
  double node(int j) const noexcept { return (j + 1) * h_; }  // j = 0..n-1
  std::vector<double> nodes() const {
    std::vector<double> u(n_);
    for (int j = 0; j < n_; ++j) u[j] = node(j);
    return u;
  }
  /// Nested refinement n -> 2n+1 (every old node is a new node).
  HalfLineGrid refined() const { return HalfLineGrid(u_max_, 2 * n_ + 1, bc0_); }

private:
  double u_max_;
  int n_;
  double h_;
  BoundaryCondition bc0_;
};

inline HalfLineGrid make_grid(double u_max, int n, BoundaryCondition bc0) {
  return HalfLineGrid(u_max, n, bc0);
}

struct GaussianTerm {
  double amplitude;  // v contribution: amplitude * exp(-((u-center)/width)^2)
  double center;
  double width;
};

// Real potential on [0, support_end), exactly zero beyond. A sum of Gaussian
// terms multiplied by a C^3 cutoff that reaches zero at support_end.
class PotentialProfile {
public:
  PotentialProfile() = default;
  PotentialProfile(std::vector<GaussianTerm> terms, double support_end)
      : terms_(std::move(terms)), support_end_(support_end) {
    for (const auto& t : terms_) {
      if (!(t.width > 0.0)) throw InvalidSizeError("PotentialProfile: width must be > 0");
    }
    if (!(support_end_ > 0.0) && !terms_.empty()) {
      throw InvalidSizeError("PotentialProfile: support_end must be > 0");
    }
  }

  double operator()(double u) const noexcept {
    if (terms_.empty() || u >= support_end_) return 0.0;
    double v = 0.0;
    for (const auto& t : terms_) {
      const double z = (u - t.center) / t.width;
      v += t.amplitude * std::exp(-z * z);
    }
    const double band = cutoff_band();
    const double cut = 1.0 - smoothstep7((u - (support_end_ - band)) / band).value;
    return v * cut;
  }

  double support_end() const noexcept { return support_end_; }
  const std::vector<GaussianTerm>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }

private:
  double cutoff_band() const noexcept { return std::min(0.5, 0.5 * support_end_); }

  std::vector<GaussianTerm> terms_;
  double support_end_ = 0.0;
};

/// Sum of Gaussian terms, validated against the dilation region [K, inf).
inline PotentialProfile make_potential(const CutoffProfile& profile,
                                       std::vector<GaussianTerm> terms,
                                       double support_end) {
  if (support_end > profile.K()) {
    throw SupportViolationError("potential support_end exceeds K");
  }
  return PotentialProfile(std::move(terms), support_end);
}

/// v(u) = -depth exp(-((u-center)/width)^2), cut off smoothly at support_end.
inline PotentialProfile gaussian_well(double depth, double center, double width,
                                      double support_end,
                                      const CutoffProfile& profile = CutoffProfile()) {
  if (!(width > 0.0)) throw InvalidSizeError("gaussian_well: width must be > 0");
  if (support_end > profile.K()) {
    throw SupportViolationError("gaussian_well: support_end exceeds K");
  }
  if (depth == 0.0) return PotentialProfile({}, support_end);
  return PotentialProfile({GaussianTerm{-depth, center, width}}, support_end);
}

// Separable-or-not real corner potential V(u1,u2); vanishes for max(u1,u2) >= support_end.
struct CornerPotential {
  double depth = 0.0;
  double center1 = 0.0;
  double center2 = 0.0;
  double width = 1.0;
  double support_end = 0.0;

  double operator()(double u1, double u2) const noexcept {
    if (depth == 0.0 || std::max(u1, u2) >= support_end) return 0.0;
    const double z1 = (u1 - center1) / width;
    const double z2 = (u2 - center2) / width;
    const double band = std::min(0.5, 0.5 * support_end);
    const double c1 = 1.0 - smoothstep7((u1 - (support_end - band)) / band).value;
    const double c2 = 1.0 - smoothstep7((u2 - (support_end - band)) / band).value;
    return -depth * std::exp(-z1 * z1 - z2 * z2) * c1 * c2;
  }
  bool is_zero() const noexcept { return depth == 0.0; }
};

struct CornerModel {
  CrossSectionSpectrum cross_section;
  HalfLineGrid grid1;
  HalfLineGrid grid2;
  CutoffProfile profile;
  CornerPotential corner_potential;
  PotentialProfile end_potential1;  // acts in u1
  PotentialProfile end_potential2;  // acts in u2

  void validate() const {
    if (corner_potential.support_end > profile.K()) {
      throw SupportViolationError("corner potential support exceeds K");
    }
    if (end_potential1.support_end() > profile.K() ||
        end_potential2.support_end() > profile.K()) {
      throw SupportViolationError("end potential support exceeds K");
    }
    if (grid1.u_max() <= profile.R() || grid2.u_max() <= profile.R()) {
      throw GridMismatchError("corner grids must extend beyond R");
    }
  }
};

}  // namespace cscale
