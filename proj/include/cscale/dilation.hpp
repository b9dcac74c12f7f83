#pragma once

// Cutoff dilation profile psi_theta(u) = (phi(u) theta + 1) u, its jets, and
// the coefficients of the dilated radial operator
//   a2 d^2/du^2 + a1 d/du + a0.
// Everything here is a rational function of theta and therefore holomorphic
// wherever psi_theta' does not vanish.

#include <array>
#include <cmath>
#include <complex>
#include <sstream>

#include "cscale/errors.hpp"

namespace cscale {

using cplx = std::complex<double>;

/// True iff theta lies in the sector Gamma: Re > 0, Re >= |Im|, Im^2 < 1/2.
inline bool in_gamma(cplx theta) noexcept {
  const double re = theta.real();
  const double im = theta.imag();
  return re > 0.0 && re >= std::abs(im) && im * im < 0.5;
}

/// Real non-negative theta: the unitary regime.
inline bool is_unitary_theta(cplx theta) noexcept {
  return theta.imag() == 0.0 && theta.real() >= 0.0;
}

/// Direction of the rotated essential spectrum, 1/(theta+1)^2.
inline cplx theta_prime(cplx theta) {
  const cplx s = theta + 1.0;
  if (s == cplx(0.0, 0.0)) {
    throw PoleError("theta_prime: pole at theta = -1");
  }
  return 1.0 / (s * s);
}

// A validated dilation parameter. Construction fails unless theta is in Gamma
// or real non-negative.
class DilationParameter {
public:
  explicit DilationParameter(cplx theta) : theta_(theta) {
    if (!in_gamma(theta) && !is_unitary_theta(theta)) {
      std::ostringstream os;
      os << "theta = " << theta << " is neither in Gamma nor real >= 0";
      throw Error(os.str());
    }
    prime_ = theta_prime(theta);
  }
  DilationParameter() : DilationParameter(cplx(0.0, 0.0)) {}

  cplx theta() const noexcept { return theta_; }
  cplx prime() const noexcept { return prime_; }
  bool unitary() const noexcept { return is_unitary_theta(theta_); }

private:
  cplx theta_;
  cplx prime_;
};

// Degree-7 smoothstep S(t) = 35t^4 - 84t^5 + 70t^6 - 20t^7 clamped to [0,1].
// S is C^3 across both joins.
struct SmoothstepJet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

inline SmoothstepJet smoothstep7(double t) noexcept {
  if (t <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0, 0.0};
  const double s = 1.0 - t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double t4 = t3 * t;
  SmoothstepJet j;
  j.value = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
  j.d1 = 140.0 * t3 * s * s * s;
  j.d2 = 420.0 * t2 * s * s * (1.0 - 2.0 * t);
  j.d3 = 840.0 * t * s * (1.0 - 5.0 * t + 5.0 * t2);
  return j;
}

class CutoffProfile {
public:
  CutoffProfile(double K = 2.0, double R = 4.0) : K_(K), R_(R) {
    if (!(K > 0.0) || !(R > K)) {
      throw InvalidSizeError("CutoffProfile requires 0 < K < R");
    }
  }
  double K() const noexcept { return K_; }
  double R() const noexcept { return R_; }

private:
  double K_;
  double R_;
};

/// phi and its first three u-derivatives: 0 below K, 1 above R.
inline std::array<double, 4> smoothstep_phi(const CutoffProfile& p, double u) {
  if (u < 0.0) {
    throw NegativeRadiusError("smoothstep_phi: negative radius");
  }
  const double w = p.R() - p.K();
  const SmoothstepJet s = smoothstep7((u - p.K()) / w);
  return {s.value, s.d1 / w, s.d2 / (w * w), s.d3 / (w * w * w)};
}

struct ScalingJet {
  cplx psi;
  cplx dpsi;
  cplx d2psi;
  cplx d3psi;
};

inline ScalingJet psi_jet(const CutoffProfile& p, cplx theta, double u) {
  if (u < 0.0) {
    throw NegativeRadiusError("psi_jet: negative radius");
  }
  if (u <= p.K()) {
    return {cplx(u, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)};
  }
  if (u >= p.R()) {
    const cplx s = theta + 1.0;
    return {s * u, s, cplx(0.0, 0.0), cplx(0.0, 0.0)};
  }
  const auto [phi, d1, d2, d3] = smoothstep_phi(p, u);
  ScalingJet j;
  j.psi = (phi * theta + 1.0) * u;
  j.dpsi = d1 * u * theta + phi * theta + 1.0;
  j.d2psi = d2 * u * theta + 2.0 * d1 * theta;
  j.d3psi = d3 * u * theta + 3.0 * d2 * theta;
  return j;
}

struct CoefficientTriple {
  cplx a2;
  cplx a1;
  cplx a0;
};

// Coefficients of U_theta (-d^2/du^2) U_theta^{-1}, written through the jet:
//   a2 = -1/psi'^2,  a1 = 2 psi''/psi'^3,
//   a0 = psi'''/(2 psi'^3) - 5 psi''^2/(4 psi'^4).
// Outside [K, R] the exact reduced values are returned.
inline CoefficientTriple dilation_coefficients(const CutoffProfile& p, cplx theta,
                                               double u) {
  if (u < 0.0) {
    throw NegativeRadiusError("dilation_coefficients: negative radius");
  }
  if (u <= p.K()) {
    return {cplx(-1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)};
  }
  if (u >= p.R()) {
    return {-theta_prime(theta), cplx(0.0, 0.0), cplx(0.0, 0.0)};
  }
  const ScalingJet j = psi_jet(p, theta, u);
  if (std::abs(j.dpsi) < 1e-12) {
    throw DegenerateJacobianError("dilation_coefficients: |psi'| < 1e-12");
  }
  const cplx inv = 1.0 / j.dpsi;
  const cplx inv2 = inv * inv;
  const cplx inv3 = inv2 * inv;
  CoefficientTriple c;
  c.a2 = -inv2;
  c.a1 = 2.0 * j.d2psi * inv3;
  c.a0 = 0.5 * j.d3psi * inv3 - 1.25 * j.d2psi * j.d2psi * inv3 * inv;
  return c;
}

/// Inverse of psi_theta for real theta >= 0 (Newton on the monotone map).
inline double alpha_inverse(const CutoffProfile& p, double theta, double x) {
  if (theta < 0.0) throw ComplexThetaError("alpha_inverse: theta must be >= 0");
  if (x <= p.K() || theta == 0.0) return x;
  const double xr = (theta + 1.0) * p.R();
  if (x >= xr) return x / (theta + 1.0);
  double lo = p.K();
  double hi = p.R();
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const ScalingJet j = psi_jet(p, cplx(theta, 0.0), u);
    const double f = j.psi.real() - x;
    if (f > 0.0) hi = u; else lo = u;
    double next = u - f / j.dpsi.real();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < 1e-15 * (1.0 + u)) return next;
    u = next;
  }
  return u;
}

}  // namespace cscale
