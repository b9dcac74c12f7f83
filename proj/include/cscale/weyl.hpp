#pragma once

// Boundary Weyl sequences: escaping wave packets for the free end, products
// of packets for the corner, and packet times cut-off end eigenvector for a
// channel. Corner fields live in separable (low-rank) form so that supports
// escaping to u ~ 10^3 stay cheap.

#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cscale/assembly.hpp"
#include "cscale/dilation.hpp"
#include "cscale/errors.hpp"
#include "cscale/geometry.hpp"
#include "cscale/linalg.hpp"

namespace cscale {

/// Bump on [0,1]: S(2t) S(2-2t) with the degree-7 smoothstep S. Peak 1 at t = 1/2.
inline double bump(double t) noexcept {
  return smoothstep7(2.0 * t).value * smoothstep7(2.0 - 2.0 * t).value;
}

/// Cutoff equal to 1 on u <= 1 and 0 on u >= 2 (C^3).
inline double unit_cutoff(double u) noexcept { return 1.0 - smoothstep7(u - 1.0).value; }

/// Uniform grid with spacing exactly h reaching at least `extent`.
inline HalfLineGrid grid_with_spacing(double h, double extent,
                                      BoundaryCondition bc = BoundaryCondition::Neumann) {
  const int n = std::max(16, static_cast<int>(std::ceil(extent / h)));
  return HalfLineGrid((n + 1) * h, n, bc);
}

// Sum of rank-one terms p_k(u1) q_k(u2) on a pair of grids.
struct SeparableField {
  HalfLineGrid grid1;
  HalfLineGrid grid2;
  std::vector<std::pair<VectorXc, VectorXc>> terms;

  double cell() const { return grid1.h() * grid2.h(); }

  void add(VectorXc p, VectorXc q, cplx scale = 1.0) {
    terms.emplace_back(scale * std::move(p), std::move(q));
  }

  double norm() const {
    cplx s = 0.0;
    for (const auto& [pi, qi] : terms) {
      for (const auto& [pj, qj] : terms) s += pj.dot(pi) * qj.dot(qi);
    }
    return std::sqrt(std::max(0.0, s.real()) * cell());
  }

  cplx at(int i1, int i2) const {
    cplx s = 0.0;
    for (const auto& [p, q] : terms) s += p(i1) * q(i2);
    return s;
  }

  SeparableField& operator-=(const SeparableField& o) {
    for (const auto& [p, q] : o.terms) terms.emplace_back(-p, q);
    return *this;
  }

  void scale(double s) {
    for (auto& t : terms) t.first *= s;
  }
};

/// Mass of a 1D grid function on nodes with index < J.
inline double mass_below(const VectorXc& f, double h, int J) {
  return std::sqrt(h) * f.head(std::min<Eigen::Index>(J, f.size())).norm();
}

namespace detail {

inline void require_disjoint_from_potential(const SeparableField& f, const CornerPotential& V) {
  if (V.is_zero()) return;
  for (int i1 = 0; i1 < f.grid1.n() && f.grid1.node(i1) < V.support_end; ++i1) {
    for (int i2 = 0; i2 < f.grid2.n() && f.grid2.node(i2) < V.support_end; ++i2) {
      if (V(f.grid1.node(i1), f.grid2.node(i2)) != 0.0 && f.at(i1, i2) != cplx(0.0)) {
        throw Error("separable field overlaps the corner potential support");
      }
    }
  }
}

}  // namespace detail

/// (A - lambda) applied to a separable field; stays separable.
inline SeparableField apply_shifted(const KroneckerOperator& A, const SeparableField& f,
                                    cplx lambda) {
  if (A.A1.rows() != f.grid1.n() || A.A2.rows() != f.grid2.n()) {
    throw DimensionMismatchError("separable apply: grid/operator mismatch");
  }
  detail::require_disjoint_from_potential(f, A.V);
  SeparableField out{f.grid1, f.grid2, {}};
  for (const auto& [p, q] : f.terms) {
    out.terms.emplace_back(A.A1 * p, q);
    out.terms.emplace_back(p, A.A2 * q);
    out.terms.emplace_back((A.mu - lambda) * p, q);
  }
  return out;
}

enum class SequenceKind { Free, Corner, Channel };

inline const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::Free: return "free";
    case SequenceKind::Corner: return "corner";
    case SequenceKind::Channel: return "channel";
  }
  return "?";
}

struct SingularSequenceSpec {
  SequenceKind kind = SequenceKind::Free;
  int index = 1;         // sequence index n >= 1
  cplx lambda;           // target on the predicted ray
  double mu = 0.0;       // transverse threshold
  cplx gamma = 0.0;      // channel: end-operator eigenvalue of the u2 factor
  DilationParameter theta;
};

/// Packet centre c_n = n^2 + 2n; support is [c_n, c_n + n].
inline double packet_start(int n) { return static_cast<double>(n) * n + 2.0 * n; }
inline double packet_extent(int n) { return packet_start(n) + n; }

/// Ray parameter s with lambda = origin + theta' s; on-ray within 1e-12 required.
inline double on_ray_parameter(cplx lambda, cplx origin, cplx direction) {
  const cplx s = (lambda - origin) / direction;
  const double tol = 1e-12 * (1.0 + std::abs(s));
  if (std::abs(s.imag()) > tol || s.real() < -tol) {
    throw Error("bWs target is not on the ray origin + theta'[0, inf)");
  }
  return std::max(0.0, s.real());
}

/// n^{-1/2} chi((u - c_n)/n) e^{iku} on the grid, normalized to unit discrete norm.
inline VectorXc escaping_packet(int n, double k, const HalfLineGrid& grid) {
  if (n < 1) throw InvalidSizeError("bWs index must be >= 1");
  if (packet_extent(n) >= grid.u_max() - grid.h()) {
    throw SupportOverflowError("bWs support [" + std::to_string(packet_start(n)) + ", " +
                               std::to_string(packet_extent(n)) +
                               "] does not fit in grid with u_max = " +
                               std::to_string(grid.u_max()));
  }
  const double c = packet_start(n);
  VectorXc f(grid.n());
  for (int j = 0; j < grid.n(); ++j) {
    const double u = grid.node(j);
    f(j) = bump((u - c) / n) / std::sqrt(static_cast<double>(n)) * std::polar(1.0, k * u);
  }
  const double nrm = grid_norm(f, grid.h());
  if (nrm == 0.0) throw SupportOverflowError("bWs packet has no grid support");
  return f / nrm;
}

/// Free kind on a cylinder-mode grid.
inline VectorXc build_free_bws(const SingularSequenceSpec& s, const HalfLineGrid& grid) {
  const double t = on_ray_parameter(s.lambda, s.mu, s.theta.prime());
  return escaping_packet(s.index, std::sqrt(t), grid);
}

/// Corner kind: p_n(u1) q_n(u2) with p at ray parameter 0 and q at lambda - mu.
inline SeparableField build_corner_bws(const SingularSequenceSpec& s, const HalfLineGrid& g1,
                                       const HalfLineGrid& g2) {
  const double t = on_ray_parameter(s.lambda, s.mu, s.theta.prime());
  SeparableField f{g1, g2, {}};
  f.add(escaping_packet(s.index, 0.0, g1), escaping_packet(s.index, std::sqrt(t), g2));
  f.scale(1.0 / f.norm());
  return f;
}

/// Channel kind: f_n(u1) eta_n(u2) phi(u2), phi an eigenvector of the u2
/// factor at gamma (zero-extended onto g2 if shorter).
inline SeparableField build_channel_bws(const SingularSequenceSpec& s, const HalfLineGrid& g1,
                                        const HalfLineGrid& g2, const VectorXc& end_vector) {
  const double t = on_ray_parameter(s.lambda, s.mu + s.gamma, s.theta.prime());
  if (end_vector.size() > g2.n()) {
    throw SupportOverflowError("end eigenvector longer than the u2 grid");
  }
  if (2.0 * s.index >= g2.u_max()) {
    throw SupportOverflowError("channel cutoff eta_n does not fit in the u2 grid");
  }
  VectorXc q = VectorXc::Zero(g2.n());
  for (Eigen::Index j = 0; j < end_vector.size(); ++j) {
    q(j) = unit_cutoff(g2.node(static_cast<int>(j)) / s.index) * end_vector(j);
  }
  SeparableField f{g1, g2, {}};
  f.add(escaping_packet(s.index, std::sqrt(t), g1), q);
  f.scale(1.0 / f.norm());
  return f;
}

/// ||(A - lambda) g|| in the discrete norm, 1D.
inline double defect_norm(const VectorXc& g, cplx lambda, const ModeOperator& A) {
  if (g.size() != A.dim()) throw DimensionMismatchError("defect_norm: size mismatch");
  const VectorXc r = A.matrix * g - lambda * g;
  return grid_norm(r, A.cell());
}

/// Same, for a field on the factored corner operator.
inline double defect_norm(const SeparableField& g, cplx lambda, const KroneckerOperator& A) {
  return apply_shifted(A, g, lambda).norm();
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct DecayPoint {
  double x;      // n or d
  double value;  // defect or epsilon
};

struct DecayTable {
  std::string label;
  std::vector<DecayPoint> points;
  double slope = 0.0;

  void fit() {
    std::vector<double> xs, ys;
    for (const auto& p : points) {
      xs.push_back(p.x);
      ys.push_back(p.value);
    }
    slope = loglog_slope(xs, ys);
  }
};

/// Decay table as CSV: n_or_d,value,fitted_slope.
inline void write_decay_csv(std::ostream& os, const DecayTable& t) {
  os << "n_or_d,value,fitted_slope\n";
  char buf[96];
  for (const auto& p : t.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.value, t.slope);
    os << buf;
  }
}

/// Cut-off eta_0^{(d)}(u1,u2) = eta(u1/d) eta(u2/d) applied to a separable field.
inline SeparableField apply_cutoff(const SeparableField& f, double d) {
  VectorXc e1(f.grid1.n()), e2(f.grid2.n());
  for (int j = 0; j < f.grid1.n(); ++j) e1(j) = unit_cutoff(f.grid1.node(j) / d);
  for (int j = 0; j < f.grid2.n(); ++j) e2(j) = unit_cutoff(f.grid2.node(j) / d);
  SeparableField out{f.grid1, f.grid2, {}};
  for (const auto& [p, q] : f.terms) {
    out.terms.emplace_back(e1.cwiseProduct(p), e2.cwiseProduct(q));
  }
  return out;
}

/// ||[A, eta_0^{(d)}] f|| / (||A f|| + ||f||).
inline double commutator_ratio(const KroneckerOperator& A, const SeparableField& f, double d) {
  if (2.0 * d >= f.grid1.u_max() || 2.0 * d >= f.grid2.u_max()) {
    throw SupportOverflowError("cutoff support [0, 2d] exceeds the grid");
  }
  SeparableField comm = apply_shifted(A, apply_cutoff(f, d), 0.0);
  comm -= apply_cutoff(apply_shifted(A, f, 0.0), d);
  const double af = apply_shifted(A, f, 0.0).norm();
  return comm.norm() / (af + f.norm());
}

/// Seeded battery of wave packets placed relative to the cutoff scale d:
/// products of packets in the transition band [d, 2d] and in the flat
/// region [0, d].
inline std::vector<SeparableField> commutator_battery(double d, const HalfLineGrid& g1,
                                                      const HalfLineGrid& g2,
                                                      unsigned seed = 42, int count = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wave(0.5, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  auto packet = [](const HalfLineGrid& g, double a, double b, double k, double ph) {
    VectorXc v(g.n());
    for (int j = 0; j < g.n(); ++j) {
      const double u = g.node(j);
      v(j) = bump((u - a) / (b - a)) * std::polar(1.0, k * u + ph);
    }
    return v;
  };
  std::vector<SeparableField> out;
  for (int i = 0; i < count; ++i) {
    const double k1 = wave(rng), k2 = wave(rng), p1 = phase(rng), p2 = phase(rng);
    SeparableField f{g1, g2, {}};
    if (i % 3 == 0) {
      f.add(packet(g1, d, 2.0 * d, k1, p1), packet(g2, d, 2.0 * d, k2, p2));
    } else if (i % 3 == 1) {
      f.add(packet(g1, d, 2.0 * d, k1, p1), packet(g2, 0.25 * d, 0.75 * d, k2, p2));
    } else {
      f.add(packet(g1, 0.25 * d, 0.75 * d, k1, p1), packet(g2, d, 2.0 * d, k2, p2));
    }
    f.scale(1.0 / f.norm());
    out.push_back(std::move(f));
  }
  return out;
}

/// epsilon(d) = max over the battery of the commutator ratio, for each d.
inline DecayTable commutator_decay(const std::vector<double>& d_values,
                                   const KroneckerOperator& A, unsigned seed = 42) {
  DecayTable table;
  table.label = "commutator";
  for (double d : d_values) {
    double eps = 0.0;
    for (const auto& f : commutator_battery(d, A.grids[0], A.grids[1], seed)) {
      eps = std::max(eps, commutator_ratio(A, f, d));
    }
    table.points.push_back({d, eps});
  }
  if (table.points.size() >= 2) table.fit();
  return table;
}

}  // namespace cscale
