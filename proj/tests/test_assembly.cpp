#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cscale/assembly.hpp"
#include "cscale/linalg.hpp"
#include "cscale/spectral.hpp"

using namespace cscale;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sorted_real(const std::vector<cplx>& z) {
  std::vector<double> r;
  for (cplx x : z) r.push_back(x.real());
  std::sort(r.begin(), r.end());
  return r;
}

}  // namespace

TEST(CylMode, DirichletLaplacianSpectrum) {
  const auto g = make_grid(10.0, 120, BoundaryCondition::Dirichlet);
  const auto A = assemble_cyl_mode(DilationParameter(0.0), 0.0, g, PotentialProfile());
  const auto ev = eig_hermitian(A.dense()).values;
  const int n = g.n();
  for (int k = 1; k <= n; ++k) {
    const double s = std::sin(k * kPi / (2.0 * (n + 1)));
    EXPECT_NEAR(ev(k - 1), 4.0 / (g.h() * g.h()) * s * s, 1e-9) << k;
  }
}

TEST(CylMode, ShiftByThreshold) {
  const auto g = make_grid(10.0, 60, BoundaryCondition::Neumann);
  const auto v = gaussian_well(3.0, 0.5, 0.3, 1.5);
  const DilationParameter th({0.4, 0.2});
  const MatrixXc a = assemble_cyl_mode(th, 0.0, g, v).dense();
  const MatrixXc b = assemble_cyl_mode(th, 2.5, g, v).dense();
  EXPECT_LT((b - a - 2.5 * MatrixXc::Identity(g.n(), g.n())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CylMode, RejectsShortGridAndWideSupport) {
  const auto shortg = make_grid(3.5, 40, BoundaryCondition::Neumann);
  EXPECT_THROW(assemble_cyl_mode(DilationParameter(0.3), 0.0, shortg, PotentialProfile()),
               GridMismatchError);
  const auto g = make_grid(10.0, 40, BoundaryCondition::Neumann);
  const PotentialProfile wide({{1.0, 1.0, 1.0}}, 3.0);
  EXPECT_THROW(assemble_cyl_mode(DilationParameter(0.3), 0.0, g, wide), SupportViolationError);
}

TEST(CylMode, ReducedRowsAreBitExact) {
  const CutoffProfile p;
  const auto g = make_grid(12.0, 239, BoundaryCondition::Neumann);
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8, p);
  const double mu = 1.0;
  const double h = g.h();
  const double inv_h2 = 1.0 / (h * h);
  for (cplx theta : {cplx(0.5), cplx(0.4, 0.2)}) {
    const auto A = assemble_cyl_mode(DilationParameter(theta), mu, g, v, p);
    const MatrixXc M = A.dense();
    for (int j = 1; j + 1 < g.n(); ++j) {
      const double u = g.node(j);
      if (u <= p.K()) {
        EXPECT_EQ(M(j, j - 1), cplx(-inv_h2));
        EXPECT_EQ(M(j, j + 1), cplx(-inv_h2));
        EXPECT_EQ(M(j, j), cplx(-1.0) * (-2.0 * inv_h2) + (0.0 + (mu + v(u))));
      } else if (u >= p.R()) {
        const cplx a2 = -theta_prime(theta);
        EXPECT_EQ(M(j, j - 1), a2 * inv_h2);
        EXPECT_EQ(M(j, j + 1), a2 * inv_h2);
        EXPECT_EQ(M(j, j), a2 * (-2.0 * inv_h2) + cplx(mu));
      }
      for (int k = 0; k < g.n(); ++k) {
        if (std::abs(k - j) > 1) {
          EXPECT_EQ(M(j, k), cplx(0.0));
        }
      }
    }
  }
}

TEST(CylMode, SymmetricAtThetaZero) {
  const auto g = make_grid(12.0, 200, BoundaryCondition::Neumann);
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8);
  const MatrixXc M = assemble_cyl_mode(DilationParameter(0.0), 1.0, g, v).dense();
  EXPECT_LE((M - M.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff());
}

// Nodal sampling of a1 makes the band rows only O(h) symmetric for real theta > 0.
TEST(CylMode, RealThetaAsymmetryConfinedToBandAndShrinks) {
  const CutoffProfile p;
  auto asym = [&](int n) {
    const auto g = make_grid(12.0, n, BoundaryCondition::Neumann);
    const MatrixXc M = assemble_cyl_mode(DilationParameter(0.3), 0.0, g, PotentialProfile(), p).dense();
    const MatrixXc D = M - M.adjoint();
    double band = 0;
    for (int i = 0; i < g.n(); ++i) {
      for (int j = 0; j < g.n(); ++j) {
        const bool in_band = g.node(i) > p.K() - g.h() && g.node(i) < p.R() + g.h();
        if (!in_band) {
          EXPECT_EQ(D(i, j), cplx(0.0));
        } else {
          band = std::max(band, std::abs(D(i, j)));
        }
      }
    }
    return band;
  };
  const double a = asym(399);
  const double b = asym(1599);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(b, 0.4 * a);
}

// For real theta the dilated block on [0, U] is unitarily equivalent to the
// free operator on [0, psi(U)] = [0, (1+theta) U]; Neumann eigenvalues there
// are ((k - 1/2) pi / L)^2.
TEST(CylMode, RealThetaUnitaryEquivalence) {
  const double theta = 0.4;
  auto worst = [&](int n) {
    const auto g = make_grid(20.0, n, BoundaryCondition::Neumann);
    const auto A = assemble_cyl_mode(DilationParameter(theta), 1.0, g, PotentialProfile());
    const auto ev = sorted_real(eigenvalues(A.dense()));
    const double L = (1.0 + theta) * g.u_max();
    double w = 0;
    for (int k = 1; k <= 6; ++k) {
      const double ref = 1.0 + std::pow((k - 0.5) * kPi / L, 2);
      w = std::max(w, std::abs(ev[k - 1] - ref));
    }
    return w;
  };
  const double e1 = worst(400);
  const double e2 = worst(800);
  EXPECT_LT(e1, 1e-3);
  EXPECT_LT(e2, e1);
}

TEST(CylMode, EntriesHolomorphicInTheta) {
  const auto g = make_grid(8.0, 79, BoundaryCondition::Neumann);
  const auto v = gaussian_well(2.0, 0.5, 0.3, 1.2);
  const cplx c(0.4, 0.1);
  const double r = 0.05;
  const int m = 64;
  MatrixXc integral = MatrixXc::Zero(g.n(), g.n());
  double amax = 0;
  for (int k = 0; k < m; ++k) {
    const cplx e = std::polar(1.0, 2 * kPi * k / m);
    const MatrixXc M = assemble_cyl_mode(DilationParameter(c + r * e), 0.0, g, v).dense();
    integral += M * e;
    amax = std::max(amax, M.cwiseAbs().maxCoeff());
  }
  EXPECT_LT(integral.cwiseAbs().maxCoeff() / (m * amax), 1e-10);
}

TEST(CornerMode, KroneckerSumEntrywise) {
  const CutoffProfile p;
  CornerModel m{circle_cross_section(1, 1.0), make_grid(8.0, 20, BoundaryCondition::Neumann),
                make_grid(9.0, 17, BoundaryCondition::Dirichlet), p, CornerPotential{},
                PotentialProfile(), gaussian_well(4.0, 0.8, 0.4, 1.8, p)};
  const DilationParameter th({0.4, 0.2});
  const auto op = assemble_corner_mode(th, 0.7, m);
  const MatrixXc A1 = MatrixXc(radial_block(th, p, m.grid1, m.end_potential1));
  const MatrixXc A2 = MatrixXc(radial_block(th, p, m.grid2, m.end_potential2));
  const Eigen::Index n1 = A1.rows(), n2 = A2.rows();
  MatrixXc ref = MatrixXc::Zero(n1 * n2, n1 * n2);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n1; ++j)
      for (Eigen::Index k = 0; k < n2; ++k) ref(i * n2 + k, j * n2 + k) += A1(i, j);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index k = 0; k < n2; ++k)
      for (Eigen::Index l = 0; l < n2; ++l) ref(i * n2 + k, i * n2 + l) += A2(k, l);
  ref += 0.7 * MatrixXc::Identity(n1 * n2, n1 * n2);
  EXPECT_LT((op.dense() - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(op.factors.size(), 2u);
  EXPECT_EQ(op.kind, OperatorKind::Corner);
}

TEST(CornerMode, UndilatedSpectrumIsSumSet) {
  const CutoffProfile p;
  CornerModel m{circle_cross_section(1, 1.0), make_grid(6.0, 18, BoundaryCondition::Neumann),
                make_grid(7.0, 20, BoundaryCondition::Dirichlet), p, CornerPotential{},
                PotentialProfile(), PotentialProfile()};
  const auto op = assemble_corner_mode(DilationParameter(0.0), 0.25, m);
  const auto e = eig_hermitian(op.dense()).values;
  const auto e1 = eig_hermitian(MatrixXc(op.factors[0])).values;
  const auto e2 = eig_hermitian(MatrixXc(op.factors[1])).values;
  std::vector<double> sums;
  for (Eigen::Index i = 0; i < e1.size(); ++i)
    for (Eigen::Index j = 0; j < e2.size(); ++j) sums.push_back(e1(i) + e2(j) + 0.25);
  std::sort(sums.begin(), sums.end());
  ASSERT_EQ(static_cast<Eigen::Index>(sums.size()), e.size());
  for (std::size_t k = 0; k < sums.size(); ++k) EXPECT_NEAR(e(k), sums[k], 1e-10);
}

TEST(CornerMode, FreeCornerEigenvaluesNearRay) {
  const CutoffProfile p;
  CornerModel m{circle_cross_section(1, 1.0), make_grid(8.0, 30, BoundaryCondition::Neumann),
                make_grid(8.0, 30, BoundaryCondition::Neumann), p, CornerPotential{},
                PotentialProfile(), PotentialProfile()};
  const DilationParameter th({0.4, 0.2});
  const auto e = eigenvalues(assemble_corner_mode(th, 0.0, m).dense());
  std::vector<cplx> small(e);
  std::sort(small.begin(), small.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  for (int k = 0; k < 10; ++k) EXPECT_LT(ray_distance(small[k], 0.0, th.prime()), 0.05);
}

// A 2D well below the thresholds gives an eigenvalue off every ray, stable in theta.
TEST(CornerMode, WellEigenvalueStableInTheta) {
  const CutoffProfile p;
  CornerModel m{circle_cross_section(1, 1.0), make_grid(8.0, 30, BoundaryCondition::Neumann),
                make_grid(8.0, 30, BoundaryCondition::Neumann), p,
                CornerPotential{8.0, 0.3, 0.3, 0.6, 1.8}, PotentialProfile(), PotentialProfile()};
  auto lowest_off_ray = [&](cplx theta) {
    const DilationParameter th(theta);
    const auto e = eigenvalues(assemble_corner_mode(th, 0.0, m).dense());
    const RayFamily rays = predict_essential(th, m.cross_section);
    const auto cls = classify_spectrum(e, rays, 0.05);
    EXPECT_FALSE(cls.discrete.empty());
    return cls.discrete.front().value;
  };
  const cplx a = lowest_off_ray({0.4, 0.2});
  const cplx b = lowest_off_ray({0.45, 0.15});
  EXPECT_LT(a.real(), 0.0);
  EXPECT_LT(std::abs(a - b), 1e-4);
}

TEST(Dilation, IdentityAtZero) {
  const auto g = make_grid(10.0, 99, BoundaryCondition::Neumann);
  const VectorXc f = VectorXc::Random(g.n());
  EXPECT_EQ((discrete_dilation(0.0, f, g) - f).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dilation, UntouchedBelowK) {
  const CutoffProfile p;
  const auto g = make_grid(10.0, 199, BoundaryCondition::Neumann);
  VectorXc f = VectorXc::Zero(g.n());
  for (int j = 0; j < g.n(); ++j) {
    if (g.node(j) < 1.5) f(j) = std::sin(g.node(j));
  }
  const VectorXc uf = discrete_dilation(0.5, f, g, p);
  EXPECT_EQ((uf - f).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dilation, PreservesNorm) {
  const auto g = make_grid(20.0, 800, BoundaryCondition::Neumann);
  const VectorXc f = sample([](double u) { return cplx(std::exp(-(u - 6) * (u - 6))); }, g);
  const VectorXc uf = discrete_dilation(0.5, f, g);
  EXPECT_NEAR(grid_norm(uf, g.h()) / grid_norm(f, g.h()), 1.0, 5e-3);
  EXPECT_THROW(discrete_dilation(cplx(0.4, 0.2), f, g), ComplexThetaError);
}

TEST(Conjugation, ZeroAtThetaZero) {
  const auto g = make_grid(16.0, 400, BoundaryCondition::Neumann);
  EXPECT_EQ(conjugation_residual(0.0, g, 0.0, PotentialProfile()), 0.0);
}

TEST(Conjugation, SecondOrderDecay) {
  const auto v = gaussian_well(2.0, 0.6, 0.3, 1.5);
  const double r1 = conjugation_residual(0.3, make_grid(16.0, 400, BoundaryCondition::Neumann), 1.0, v);
  const double r2 = conjugation_residual(0.3, make_grid(16.0, 800, BoundaryCondition::Neumann), 1.0, v);
  EXPECT_LT(r1, 1e-2);
  EXPECT_LT(r2, 3e-3);
  EXPECT_GE(std::log2(r1 / r2), 1.7);
}

TEST(Conjugation, InteriorFunctionsContributeNothing) {
  const auto g = make_grid(16.0, 400, BoundaryCondition::Neumann);
  auto f = [](double u) { return cplx(std::exp(-std::pow((u - 0.9) / 0.12, 2))); };
  EXPECT_LT(conjugation_residual_for(0.3, g, 0.0, PotentialProfile(), f), 1e-12);
}

TEST(Triplets, RoundTrip) {
  const auto g = make_grid(8.0, 30, BoundaryCondition::Neumann);
  const auto A = assemble_cyl_mode(DilationParameter({0.4, 0.2}), 1.0, g, PotentialProfile());
  std::stringstream ss;
  write_triplets(ss, A.matrix);
  const std::string first = ss.str();
  EXPECT_EQ(first.rfind("row,col,re,im\n", 0), 0u);
  const SparseC B = read_triplets(ss, g.n());
  EXPECT_EQ((MatrixXc(B) - A.dense()).cwiseAbs().maxCoeff(), 0.0);
  std::stringstream again;
  write_triplets(again, B);
  EXPECT_EQ(again.str(), first);
}
