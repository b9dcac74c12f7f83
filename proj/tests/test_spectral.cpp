#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "cscale/assembly.hpp"
#include "cscale/spectral.hpp"

using namespace cscale;

namespace {

constexpr double kPi = std::numbers::pi;

MatrixXc random_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  MatrixXc A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(d(rng), d(rng));
  return A;
}

}  // namespace

TEST(Rays, Distance) {
  const cplx dir = std::polar(0.7, -0.3);
  EXPECT_EQ(ray_distance(cplx(1, 2), cplx(1, 2), dir), 0.0);
  EXPECT_LT(ray_distance(cplx(1, 2) + 5.0 * dir, cplx(1, 2), dir), 1e-14);
  EXPECT_NEAR(ray_distance(cplx(-3, 4), 0.0, 1.0), 5.0, 1e-15);
  EXPECT_NEAR(ray_distance(cplx(2, 3), 0.0, 1.0), 3.0, 1e-15);
  EXPECT_NEAR(ray_parameter(cplx(2, 3), 0.0, 2.0), 1.0, 1e-15);
  EXPECT_EQ(ray_parameter(cplx(-2, 3), 0.0, 2.0), 0.0);
}

TEST(Rays, RealThetaRaysAreRealHalfLines) {
  const auto f = predict_essential(DilationParameter(0.5), circle_cross_section(5, 1.0));
  EXPECT_EQ(f.direction.imag(), 0.0);
  EXPECT_GT(f.direction.real(), 0.0);
  for (cplx o : f.origins) EXPECT_EQ(o.imag(), 0.0);
  EXPECT_EQ(ray_distance(cplx(0.3), f.origins[0], f.direction), 0.0);
}

TEST(Rays, RotatedCircleFamily) {
  // arg(theta + 1) = pi/12 gives arg(theta') = -pi/6
  const cplx theta = std::polar(1.5, kPi / 12) - 1.0;
  ASSERT_TRUE(in_gamma(theta));
  const auto f = predict_essential(DilationParameter(theta), circle_cross_section(5, 1.0));
  EXPECT_NEAR(std::arg(f.direction), -kPi / 6, 1e-14);
  ASSERT_EQ(f.size(), 5u);
  const std::vector<double> o{0, 1, 1, 4, 4};
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(f.origins[k], cplx(o[k]));
    EXPECT_EQ(f.provenance[k], RayOrigin::CrossSectionThreshold);
  }
}

TEST(Rays, CornerAddsEndEigenvalueRay) {
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8);
  const auto g = make_grid(20.0, 2000, BoundaryCondition::Neumann);
  const double gamma = eig_hermitian(assemble_cyl_mode(DilationParameter(0.0), 0.0, g, v).dense()).values(0);
  ASSERT_LT(gamma, 0.0);
  const DilationParameter th({0.4, 0.2});
  const auto cs = circle_cross_section(1, 1.0);
  const auto plain = predict_essential(th, cs);
  const auto none = predict_essential(th, cs, {});
  EXPECT_EQ(none.origins, plain.origins);
  EXPECT_EQ(none.direction, plain.direction);
  const auto corner = predict_essential(th, cs, {{cplx(gamma)}, {}});
  ASSERT_EQ(corner.size(), 2u);
  EXPECT_EQ(corner.origins[1], cplx(gamma));
  EXPECT_EQ(corner.provenance[1], RayOrigin::EndEigenvalue);
  const auto res = predict_essential(th, cs, {{cplx(1.0, -0.1)}});
  EXPECT_EQ(res.provenance[1], RayOrigin::EndResonance);
}

TEST(Classify, OnAndOffRay) {
  const DilationParameter th({0.4, 0.2});
  const auto rays = predict_essential(th, circle_cross_section(3, 1.0));
  std::vector<cplx> on{th.prime() * 2.0, 1.0 + th.prime() * 0.5, cplx(0.0)};
  EXPECT_TRUE(classify_spectrum(on, rays, 1e-9).discrete.empty());
  // the off-ray point is placed below the ray from 0, away from the ray from 1
  const cplx perp = th.prime() * cplx(0, 1) / std::abs(th.prime());
  const cplx off = th.prime() * 0.5 - 0.3 * perp;
  const auto c = classify_spectrum({off, on[0]}, rays, 0.1);
  ASSERT_EQ(c.discrete.size(), 1u);
  EXPECT_EQ(c.discrete[0].value, off);
  EXPECT_GT(c.discrete[0].distance, 0.1);
  EXPECT_EQ(c.ray_bound.size(), 1u);
  EXPECT_THROW(classify_spectrum(on, rays, 0.0), Error);
  EXPECT_NEAR(default_classification_tol(0.1, 4.0), 20 * 0.01 * 5, 1e-15);
}

TEST(Resonances, FreeModelHasNone) {
  const auto g = make_grid(40.0, 400, BoundaryCondition::Neumann);
  const auto cs = circle_cross_section(1, 1.0);
  const DilationParameter ta({0.4, 0.2}), tb({0.45, 0.1});
  const auto ea = eigenvalues(assemble_cyl_mode(ta, 0.0, g, PotentialProfile()).dense());
  const auto eb = eigenvalues(assemble_cyl_mode(tb, 0.0, g, PotentialProfile()).dense());
  const auto m = detect_resonances(ea, ta, eb, tb, predict_essential(ta, cs),
                                   predict_essential(tb, cs), {0.05, 1e-4, 1e-8});
  EXPECT_TRUE(m.empty());
}

TEST(Resonances, WellEigenvalueIsRealMatch) {
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8);
  const auto g = make_grid(20.0, 800, BoundaryCondition::Neumann);
  const auto cs = circle_cross_section(1, 1.0);
  const DilationParameter ta({0.4, 0.2}), tb({0.45, 0.1});
  const auto ea = eigenvalues(assemble_cyl_mode(ta, 0.0, g, v).dense());
  const auto eb = eigenvalues(assemble_cyl_mode(tb, 0.0, g, v).dense());
  const auto m = detect_resonances(ea, ta, eb, tb, predict_essential(ta, cs),
                                   predict_essential(tb, cs), {0.05, 1e-4, 1e-4});
  const double ref = eig_hermitian(assemble_cyl_mode(DilationParameter(0.0), 0.0, g, v).dense()).values(0);
  ASSERT_FALSE(m.empty());
  EXPECT_TRUE(m.front().real);
  EXPECT_NEAR(m.front().value().real(), ref, 1e-4);
}

TEST(Resonances, RealThetaMatchesHermitianPicture) {
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8);
  const auto g = make_grid(8.0, 1599, BoundaryCondition::Neumann);
  const auto cs = circle_cross_section(1, 1.0);
  const DilationParameter th(0.3);
  const auto e = eigenvalues(assemble_cyl_mode(th, 0.0, g, v).dense());
  const auto cls = classify_spectrum(e, predict_essential(th, cs), 1e-3);
  const auto herm = eig_hermitian(assemble_cyl_mode(DilationParameter(0.0), 0.0, g, v).dense()).values;
  std::size_t below = 0;
  for (const auto& d : cls.discrete) {
    if (d.value.real() >= 0.0) continue;
    ++below;
    EXPECT_NEAR(d.value.real(), herm(0), 1e-6);
    EXPECT_LT(std::abs(d.value.imag()), 1e-6);
  }
  EXPECT_EQ(below, 1u);
}

TEST(Resonances, RayBoundEigenvaluesRotateWithTheta) {
  const auto g = make_grid(40.0, 400, BoundaryCondition::Neumann);
  const auto cs = circle_cross_section(1, 1.0);
  for (cplx t : {cplx(0.4, 0.2), cplx(0.45, 0.1)}) {
    const DilationParameter th(t);
    auto e = eigenvalues(assemble_cyl_mode(th, 0.0, g, PotentialProfile()).dense());
    std::sort(e.begin(), e.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    e.resize(8);
    const auto c = classify_spectrum(e, predict_essential(th, cs), 0.05);
    EXPECT_EQ(c.ray_bound.size(), 8u);
    for (const auto& r : c.ray_bound) {
      EXPECT_EQ(r.ray, 0u);
      if (std::abs(r.value) > 0.05) {
        EXPECT_NEAR(std::arg(r.value), std::arg(th.prime()), 0.1);
      }
    }
  }
}

TEST(Ichinose, Diagonal) {
  MatrixXc A = MatrixXc::Zero(2, 2), B = MatrixXc::Zero(2, 2);
  A(0, 0) = 1;
  A(1, 1) = 2;
  B(0, 0) = 10;
  B(1, 1) = 20;
  const auto r = ichinose_sumcheck(A, B);
  EXPECT_EQ(r.predicted, (std::vector<cplx>{11, 12, 21, 22}));
  EXPECT_EQ(r.max_mismatch, 0.0);
  EXPECT_TRUE(r.ok());
}

TEST(Ichinose, RandomSmallPairs) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 20; ++k) {
    const MatrixXc A = random_matrix(3, rng);
    const MatrixXc B = random_matrix(3, rng);
    const auto r = ichinose_sumcheck(A, B);
    EXPECT_LT(r.max_mismatch, 1e-8);
    EXPECT_TRUE(r.ok());
  }
}

TEST(Ichinose, KroneckerLayoutMatchesEigen) {
  std::mt19937_64 rng(1);
  const MatrixXc A = random_matrix(3, rng), B = random_matrix(4, rng);
  const MatrixXc ref = Eigen::kroneckerProduct(A, MatrixXc::Identity(4, 4)).eval() +
                       Eigen::kroneckerProduct(MatrixXc::Identity(3, 3), B).eval();
  EXPECT_LT((kronecker_sum(A, B) - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ichinose, DilatedBlocks) {
  const auto g = make_grid(10.0, 40, BoundaryCondition::Neumann);
  const CutoffProfile p;
  const DilationParameter th({0.4, 0.2});
  const MatrixXc A = MatrixXc(radial_block(th, p, g, gaussian_well(3.0, 0.6, 0.3, 1.5, p)));
  const MatrixXc B = MatrixXc(radial_block(th, p, g, PotentialProfile()));
  const auto r = ichinose_sumcheck(A, B);
  EXPECT_LT(r.max_mismatch, 1e-7);
  EXPECT_TRUE(r.ok());
}

TEST(Sector, PositiveRealSamples) {
  const auto f = sector_search({1.0, 2.0, 0.5}, {0.1, 0.5, 2.0});
  ASSERT_TRUE(f);
  EXPECT_EQ(f->gamma, 0.0);
  EXPECT_EQ(f->k, 2.0);
}

TEST(Sector, QuarterSector) {
  std::vector<cplx> s;
  for (int i = -10; i <= 10; ++i) s.push_back(std::polar(1.0, kPi / 4 * i / 10.0));
  for (double k : {0.25, 0.5, 1.0}) EXPECT_NEAR(minimal_sector_shift(s, k), 0.0, 1e-15);
  const auto f = sector_search(s, {0.5, 1.0}, 0.0);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->k, 1.0);
  EXPECT_NEAR(f->half_angle(), kPi / 4, 1e-15);
  EXPECT_FALSE(sector_search({cplx(-100, 0)}, {1.0}, 10.0));
}

TEST(Sector, DilatedLaplacianForm) {
  const auto g = make_grid(20.0, 200, BoundaryCondition::Neumann);
  const auto A = assemble_cyl_mode(DilationParameter({0.4, 0.2}), 0.0, g, PotentialProfile());
  const MatrixXc M = A.dense();
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d;
  std::vector<cplx> s;
  for (int k = 0; k < 500; ++k) {
    VectorXc f(g.n());
    for (int j = 0; j < g.n(); ++j) f(j) = cplx(d(rng), d(rng));
    f.normalize();
    s.push_back(f.dot(M * f));
  }
  for (cplx z : numerical_range_boundary(M, 64)) s.push_back(z);
  std::vector<double> ks;
  for (int i = 1; i <= 40; ++i) ks.push_back(0.05 * i);
  const auto fit = sector_search(s, ks, 1e3);
  ASSERT_TRUE(fit);
  EXPECT_GE(fit->k, 0.2);
  // more samples never allow a larger k
  std::vector<cplx> fewer(s.begin(), s.begin() + 100);
  EXPECT_GE(sector_search(fewer, ks, 1e3)->k, fit->k);
}

TEST(Sector, EdgeSupportPointsGiveExactShift) {
  // a random nonnormal matrix: the shift from edge support points bounds
  // every point of a much denser boundary
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  MatrixXc M(30, 30);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) M(i, j) = cplx(d(rng), d(rng));
  M += 20.0 * MatrixXc::Identity(30, 30);
  const std::vector<double> ks{0.5, 1.0, 2.0};
  const auto edges = numerical_range_support(M, sector_edge_angles(ks));
  ASSERT_EQ(edges.size(), 6u);
  const auto dense = numerical_range_boundary(M, 4096);
  for (double k : ks) {
    const double g = minimal_sector_shift(edges, k);
    EXPECT_GE(g + 1e-9, minimal_sector_shift(dense, k)) << k;
  }
}

TEST(Holomorphy, ConstantAndConjugate) {
  EXPECT_LT(holomorphy_check([](cplx) { return cplx(3.0, 1.0); }, {0.4, 0.1}, 0.05, 32), 1e-15);
  const double r = holomorphy_check([](cplx t) { return std::conj(t); }, {0.4, 0.1}, 0.05, 32);
  EXPECT_GT(r, 0.1);
  EXPECT_THROW(holomorphy_check([](cplx t) { return t; }, 0.4, 0.05, 8), InvalidSizeError);
}

TEST(Holomorphy, QuadraticFormInTheta) {
  const auto g = make_grid(10.0, 99, BoundaryCondition::Neumann);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  VectorXc f(g.n()), h(g.n());
  for (int j = 0; j < g.n(); ++j) {
    f(j) = cplx(d(rng), d(rng));
    h(j) = cplx(d(rng), d(rng));
  }
  auto fn = [&](cplx t) {
    const auto A = assemble_cyl_mode(DilationParameter(t), 0.0, g, PotentialProfile());
    return grid_inner(A.matrix * f, h, g.h());
  };
  EXPECT_LT(holomorphy_check(fn, {0.4, 0.1}, 0.05, 32), 1e-8);
}

TEST(EndSpectrum, WellShiftedByThresholds) {
  const auto v = gaussian_well(8.0, 0.8, 0.4, 1.8);
  const auto g = make_grid(20.0, 600, BoundaryCondition::Neumann);
  const auto cs = circle_cross_section(3, 1.0);
  const CutoffProfile p;
  const auto pts = end_point_spectrum(DilationParameter({0.4, 0.2}), p, g, v, cs, 0.05);
  const double ref = eig_hermitian(assemble_cyl_mode(DilationParameter(0.0), 0.0, g, v).dense()).values(0);
  ASSERT_GE(pts.size(), 3u);
  EXPECT_NEAR(pts[0].real(), ref, 1e-4);
  EXPECT_EQ(pts[0].imag(), 0.0);
  EXPECT_NEAR(pts[1].real(), ref + 1.0, 1e-4);
  EXPECT_NEAR(pts[2].real(), ref + 1.0, 1e-4);
}
