#include <gtest/gtest.h>

#include <numbers>

#include "kendama/rng.hpp"
#include "kendama/sets.hpp"
#include "support/oracles.hpp"

using namespace kendama;
using sets::Box;
using sets::HPolytope;
using sets::Mat2;
using sets::Vec2;
using sets::Zonotope;

namespace {

std::vector<Vec2> gens_of(const Zonotope& z) {
  std::vector<Vec2> out;
  for (Eigen::Index i = 0; i < z.order(); ++i) out.push_back(z.generators().col(i));
  return out;
}

oracle::Points hull_of(const Zonotope& z) { return oracle::zonotope_hull(z.center(), gens_of(z)); }

Zonotope random_zonotope(rng::Engine& g, int max_gens = 4) {
  const int m = 1 + static_cast<int>(rng::uniform01(g) * max_gens);
  auto gens = oracle::random_generators(g, m, 1.0);
  sets::Generators G(2, m);
  for (int i = 0; i < m; ++i) G.col(i) = gens[static_cast<std::size_t>(i)];
  return Zonotope(Vec2(rng::uniform(g, -0.5, 0.5), rng::uniform(g, -0.5, 0.5)), G);
}

Mat2 random_schur(rng::Engine& g) {
  for (;;) {
    Mat2 A;
    A << rng::uniform(g, -1, 1), rng::uniform(g, -1, 1), rng::uniform(g, -1, 1), rng::uniform(g, -1, 1);
    const double rho = sets::spectral_radius(A);
    if (rho > 1e-3 && rho < 0.9) return A;
  }
}

}  // namespace

TEST(Box, EmptinessAndVolume) {
  EXPECT_FALSE(Box::symmetric(Vec2(1, 2)).is_empty());
  EXPECT_TRUE(Box(Vec2(0, 0), Vec2(-1, 1)).is_empty());
  EXPECT_DOUBLE_EQ(Box::symmetric(Vec2(1, 2)).volume(), 8.0);
  EXPECT_DOUBLE_EQ(Box(Vec2(0, 0), Vec2(-1, 1)).volume(), 0.0);
}

TEST(Box, ConvertsToFourRowPolytope) {
  const HPolytope h(Box(Vec2(-1, -2), Vec2(3, 4)));
  EXPECT_EQ(h.rows(), 4);
  EXPECT_EQ(h.vertices().size(), 4u);
  EXPECT_TRUE(h.contains(Vec2(3, 4)));
  EXPECT_FALSE(h.contains(Vec2(3.001, 0)));
}

TEST(MinkowskiSum, SymmetricBoxes) {
  const Zonotope s = sets::minkowski_sum(Zonotope(Box::symmetric(Vec2(1, 1))), Zonotope(Box::symmetric(Vec2(1, 1))));
  const Box bb = s.bounding_box();
  EXPECT_NEAR(bb.lo.x(), -2, 1e-12);
  EXPECT_NEAR(bb.hi.y(), 2, 1e-12);
  EXPECT_EQ(hull_of(s).size(), 4u);
}

TEST(MinkowskiSum, ConcatenatesGenerators) {
  const Zonotope a(Vec2(1, 0), sets::Generators((sets::Generators(2, 1) << 1, 0).finished()));
  const Zonotope b(Vec2(0, 1), sets::Generators((sets::Generators(2, 1) << 0, 2).finished()));
  const Zonotope s = sets::minkowski_sum(a, b);
  EXPECT_TRUE(s.center().isApprox(Vec2(1, 1)));
  ASSERT_EQ(s.order(), 2);
  EXPECT_TRUE(s.generators().col(0).isApprox(Vec2(1, 0)));
  EXPECT_TRUE(s.generators().col(1).isApprox(Vec2(0, 2)));
}

TEST(MinkowskiSum, MatchesVertexSumHullOnGrid) {
  rng::Engine g = rng::make_engine(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Zonotope a = random_zonotope(g), b = random_zonotope(g);
    const Zonotope s = sets::minkowski_sum(a, b);
    const auto ref = oracle::vertex_sums(hull_of(a), hull_of(b));
    const auto [lo, hi] = oracle::bounds(ref);
    for (const auto& x : oracle::grid(lo - Vec2(0.2, 0.2), hi + Vec2(0.2, 0.2), 100)) {
      ASSERT_EQ(sets::contains(s, x), oracle::in_hull(ref, x)) << "trial " << trial;
    }
  }
}

TEST(MinkowskiSum, CommutativeAndAssociativeOnGrid) {
  rng::Engine g = rng::make_engine(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Zonotope a = random_zonotope(g), b = random_zonotope(g), c = random_zonotope(g);
    const Zonotope ab = sets::minkowski_sum(a, b), ba = sets::minkowski_sum(b, a);
    const Zonotope l = sets::minkowski_sum(ab, c), r = sets::minkowski_sum(a, sets::minkowski_sum(b, c));
    for (const auto& x : oracle::grid(Vec2(-4, -4), Vec2(4, 4), 60)) {
      EXPECT_EQ(sets::contains(ab, x), sets::contains(ba, x));
      EXPECT_EQ(sets::contains(l, x), sets::contains(r, x));
    }
  }
}

TEST(PontryaginDiff, BoxMinusBox) {
  const HPolytope d = sets::pontryagin_diff(HPolytope(Box::symmetric(Vec2(2, 2))), Box::symmetric(Vec2(1, 1)));
  const Box bb = d.bounding_box();
  EXPECT_NEAR(bb.lo.x(), -1, 1e-12);
  EXPECT_NEAR(bb.hi.x(), 1, 1e-12);
  EXPECT_NEAR(bb.lo.y(), -1, 1e-12);
  EXPECT_NEAR(bb.hi.y(), 1, 1e-12);
}

TEST(PontryaginDiff, OriginIsIdentity) {
  const HPolytope X(Box(Vec2(-1, -0.5), Vec2(2, 3)));
  const HPolytope d = sets::pontryagin_diff(X, Zonotope::point(Vec2::Zero()));
  EXPECT_TRUE(d.H().isApprox(X.H()));
  EXPECT_TRUE(d.h().isApprox(X.h()));
}

TEST(PontryaginDiff, ZonotopeInnerAgreesWithGridOracle) {
  sets::Generators G(2, 2);
  G << 1, 0.5, 0, 0.5;
  const Zonotope inner(Vec2::Zero(), G);
  const Box outer_box = Box::symmetric(Vec2(1, 1));
  const HPolytope d = sets::pontryagin_diff(HPolytope(outer_box), inner);
  const auto outer = oracle::box_corners(outer_box.lo, outer_box.hi);
  const auto in = hull_of(inner);
  for (const auto& x : oracle::grid(Vec2(-1.2, -1.2), Vec2(1.2, 1.2), 100)) {
    ASSERT_EQ(d.contains(x), oracle::in_pontryagin(outer, in, x)) << x.transpose();
  }
}

TEST(PontryaginDiff, EmptyResultIsFlagged) {
  const HPolytope d = sets::pontryagin_diff(HPolytope(Box::symmetric(Vec2(1, 1))), Box::symmetric(Vec2(2, 0.1)));
  EXPECT_TRUE(d.is_empty());
  EXPECT_FALSE(d.interior_point().has_value());
}

TEST(PontryaginDiff, DiffThenSumStaysInside) {
  rng::Engine g = rng::make_engine(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Zonotope outer_z = random_zonotope(g, 5);
    sets::Generators small = 0.2 * random_zonotope(g, 2).generators();
    const Zonotope inner(Vec2::Zero(), small);
    const HPolytope X = sets::to_hpolytope(outer_z);
    const HPolytope d = sets::pontryagin_diff(X, inner);
    if (d.is_empty()) continue;
    for (const auto& v : d.vertices()) {
      for (const auto& w : hull_of(inner)) EXPECT_TRUE(X.contains(v + w, 1e-8));
    }
  }
}

TEST(LinearMap, IdentityAndScaling) {
  const Zonotope z(Box::symmetric(Vec2(2, 2)));
  const Zonotope same = sets::linear_map(Mat2::Identity(), z);
  EXPECT_TRUE(same.center().isApprox(z.center()));
  EXPECT_TRUE(same.generators().isApprox(z.generators()));
  const Box half = sets::linear_map(0.5 * Mat2::Identity(), z).bounding_box();
  EXPECT_NEAR(half.hi.x(), 1, 1e-12);
  EXPECT_NEAR(half.lo.y(), -1, 1e-12);
}

TEST(LinearMap, RotationMatchesRotatedVertices) {
  const Box b(Vec2(-1, -1), Vec2(2, 1));
  Mat2 R;
  R << 0, -1, 1, 0;
  const sets::ConvexSet mapped = sets::linear_map(R, sets::ConvexSet(b));
  const auto got = oracle::convex_hull(std::get<Zonotope>(mapped).vertices());
  const auto want = oracle::mapped(R, oracle::box_corners(b.lo, b.hi));
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT((got[i] - want[i]).norm(), 1e-12);
}

TEST(LinearMap, RandomMapsAgreeWithVertexTransform) {
  rng::Engine g = rng::make_engine(14);
  for (int trial = 0; trial < 40; ++trial) {
    const Zonotope z = random_zonotope(g);
    Mat2 M;
    M << rng::uniform(g, -2, 2), rng::uniform(g, -2, 2), rng::uniform(g, -2, 2), rng::uniform(g, -2, 2);
    const Zonotope mz = sets::linear_map(M, z);
    const auto ref = oracle::mapped(M, hull_of(z));
    const auto [lo, hi] = oracle::bounds(ref);
    for (const auto& x : oracle::grid(lo - Vec2(0.3, 0.3), hi + Vec2(0.3, 0.3), 50)) {
      ASSERT_EQ(sets::contains(mz, x), oracle::in_hull(ref, x));
    }
  }
}

TEST(LinearMap, InvertibleMapOfPolytopeStaysPolytope) {
  Mat2 M;
  M << 2, 1, 0, 1;
  const sets::ConvexSet out = sets::linear_map(M, sets::ConvexSet(HPolytope(Box::symmetric(Vec2(1, 1)))));
  ASSERT_TRUE(std::holds_alternative<HPolytope>(out));
  const auto ref = oracle::mapped(M, oracle::box_corners(Vec2(-1, -1), Vec2(1, 1)));
  for (const auto& x : oracle::grid(Vec2(-4, -2), Vec2(4, 2), 60)) {
    EXPECT_EQ(sets::contains(out, x), oracle::in_hull(ref, x));
  }
}

TEST(Rpi, NilpotentGivesDisturbanceSet) {
  const Box D = Box::symmetric(Vec2(0.3, 0.1));
  const Zonotope R = sets::rpi_outer_approx(Mat2::Zero(), D);
  const Box bb = R.bounding_box();
  EXPECT_NEAR(bb.hi.x(), 0.3, 1e-12);
  EXPECT_NEAR(bb.hi.y(), 0.1, 1e-12);
}

TEST(Rpi, DiagonalMatchesGeometricSeries) {
  const double tol = 1e-4;
  const Zonotope R = sets::rpi_outer_approx(0.5 * Mat2::Identity(), Box::symmetric(Vec2(1, 1)), {tol, 2000});
  const Box bb = R.bounding_box();
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE(bb.hi(k), 2.0 + tol);
    EXPECT_GE(bb.hi(k), 2.0 - 1e-12);
    EXPECT_GE(-bb.lo(k), 2.0 - 1e-12);
  }
}

TEST(Rpi, SampledInvariance) {
  rng::Engine g = rng::make_engine(15);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat2 A = random_schur(g);
    const Box D = Box::symmetric(Vec2(rng::uniform(g, 0.01, 1), rng::uniform(g, 0.01, 1)));
    const Zonotope R = sets::rpi_outer_approx(A, D);
    const HPolytope Rh = sets::to_hpolytope(R);
    const auto gens = gens_of(R);
    for (int s = 0; s < 10000; ++s) {
      Vec2 x = R.center();
      for (const auto& gi : gens) x += (s % 7 == 0 ? (rng::uniform01(g) < 0.5 ? -1.0 : 1.0) : rng::uniform(g, -1, 1)) * gi;
      const Vec2 d(rng::uniform(g, D.lo.x(), D.hi.x()), rng::uniform(g, D.lo.y(), D.hi.y()));
      ASSERT_TRUE(Rh.contains(A * x + d)) << "trial " << trial;
    }
  }
}

TEST(Rpi, RejectsUnstableAndSlowSystems) {
  EXPECT_THROW(sets::rpi_outer_approx(1.01 * Mat2::Identity(), Box::symmetric(Vec2(1, 1))), std::invalid_argument);
  EXPECT_THROW(sets::rpi_outer_approx(0.999 * Mat2::Identity(), Box::symmetric(Vec2(1, 1)), {1e-9, 5}),
               sets::NoConvergence);
}

TEST(Contains, OriginOutsideAndInequalityOracle) {
  rng::Engine g = rng::make_engine(16);
  const Zonotope z = random_zonotope(g, 5);
  const Zonotope zc(Vec2::Zero(), z.generators());
  EXPECT_TRUE(sets::contains(zc, Vec2::Zero()));
  const Box bb = zc.bounding_box();
  EXPECT_FALSE(sets::contains(zc, bb.hi + Vec2(1e-6, 0)));
  const HPolytope h = sets::to_hpolytope(zc);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 x(rng::uniform(g, bb.lo.x() - 0.1, bb.hi.x() + 0.1), rng::uniform(g, bb.lo.y() - 0.1, bb.hi.y() + 0.1));
    const bool direct = ((h.H() * x - h.h()).array() <= 1e-9).all();
    EXPECT_EQ(h.contains(x), direct);
    EXPECT_EQ(sets::contains(zc, x), direct);
  }
}

TEST(Subset, SupportFunctionCheck) {
  EXPECT_TRUE(sets::is_subset(Box::symmetric(Vec2(1, 1)), Box::symmetric(Vec2(1, 1))));
  EXPECT_FALSE(sets::is_subset(Box::symmetric(Vec2(1.1, 1)), Box::symmetric(Vec2(1, 1))));
  sets::Generators G(2, 2);
  G << 0.5, 0.5, 0.5, -0.5;
  EXPECT_TRUE(sets::is_subset(Zonotope(Vec2::Zero(), G), Box::symmetric(Vec2(1, 1))));
}

TEST(Json, RoundTripsEveryType) {
  sets::Generators G(2, 2);
  G << 1, 0.2, 0, 0.3;
  const std::vector<sets::ConvexSet> cases{Box(Vec2(-1, -2), Vec2(1, 0.5)), Zonotope(Vec2(0.1, 0.2), G),
                                           HPolytope(Box::symmetric(Vec2(2, 1)))};
  for (const auto& s : cases) {
    const sets::ConvexSet back = sets::convex_set_from_json(sets::to_json(s));
    EXPECT_EQ(sets::type_name(back), sets::type_name(s));
    for (const auto& x : oracle::grid(Vec2(-3, -3), Vec2(3, 3), 30)) EXPECT_EQ(sets::contains(back, x), sets::contains(s, x));
  }
  EXPECT_THROW(sets::convex_set_from_json({{"type", "circle"}}), std::exception);
}
