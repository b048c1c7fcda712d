#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "toricflow/polytope.hpp"

using namespace toricflow;

namespace {

Rational q(long long a, long long b = 1) { return Rational(a) / Rational(b); }

// Monte Carlo estimates of volume and first moment by rejection sampling in
// the bounding box, with standard errors.
struct McEstimate {
  double volume, volume_se;
  std::vector<double> moment, moment_se;
};

McEstimate monte_carlo(const ReflexivePolytope& p, int samples, unsigned seed) {
  const int n = p.dimension();
  auto [lo, hi] = p.integer_bounding_box();
  double box = 1;
  for (int a = 0; a < n; ++a) box *= double(hi[a] - lo[a]);
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> u;
  for (int a = 0; a < n; ++a) u.emplace_back(double(lo[a]), double(hi[a]));
  double s0 = 0, s0sq = 0;
  std::vector<double> s1(n, 0), s1sq(n, 0);
  std::vector<double> x(n);
  for (int k = 0; k < samples; ++k) {
    for (int a = 0; a < n; ++a) x[a] = u[a](rng);
    bool in = true;
    for (const auto& f : p.facets()) {
      double l = f.offset;
      for (int a = 0; a < n; ++a) l += f.normal[a] * x[a];
      if (l < 0) in = false;
    }
    double v = in ? box : 0.0;
    s0 += v;
    s0sq += v * v;
    for (int a = 0; a < n; ++a) {
      s1[a] += v * x[a];
      s1sq[a] += v * x[a] * v * x[a];
    }
  }
  McEstimate e;
  double N = samples;
  e.volume = s0 / N;
  e.volume_se = std::sqrt((s0sq / N - e.volume * e.volume) / N);
  for (int a = 0; a < n; ++a) {
    double m = s1[a] / N;
    e.moment.push_back(m);
    e.moment_se.push_back(std::sqrt((s1sq[a] / N - m * m) / N));
  }
  return e;
}

}  // namespace

TEST(Polytope, IntervalValidates) {
  auto p = builtin("cp1");
  auto rep = validate(p);
  EXPECT_TRUE(rep.passed());
  ASSERT_EQ(p.vertices().size(), 2u);
  EXPECT_EQ(p.vertices()[0][0], -1);
  EXPECT_EQ(p.vertices()[1][0], 1);
}

TEST(Polytope, SimplexVerticesAndDeterminants) {
  auto p = builtin("cp2");
  auto rep = validate(p);
  EXPECT_TRUE(rep.passed());
  std::vector<RationalVector> expected = {{-1, -1}, {2, -1}, {-1, 2}};
  ASSERT_EQ(p.vertices().size(), 3u);
  for (const auto& v : expected)
    EXPECT_NE(std::find(p.vertices().begin(), p.vertices().end(), v), p.vertices().end());
  // Hand check: each pair of normals among (1,0),(0,1),(-1,-1) has det +-1.
  EXPECT_EQ(1 * 1 - 0 * 0, 1);
  EXPECT_EQ(0 * -1 - 1 * -1, 1);
  EXPECT_EQ(-1 * 0 - -1 * 1, 1);
}

TEST(Polytope, OffsetTwoFailsReflexivity) {
  ReflexivePolytope p(2, {{{1, 0}, 2}, {{0, 1}, 1}, {{-1, 0}, 1}, {{0, -1}, 1}});
  auto rep = validate(p);
  EXPECT_FALSE(rep.reflexive);
  EXPECT_TRUE(rep.delzant);
  EXPECT_TRUE(rep.origin_interior);
  EXPECT_FALSE(rep.passed());
}

TEST(Polytope, NonDelzantDetected) {
  // Normals (1,0), (-1,2), (-1,-2): vertex determinants 2, 2 and 4.
  ReflexivePolytope p(2, {{{1, 0}, 1}, {{-1, 2}, 1}, {{-1, -2}, 1}});
  auto rep = validate(p);
  EXPECT_FALSE(rep.delzant);
}

TEST(Polytope, RedundantFacetRaisesStructuralError) {
  try {
    ReflexivePolytope(2, {{{1, 0}, 1}, {{0, 1}, 1}, {{-1, 0}, 1}, {{0, -1}, 1}, {{1, 0}, 5}});
    FAIL();
  } catch (const StructuralError& e) {
    EXPECT_EQ(e.index(), 4u);
    EXPECT_EQ(e.kind(), StructuralError::Kind::kFacet);
  }
}

TEST(Polytope, UnboundedAndUnsupported) {
  EXPECT_THROW(ReflexivePolytope(2, {{{1, 0}, 1}, {{0, 1}, 1}, {{1, 1}, 1}}), DegeneracyError);
  EXPECT_THROW(ReflexivePolytope(1, {{{1}, 1}}), DegeneracyError);
  EXPECT_THROW(ReflexivePolytope(3, {{{1, 0, 0}, 1}}), UnsupportedDimensionError);
  EXPECT_THROW(ReflexivePolytope(2, {{{1, 0}, -1}, {{-1, 0}, -1}, {{0, 1}, 1}, {{0, -1}, 1}}),
               DegeneracyError);
}

TEST(Polytope, InconsistentVertexListNamesVertex) {
  std::istringstream in("dimension 1\nfacet 1 1\nfacet -1 1\nvertex -1\nvertex 2\n");
  try {
    read_polytope(in);
    FAIL();
  } catch (const StructuralError& e) {
    EXPECT_EQ(e.kind(), StructuralError::Kind::kVertex);
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(Polytope, MomentsInterval) {
  auto m = moments(builtin("cp1"));
  EXPECT_EQ(m.volume, 2);
  EXPECT_EQ(m.boundary_volume, 2);
  EXPECT_EQ(m.barycenter()[0], 0);
}

TEST(Polytope, MomentsSimplex) {
  auto m = moments(builtin("cp2"));
  EXPECT_EQ(m.volume, q(9, 2));
  EXPECT_EQ(m.boundary_volume, 9);
  EXPECT_EQ(m.barycenter(), (RationalVector{0, 0}));
}

TEST(Polytope, ReflexiveIdentityOnAllBuiltins) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    EXPECT_TRUE(validate(p).passed()) << name;
    auto m = moments(p);
    EXPECT_EQ(m.boundary_volume, Rational(p.dimension()) * m.volume) << name;
  }
}

TEST(Polytope, MomentsMatchMonteCarlo) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    auto m = moments(p);
    auto e = monte_carlo(p, 1'000'000, 17);
    EXPECT_LE(std::abs(e.volume - to_double(m.volume)), 3 * e.volume_se) << name;
    for (int a = 0; a < p.dimension(); ++a)
      EXPECT_LE(std::abs(e.moment[a] - to_double(m.first_moment[a])), 3 * e.moment_se[a] + 1e-12)
          << name << " axis " << a;
  }
}

TEST(Polytope, BoundaryMomentsByHand) {
  // dp1: edges (-1,-1)->(2,-1) length 3, (2,-1)->(0,1) length 2,
  // (0,1)->(-1,1) length 1, (-1,1)->(-1,-1) length 2; sum of length*midpoint.
  auto m = moments(builtin("dp1"));
  RationalVector expected = {3 * q(1, 2) + 2 * q(1) + 1 * q(-1, 2) + 2 * q(-1),
                             3 * q(-1) + 2 * q(0) + 1 * q(1) + 2 * q(0)};
  EXPECT_EQ(m.boundary_volume, 8);
  EXPECT_EQ(m.boundary_first_moment, expected);
}

TEST(Donaldson, ConstantVanishes) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    RationalVector zero(p.dimension(), Rational(0));
    EXPECT_EQ(donaldson_functional(p, PiecewiseLinearConvex::affine(zero, 1)), 0) << name;
  }
}

TEST(Donaldson, AbsoluteValueOnInterval) {
  auto p = builtin("cp1");
  PiecewiseLinearConvex absx({{{1}, 0}, {{-1}, 0}});
  EXPECT_EQ(donaldson_functional(p, absx), 1);
  EXPECT_EQ(donaldson_functional(p, PiecewiseLinearConvex::affine({1})), 0);
}

TEST(Donaldson, CreaseOnIntervalClosedForm) {
  auto p = builtin("cp1");
  for (int j = -7; j <= 7; ++j) {
    Rational c = q(j, 8);
    Rational expected = (1 - c) - (1 - c) * (1 - c) / 2;
    EXPECT_EQ(donaldson_functional(p, PiecewiseLinearConvex::crease({1}, c)), expected);
  }
}

TEST(Donaldson, InteriorFormAgrees) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    const int n = p.dimension();
    std::vector<PiecewiseLinearConvex> fs;
    if (n == 1) {
      fs.push_back(PiecewiseLinearConvex::crease({1}, q(1, 3)));
      fs.push_back(PiecewiseLinearConvex({{{2}, 0}, {{-1}, q(1, 5)}, {{0}, q(1, 7)}}));
    } else {
      fs.push_back(PiecewiseLinearConvex::crease({1, 2}, q(1, 3)));
      fs.push_back(PiecewiseLinearConvex({{{1, 0}, 0}, {{0, 1}, 0}, {{-1, -1}, 0}}));
      fs.push_back(PiecewiseLinearConvex({{{2, -1}, q(1, 4)}, {{-1, 3}, q(-1, 2)}, {{0, 0}, 0}}));
    }
    for (const auto& f : fs)
      EXPECT_EQ(donaldson_functional(p, f), donaldson_functional_interior_form(p, f)) << name;
  }
}

TEST(Donaldson, LinearUnderAffineAddition) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    const int n = p.dimension();
    RationalVector a = n == 1 ? RationalVector{q(3, 2)} : RationalVector{q(1, 3), q(-2, 5)};
    RationalVector dir = n == 1 ? RationalVector{1} : RationalVector{1, -1};
    auto f = PiecewiseLinearConvex::crease(dir, q(1, 4));
    Rational lhs = donaldson_functional(p, f.plus_affine(a, q(7, 3)));
    Rational rhs = donaldson_functional(p, f) +
                   donaldson_functional(p, PiecewiseLinearConvex::affine(a, q(7, 3)));
    EXPECT_EQ(lhs, rhs) << name;
    EXPECT_EQ(donaldson_functional(p, PiecewiseLinearConvex::affine(a, q(7, 3))),
              detail::dot(futaki_character(p), a))
        << name;
  }
}

TEST(Futaki, ZeroAndNonzeroCases) {
  for (const char* name : {"cp1", "cp2", "cp1xcp1", "dp3"}) EXPECT_TRUE(is_zero(futaki_character(builtin(name)))) << name;
  for (const char* name : {"dp1", "dp2"}) EXPECT_FALSE(is_zero(futaki_character(builtin(name)))) << name;
}

TEST(Futaki, EqualsMomentDefect) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    auto m = moments(p);
    auto fut = futaki_character(p);
    for (int a = 0; a < p.dimension(); ++a)
      EXPECT_EQ(fut[a], m.boundary_first_moment[a] - Rational(p.dimension()) * m.first_moment[a]) << name;
  }
}

TEST(Futaki, Dp1ExactValue) {
  // First moment of dp1 from the fan at (-1,-1): triangles [(-1,-1),(2,-1),(0,1)] area 3 centroid
  // (1/3,-1/3), [(-1,-1),(0,1),(-1,1)] area 1 centroid (-2/3,1/3).
  RationalVector fm = {3 * q(1, 3) + 1 * q(-2, 3), 3 * q(-1, 3) + 1 * q(1, 3)};
  auto m = moments(builtin("dp1"));
  EXPECT_EQ(m.first_moment, fm);
  RationalVector fut = {m.boundary_first_moment[0] - 2 * fm[0], m.boundary_first_moment[1] - 2 * fm[1]};
  EXPECT_EQ(futaki_character(builtin("dp1")), fut);
  EXPECT_EQ(fut, (RationalVector{q(1, 3), q(-2, 3)}));
}

TEST(PolytopeFile, RoundTripAllBuiltins) {
  for (const auto& name : builtin_names()) {
    auto p = builtin(name);
    std::ostringstream out;
    write_polytope(out, p);
    std::istringstream in(out.str());
    auto back = read_polytope(in);
    EXPECT_EQ(back.name(), name);
    EXPECT_EQ(back.vertices(), p.vertices());
    EXPECT_EQ(back.facets().size(), p.facets().size());
  }
}

TEST(PolytopeFile, ParseErrorsCarryLine) {
  std::istringstream in("# header\ndimension 2\nfacet 1 0\n");
  try {
    read_polytope(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream junk("dimension 1\nbogus 3\n");
  EXPECT_THROW(read_polytope(junk), ParseError);
  std::istringstream rat("dimension 1\nfacet 1 1\nfacet -1 1\nvertex -2/2\nvertex 1\n");
  EXPECT_NO_THROW(read_polytope(rat));
}
