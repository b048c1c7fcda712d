#include <gtest/gtest.h>

#include <cmath>

#include "toricflow/grid.hpp"

using namespace toricflow;

namespace {

double smooth1(const Vec<1>& x) { return std::exp(0.3 * x[0]) * std::cos(x[0]); }
double smooth2(const Vec<2>& x) { return std::exp(0.3 * x[0] - 0.2 * x[1]) * std::cos(x[0] + 0.5 * x[1]); }

template <int N, class F>
double quad(const QuadratureGrid<N>& g, F f) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.point(i));
  return g.integrate(v);
}

// Reference integral of smooth2 over a polygon by a tensor Gauss rule on a
// fan of triangles (Duffy map), converged far beyond grid accuracy.
double polygon_integral(const ReflexivePolytope& p) {
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  const auto& vs = p.vertices();
  Vec<2> c(0, 0);
  double total = 0;
  for (std::size_t e = 0; e < vs.size(); ++e) {
    Vec<2> a(to_double(vs[e][0]), to_double(vs[e][1]));
    Vec<2> b(to_double(vs[(e + 1) % vs.size()][0]), to_double(vs[(e + 1) % vs.size()][1]));
    // Subdivide each fan triangle into 16 panels in each reference direction.
    const int P = 16;
    double area = 0.5 * std::abs((a - c)[0] * (b - c)[1] - (a - c)[1] * (b - c)[0]);
    for (int pi = 0; pi < P; ++pi)
      for (int pj = 0; pj < P; ++pj)
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            double u = (pi + 0.5 * (gx[i] + 1)) / P, v = (pj + 0.5 * (gx[j] + 1)) / P;
            // Duffy: (u, v) in the unit square -> triangle with Jacobian u.
            Vec<2> x = c + u * ((1 - v) * (a - c) + v * (b - c));
            total += 2 * area * u * smooth2(x) * (0.5 * gw[i] / P) * (0.5 * gw[j] / P);
          }
  }
  return total;
}

}  // namespace

TEST(Grid, IntervalNodeCountAndWeights) {
  QuadratureGrid<1> g(builtin("cp1"), 64);
  EXPECT_EQ(g.size(), 63u);
  EXPECT_DOUBLE_EQ(g.h(), 1.0 / 32);
  double s = 0;
  for (double w : g.weights()) {
    EXPECT_GT(w, 0);
    s += w;
  }
  EXPECT_NEAR(s, 2.0, 1e-12);
}

TEST(Grid, SimplexWeightSum) {
  QuadratureGrid<2> g(builtin("cp2"), 64);
  double s = 0;
  for (double w : g.weights()) {
    EXPECT_GT(w, 0);
    s += w;
  }
  EXPECT_NEAR(s, 4.5, 1e-10);
}

TEST(Grid, NodesKeepDistanceFromBoundary) {
  for (const auto& name : {"cp2", "dp1", "dp3"}) {
    QuadratureGrid<2> g(builtin(name), 32);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t k = 0; k < g.facet_count(); ++k) EXPECT_GE(g.ell(i, k), g.h() / 2);
  }
}

TEST(Grid, IntervalQuadratureIsSecondOrder) {
  // int_{-1}^{1} e^{0.3x} cos x dx
  auto F = [](double x) { return std::exp(0.3 * x) * (0.3 * std::cos(x) + std::sin(x)) / 1.09; };
  double exact = F(1) - F(-1);
  double e1 = std::abs(quad(QuadratureGrid<1>(builtin("cp1"), 64), smooth1) - exact);
  double e2 = std::abs(quad(QuadratureGrid<1>(builtin("cp1"), 128), smooth1) - exact);
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(Grid, PolygonQuadratureIsSecondOrder) {
  for (const auto& name : {"cp2", "dp1", "cp1xcp1"}) {
    auto p = builtin(name);
    double exact = polygon_integral(p);
    double e1 = std::abs(quad(QuadratureGrid<2>(p, 48), smooth2) - exact);
    double e2 = std::abs(quad(QuadratureGrid<2>(p, 96), smooth2) - exact);
    double e3 = std::abs(quad(QuadratureGrid<2>(p, 192), smooth2) - exact);
    EXPECT_GT(e1 / e2, 3.0) << name;
    EXPECT_GT(e2 / e3, 3.5) << name;
    EXPECT_LT(e2 / e3, 4.6) << name;
  }
}

TEST(Grid, StencilsExactOnQuadratics) {
  for (const auto& name : {"cp2", "dp1", "dp2", "dp3", "cp1xcp1"}) {
    QuadratureGrid<2> g(builtin(name), 20);
    std::vector<double> f(g.size());
    Mat<2> A;
    A << 1.3, -0.4, -0.4, 0.7;
    Vec<2> b(0.2, -1.1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& x = g.point(i);
      f[i] = 0.5 * x.dot(A * x) + b.dot(x) + 3;
    }
    int non_central = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      non_central += !g.is_central(i);
      EXPECT_LT((g.gradient(f, i) - (A * g.point(i) + b)).norm(), 1e-9) << name << " node " << i;
      EXPECT_LT((g.hessian(f, i) - A).norm(), 1e-7) << name << " node " << i;
    }
    EXPECT_GT(non_central, 0);
  }
}

TEST(Grid, StencilsFourthOrderOnSmoothFunctions) {
  auto f = [](const Vec<2>& x) { return std::exp(0.7 * x[0] - 0.4 * x[1]); };
  Mat<2> H0;
  H0 << 0.49, -0.28, -0.28, 0.16;
  for (const auto& name : {"dp1", "cp2"}) {
    double err[2];
    int r = 0;
    for (int res : {32, 64}) {
      QuadratureGrid<2> g(builtin(name), res);
      std::vector<double> v(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.point(i));
      double e = 0;
      // Relative to the local size of the fourth derivatives.
      for (std::size_t i = 0; i < g.size(); ++i)
        e = std::max(e, (g.hessian(v, i) / v[i] - H0).norm());
      err[r++] = e;
    }
    EXPECT_GT(err[0] / err[1], 12.0) << name;
  }
}

TEST(Grid, BoundaryRuleSatisfiesDivergenceIdentity) {
  // int_{dP} F d(sigma) = int_P (n F + x . grad F) d(mu) on reflexive P.
  for (const auto& name : {"cp2", "dp1", "dp2", "dp3", "cp1xcp1"}) {
    QuadratureGrid<2> g(builtin(name), 128);
    std::vector<double> F(g.size()), rhs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& x = g.point(i);
      F[i] = smooth2(x);
      double e = std::exp(0.3 * x[0] - 0.2 * x[1]);
      double s = std::sin(x[0] + 0.5 * x[1]), c = std::cos(x[0] + 0.5 * x[1]);
      Vec<2> grad(e * (0.3 * c - s), e * (-0.2 * c - 0.5 * s));
      rhs[i] = 2 * F[i] + x.dot(grad);
    }
    double lhs = g.integrate_boundary(F), r = g.integrate(rhs);
    EXPECT_NEAR(lhs, r, 2e-3 * std::abs(r) + 2e-3) << name;
  }
  QuadratureGrid<1> g(builtin("cp1"), 256);
  std::vector<double> F(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) F[i] = smooth1(g.point(i));
  EXPECT_NEAR(g.integrate_boundary(F), smooth1(Vec<1>(1.0)) + smooth1(Vec<1>(-1.0)), 1e-4);
}

TEST(Grid, RejectsTooSmallResolution) {
  EXPECT_THROW(QuadratureGrid<1>(builtin("cp1"), 8), GridError);
  EXPECT_THROW(QuadratureGrid<2>(builtin("cp1"), 64), GridError);
}
