#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "toricflow/flow.hpp"

using namespace toricflow;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return read_config(in);
}

RunConfig cp1_bump(int resolution, double t_max) {
  RunConfig c;
  c.polytope = "cp1";
  c.resolution = resolution;
  c.t_max = t_max;
  c.record_interval = 0.01;
  c.perturbation = {"bump 0.05 2"};
  return c;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Config, ParsesKeysAndPerturbationSection) {
  auto c = parse(
      "# comment\n"
      "polytope = dp1\n"
      "resolution = 96   # trailing\n"
      "dt = 5e-5\n"
      "t_max = 3\n"
      "record_interval = 0.1\n"
      "fit_window = 0.25\n"
      "seed = 42\n"
      "family_size = 2\n"
      "converge_tol = 1e-11\n"
      "stall_tol = 1e-9\n"
      "\n"
      "[perturbation]\n"
      "bump 0.01 2\n"
      "random 0.002 3\n");
  EXPECT_EQ(c.polytope, "dp1");
  EXPECT_EQ(c.resolution, 96);
  EXPECT_DOUBLE_EQ(c.dt, 5e-5);
  EXPECT_DOUBLE_EQ(c.t_max, 3);
  EXPECT_DOUBLE_EQ(c.record_interval, 0.1);
  EXPECT_DOUBLE_EQ(c.fit_window, 0.25);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.family_size, 2);
  EXPECT_DOUBLE_EQ(c.converge_tol, 1e-11);
  EXPECT_DOUBLE_EQ(c.stall_tol, 1e-9);
  ASSERT_EQ(c.perturbation.size(), 2u);
  EXPECT_EQ(c.build_perturbation(2).terms().size(), 4u);
}

TEST(Config, ParseErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("polytope = cp1\ncolour = red\n"), 2u);
  EXPECT_EQ(parse_error_line("\n\nresolution = lots\n"), 3u);
  EXPECT_EQ(parse_error_line("dt = 1e-4x\n"), 1u);
  EXPECT_EQ(parse_error_line("t_max =\n"), 1u);
  EXPECT_EQ(parse_error_line("just words\n"), 1u);
  EXPECT_EQ(parse_error_line("[perturbation]\nbump 0.1 2\n[output]\n"), 3u);
  EXPECT_EQ(parse_error_line("[perturbation]\n[perturbation]\n"), 2u);
}

TEST(Config, RangeChecks) {
  RunConfig c;
  EXPECT_NO_THROW(check_config(c));
  for (auto mutate : std::vector<std::function<void(RunConfig&)>>{
           [](RunConfig& r) { r.resolution = 8; }, [](RunConfig& r) { r.dt = 0; },
           [](RunConfig& r) { r.t_max = -1; }, [](RunConfig& r) { r.record_interval = 0; },
           [](RunConfig& r) { r.fit_window = 1.5; }, [](RunConfig& r) { r.family_size = 0; },
           [](RunConfig& r) { r.stall_tol = 0; }}) {
    RunConfig bad;
    mutate(bad);
    EXPECT_THROW(check_config(bad), ConfigError);
  }
}

TEST(Config, RandomPerturbationFollowsSeed) {
  RunConfig a, b;
  a.perturbation = b.perturbation = {"random 0.01 4"};
  a.seed = b.seed = 7;
  Vec<2> x(0.1, -0.2);
  EXPECT_EQ(a.build_perturbation(2).value<2>(x), b.build_perturbation(2).value<2>(x));
  b.seed = 8;
  EXPECT_NE(a.build_perturbation(2).value<2>(x), b.build_perturbation(2).value<2>(x));
}

TEST(Config, LoadsPolytopeRelativeToBase) {
  auto dir = std::filesystem::temp_directory_path() / "toricflow_test_flow";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "square.poly");
    write_polytope(out, builtin("cp1xcp1"));
  }
  auto P = load_polytope("square.poly", dir);
  EXPECT_EQ(P.dimension(), 2);
  EXPECT_EQ(P.facets().size(), 4u);
  EXPECT_EQ(load_polytope("cp2").name(), "cp2");
  EXPECT_THROW(load_polytope("no_such_thing.poly", dir), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Run, StationaryPointDoesNotMove) {
  auto d = std::make_shared<const Discretization<1>>(builtin("cp1"), 512);
  auto s0 = FlowState<1>::initial(SymplecticPotential<1>::zero(d));
  auto s1 = step(s0, 1e-5);
  double diff = 0;
  for (std::size_t i = 0; i < d->size(); ++i) diff = std::max(diff, std::abs(s1.sp.psi[i] - s0.sp.psi[i]));
  EXPECT_LE(diff, 1e-8);
}

TEST(Run, DissipationDecreasesOverFirstStep) {
  auto c = cp1_bump(128, 0.01);
  auto r = run<1>(c, builtin("cp1"));
  ASSERT_GE(r.records.size(), 2u);
  EXPECT_LT(r.records[1].Y, r.records[0].Y);
  EXPECT_EQ(r.status, RunStatus::kMaxTime);
  EXPECT_DOUBLE_EQ(r.t_end, 0.01);
}

TEST(Run, RecordsAtInterval) {
  auto r = run<1>(cp1_bump(64, 0.1), builtin("cp1"));
  ASSERT_EQ(r.records.size(), 11u);
  for (std::size_t k = 0; k < r.records.size(); ++k) EXPECT_NEAR(r.records[k].t, 0.01 * double(k), 1e-12);
  EXPECT_EQ(r.nonaffine.size(), r.records.size());
  EXPECT_EQ(r.nodes, 63u);
}

TEST(Run, EnergyConsistencyOnShortRun) {
  auto r = run<1>(cp1_bump(512, 0.5), builtin("cp1"));
  const auto& rs = r.records;
  for (std::size_t k = 1; k + 1 < rs.size(); ++k) {
    double dM = (rs[k + 1].M - rs[k - 1].M) / (rs[k + 1].t - rs[k - 1].t);
    EXPECT_LT(std::abs(dM + rs[k].Y) / rs[k].Y, 1e-2) << "t = " << rs[k].t;
    EXPECT_LE(rs[k + 1].M, rs[k].M);
    EXPECT_GE(rs[k].F, rs[k].F_lower);
  }
}

TEST(Run, BitIdenticalReruns) {
  auto c = cp1_bump(64, 0.05);
  c.perturbation.push_back("random 0.01 2");
  c.seed = 3;
  auto a = run<1>(c, builtin("cp1")), b = run<1>(c, builtin("cp1"));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) EXPECT_EQ(csv_values(a.records[k]), csv_values(b.records[k]));
  EXPECT_EQ(a.final_state.psi, b.final_state.psi);
}

TEST(Run, NonconvexStartIsRejected) {
  auto c = cp1_bump(64, 0.1);
  c.perturbation = {"bump 1.0 2"};  // f'' = 2 - 4 at the centre
  EXPECT_THROW(run<1>(c, builtin("cp1")), ConfigError);
  EXPECT_THROW(run<2>(c, builtin("cp1")), Error);
}

TEST(Run, ProductConverges) {
  RunConfig c;
  c.polytope = "cp1xcp1";
  c.resolution = 24;
  c.t_max = 12;
  c.record_interval = 0.05;
  c.perturbation = {"cosine 0.005 1 2"};
  auto r = run<2>(c, builtin("cp1xcp1"));
  EXPECT_EQ(r.status, RunStatus::kConverged);
  EXPECT_LT(r.records.back().Y, c.converge_tol);
}

TEST(Run, BlowupStallsWithPositiveDissipation) {
  RunConfig c;
  c.polytope = "dp1";
  c.resolution = 32;
  c.t_max = 30;
  c.record_interval = 0.05;
  auto r = run<2>(c, builtin("dp1"));
  EXPECT_EQ(r.status, RunStatus::kStalled);
  EXPECT_LT(r.nonaffine.back(), c.stall_tol);
  EXPECT_GT(r.records.back().Y, 1e-3 * r.records.front().Y);
}

TEST(NonaffinePart, AffineIsZero) {
  auto d = std::make_shared<const Discretization<2>>(builtin("dp2"), 32);
  std::vector<double> u(d->size()), v(d->size());
  for (std::size_t i = 0; i < d->size(); ++i) {
    u[i] = 0.3 * d->grid().point(i)[0] - 1.1 * d->grid().point(i)[1] + 0.25;
    v[i] = u[i] + d->grid().point(i).squaredNorm();
  }
  EXPECT_LT(nonaffine_part(d->grid(), u), 1e-12);
  EXPECT_GT(nonaffine_part(d->grid(), v), 0.1);
}

TEST(DYBound, MarginUsesNextInterval) {
  std::vector<DiagnosticRecord> rs(3);
  for (int k = 0; k < 3; ++k) {
    rs[k].t = 0.1 * k;
    rs[k].Y = 1.0 + k;  // slope 10
    rs[k].norms.lap = 0.5;
    rs[k].norms.grad = 1.0;
  }
  fill_dY_bound_margins(rs);
  EXPECT_NEAR(rs[0].dY_bound_margin, 6 * 1.5 * 1.0 - 10, 1e-12);
  EXPECT_NEAR(rs[1].dY_bound_margin, 6 * 1.5 * 2.0 - 10, 1e-12);
  EXPECT_NEAR(rs[2].dY_bound_margin, 6 * 1.5 * 3.0 - 10, 1e-12);
  EXPECT_LT(rs[0].dY_bound_margin, 0);
}

TEST(Fits, ExponentialDecayRecovered) {
  std::vector<double> t, Y;
  for (int k = 0; k <= 200; ++k) t.push_back(0.05 * k), Y.push_back(5 * std::exp(-2 * t.back()));
  auto f = fit_decay(t, Y, 5, 10);
  EXPECT_NEAR(f.rate, 2, 1e-6);
  EXPECT_GT(f.r2, 0.999999);
  EXPECT_TRUE(f.accepted);
  EXPECT_EQ(f.points, 101u);

  std::vector<double> flat(t.size(), 0.3);
  EXPECT_FALSE(fit_decay(t, flat, 5, 10).accepted);
  Y[150] = 0;
  EXPECT_THROW(fit_decay(t, Y, 5, 10), Error);
}

TEST(Fits, LogBoundRecovered) {
  std::vector<double> t, M, plateau;
  for (int k = 0; k <= 400; ++k) {
    t.push_back(0.05 * k);
    M.push_back(-3 * std::log1p(t.back()) - 1);
    plateau.push_back(-0.5 * (1 - std::exp(-4 * t.back())));
  }
  auto f = fit_log_bound(t, M);
  EXPECT_NEAR(f.C, 3, 1e-9);
  EXPECT_NEAR(f.D, 1, 1e-12);
  EXPECT_FALSE(f.zero_c_feasible);
  EXPECT_FALSE(f.violated);

  auto p = fit_log_bound(t, plateau);
  EXPECT_TRUE(p.zero_c_feasible);
  EXPECT_NEAR(p.D_zero_c, 0.5, 1e-9);

  std::vector<double> linear;
  for (double s : t) linear.push_back(-s);
  EXPECT_TRUE(fit_log_bound(t, linear).violated);
}

TEST(Fits, LinearGrowth) {
  std::vector<double> t, F;
  for (int k = 0; k <= 100; ++k) t.push_back(0.1 * k), F.push_back(2 + 0.7 * t.back() + 0.1 * std::sin(t.back()));
  auto g = fit_growth(t, F, 0, 10);
  EXPECT_NEAR(g.C1, 0.7, 0.05);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_LE(F[k] - g.C1 * t[k], g.C2 + 1e-12);
  std::vector<double> falling;
  for (double s : t) falling.push_back(-s);
  EXPECT_EQ(fit_growth(t, falling, 0, 10).C1, 0);
}

TEST(Tolerance, ScalesWithGridAndStep) {
  EXPECT_DOUBLE_EQ(inequality_tolerance(0.5, 0.01, -2), 10 * 0.26 * 2);
  MarginStats m;
  add_margin(m, 1.05, 1.0, 0.1);
  add_margin(m, 1.2, 1.0, 0.1);
  EXPECT_EQ(m.violations, 1);
  EXPECT_NEAR(m.min_relative, -0.2, 1e-12);
}
