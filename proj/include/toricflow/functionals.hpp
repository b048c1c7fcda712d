#pragma once

// Energy functionals and inequality terms on a metric sample.
//
// All functionals are relative to a reference potential (the initial one in
// a flow run), so singular integrands such as log det Hess f never appear in
// absolute form.

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/potential.hpp"

namespace toricflow {

namespace detail {

template <int N>
void require_same_grid(const SymplecticPotential<N>& a, const SymplecticPotential<N>& b) {
  if (a.disc != b.disc) throw Error("potentials live on different grids");
}

// L_P(F) = int_P <x, grad F> d(mu): the divergence theorem turns the boundary
// term of int_dP F d(sigma) - n int_P F d(mu) into this interior integral.
template <int N>
double donaldson_interior(const QuadratureGrid<N>& g, const std::vector<double>& F) {
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights()[i] * g.point(i).dot(g.gradient(F, i));
  return s;
}

}  // namespace detail

/// M(f) - M(f_0) = int log(det Hess f_0 / det Hess f) d(mu) + L_P(psi - psi_0).
template <int N>
double mabuchi(const SymplecticPotential<N>& sp, const MetricSample<N>& ms, const SymplecticPotential<N>& sp0,
               const MetricSample<N>& ms0) {
  detail::require_same_grid(sp, sp0);
  const auto& g = sp.grid();
  double vol = 0;
  std::vector<double> diff(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    vol += g.weights()[i] * (ms0.logq[i] - ms.logq[i]);
    diff[i] = sp.psi[i] - sp0.psi[i];
  }
  return vol + detail::donaldson_interior(g, diff);
}

/// Y = int |grad u|^2 d(mu).
template <int N>
double dissipation(const MetricSample<N>& ms, const QuadratureGrid<N>& g) {
  double Y = 0;
  for (std::size_t i = 0; i < g.size(); ++i) Y += g.weights()[i] * ms.grad_sq[i];
  return Y;
}

struct FValue {
  double F = 0;
  double lower = 0;  // (1/2) int tr(g^{-1} Hess f)
};

/// F(f) = int (tr A - log det A) d(mu) with A = (Hess g)^{-1} Hess f
///      = I + H_g (Hess psi - Hess psi_g), bounded up to the boundary.
template <int N>
FValue f_functional(const SymplecticPotential<N>& sp, const MetricSample<N>& ms, const SymplecticPotential<N>& ref,
                    const MetricSample<N>& ms_ref) {
  detail::require_same_grid(sp, ref);
  const auto& g = sp.grid();
  FValue v;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Mat<N> A = Mat<N>::Identity() + ms_ref.H[i] * (ms.psi_hess[i] - ms_ref.psi_hess[i]);
    double det = A.determinant();
    if (!(det > 0)) throw PositivityError(i, "g^{-1} Hess f is not positive definite at node " + std::to_string(i));
    double tr = A.trace();
    v.F += g.weights()[i] * (tr - std::log(det));
    v.lower += 0.5 * g.weights()[i] * tr;
  }
  return v;
}

/// int (R(g) - R(f)) L(f) d(mu) with L(f) taken as the flow velocity -d(psi)/dt = u;
/// the normalization constant contributes c int (R(g) - R(f)) = 0.
template <int N>
double f_derivative_identity(const MetricSample<N>& ms, const MetricSample<N>& ms_ref, const QuadratureGrid<N>& g) {
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights()[i] * (ms_ref.scalar[i] - ms.scalar[i]) * ms.u[i];
  return s;
}

// ---------------------------------------------------------------------------
// J functional on the Kahler-potential side.

/// Two Kahler potentials phi_0, phi_1 sampled at common points y_k with
/// dy-weights; x_k = grad phi at y_k.
template <int N>
struct JSample {
  std::vector<double> weight;
  std::vector<double> phi0, phi1;
  std::vector<Mat<N>> hess0, hess1;
  std::vector<Vec<N>> x0, x1;

  std::size_t size() const { return weight.size(); }
};

struct JValue {
  double J = 0;
  double aubin = 0;  // I = int phi (omega_0^n - omega_1^n)
};

/// dJ/ds = int phi (tr(Phi_s^{-1} Phi_0) - n) det Phi_s dy along
/// Phi_s = Phi_0 + s (Phi_1 - Phi_0), integrated over s by 16-point Gauss.
/// Throws DegeneracyError when an intermediate metric degenerates.
template <int N>
JValue j_functional(const JSample<N>& js) {
  using Gauss = boost::math::quadrature::gauss<double, 16>;
  JValue v;
  for (std::size_t k = 0; k < js.size(); ++k) {
    const double phi = js.phi1[k] - js.phi0[k];
    const Mat<N>& P0 = js.hess0[k];
    const Mat<N> dP = js.hess1[k] - P0;
    auto integrand = [&](double s) {
      Mat<N> Ps = P0 + s * dP;
      double det = Ps.determinant();
      if (!(det > 0)) throw DegeneracyError("intermediate metric degenerates on the linear path");
      Mat<N> adj = det * Ps.inverse();
      return (adj.cwiseProduct(P0.transpose())).sum() - N * det;
    };
    v.J += js.weight[k] * phi * Gauss::integrate(integrand, 0.0, 1.0);
    v.aubin += js.weight[k] * phi * (P0.determinant() - js.hess1[k].determinant());
  }
  return v;
}

/// n = 1: J = (1/2) int (phi')^2 dy with phi' = x_1 - x_0.
inline double j_closed_form(const JSample<1>& js) {
  double s = 0;
  for (std::size_t k = 0; k < js.size(); ++k) {
    double d = js.x1[k][0] - js.x0[k][0];
    s += 0.5 * js.weight[k] * d * d;
  }
  return s;
}

namespace detail {

template <int N>
void push_dual(const AnalyticPotential<N>& f, const Vec<N>& y, const Vec<N>& x, std::vector<double>& phi,
               std::vector<Mat<N>>& hess, std::vector<Vec<N>>& xs) {
  phi.push_back(x.dot(y) - f.value(x));
  hess.push_back(f.inverse_hessian(x));
  xs.push_back(x);
}

}  // namespace detail

/// Uniform tensor grid on [-half_width, half_width]^n with the given spacing;
/// both potentials are inverted by Newton's method at every point.
template <int N>
JSample<N> j_sample_uniform(const AnalyticPotential<N>& f0, const AnalyticPotential<N>& f1, double half_width,
                            double spacing) {
  JSample<N> js;
  const int m = int(std::lround(half_width / spacing));
  const double cell = std::pow(spacing, N);
  std::vector<int> idx(N, -m);
  Vec<N> guess0 = Vec<N>::Zero(), guess1 = Vec<N>::Zero();
  while (true) {
    Vec<N> y;
    for (int a = 0; a < N; ++a) y[a] = idx[a] * spacing;
    Vec<N> a0 = f0.invert(y, guess0), a1 = f1.invert(y, guess1);
    guess0 = a0;
    guess1 = a1;
    js.weight.push_back(cell);
    detail::push_dual(f0, y, a0, js.phi0, js.hess0, js.x0);
    detail::push_dual(f1, y, a1, js.phi1, js.hess1, js.x1);
    int a = N - 1;
    while (a >= 0 && idx[a] == m) idx[a--] = -m;
    if (a < 0) break;
    ++idx[a];
    if (a != N - 1) guess0 = guess1 = Vec<N>::Zero();
  }
  return js;
}

/// Samples at the images y_k = grad f_1(x_k) of the grid nodes of the current
/// potential, with dy = det Hess f_1 dx; the analytic initial potential f_0
/// is inverted at every y_k.
template <int N>
JSample<N> j_sample_images(const AnalyticPotential<N>& f0, const SymplecticPotential<N>& sp1,
                           const KahlerPotentialSamples<N>& ks1) {
  const auto& g = sp1.grid();
  JSample<N> js;
  js.weight = ks1.dy_weight;
  js.phi1 = ks1.phi;
  js.hess1 = ks1.dual_hess;
  js.x1.assign(g.points().begin(), g.points().end());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Vec<N> x0 = f0.invert(ks1.y[k], g.point(k));
    detail::push_dual(f0, ks1.y[k], x0, js.phi0, js.hess0, js.x0);
  }
  return js;
}

// ---------------------------------------------------------------------------
// Hessian terms in the dissipation estimate.
//
// In y = grad f coordinates u_y = H u_x = flux and
// u_yy = sym(K H) with K = d(flux)/dx; the metric raises indices by H^{-1}.

struct LemmaTerms {
  double lhs = 0;      // |int u_yy(grad u, grad u)|
  double I = 0;        // int |u_yy|_g^2 |grad u|^2
  double gradsq = 0;   // int |grad |grad u|^2|_g^2
  double cs_rhs = 0;   // sqrt(I Y)
  double rhs4 = 0;     // 3 |Delta u|^2 Y + 2 gradsq
  double rhs5 = 0;     // 5 (|grad u|^2 + |Delta u|) Y
  double rhs19 = 0;    // (19 |Delta u|^2 + |grad u|^4) Y
};

template <int N>
LemmaTerms lemma_terms(const MetricSample<N>& ms, const KahlerPotentialSamples<N>& ks, const QuadratureGrid<N>& g) {
  if (ks.dual_hess.size() != g.size() || ms.size() != g.size()) throw Error("Legendre data missing for this sample");
  const std::size_t n = g.size();
  std::vector<Mat<N>> K(n, Mat<N>::Zero());
  std::vector<double> comp(n);
  for (int a = 0; a < N; ++a) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = ms.flux[i][a];
    for (std::size_t i = 0; i < n; ++i) K[i].row(a) = g.gradient(comp, i).transpose();
  }
  LemmaTerms t;
  double Y = 0, gmax = 0, lmax = 0, signed_lhs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g.weights()[i];
    const Mat<N>& H = ks.dual_hess[i];
    Mat<N> uyy = K[i] * H;
    uyy = 0.5 * (uyy + uyy.transpose());
    Mat<N> Nm = H.inverse() * uyy;
    const Vec<N>& ux = ms.grad_u[i];
    const double G = ms.grad_sq[i];
    Vec<N> dG = g.gradient(ms.grad_sq, i);
    signed_lhs += w * ux.dot(uyy * ux);
    t.I += w * (Nm * Nm).trace() * G;
    t.gradsq += w * dG.dot(H * dG);
    Y += w * G;
    gmax = std::max(gmax, G);
    lmax = std::max(lmax, std::abs(ms.laplacian[i]));
  }
  t.lhs = std::abs(signed_lhs);
  t.cs_rhs = std::sqrt(std::max(0.0, t.I) * Y);
  t.rhs4 = 3 * lmax * lmax * Y + 2 * t.gradsq;
  t.rhs5 = 5 * (gmax + lmax) * Y;
  t.rhs19 = (19 * lmax * lmax + gmax * gmax) * Y;
  return t;
}

/// n = 1 cross-check of `lhs`: u_yy from divided differences of u on the
/// nonuniform y-sample itself, with no chain rule.
inline double lemma_lhs_direct(const MetricSample<1>& ms, const KahlerPotentialSamples<1>& ks,
                               const QuadratureGrid<1>& g) {
  const std::size_t n = g.size();
  if (n < 3) throw GridError("too few nodes");
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = std::clamp<std::size_t>(i, 1, n - 2);
    double y0 = ks.y[k - 1][0], y1 = ks.y[k][0], y2 = ks.y[k + 1][0];
    double d01 = (ms.u[k] - ms.u[k - 1]) / (y1 - y0), d12 = (ms.u[k + 1] - ms.u[k]) / (y2 - y1);
    double uyy = 2 * (d12 - d01) / (y2 - y0);
    s += g.weights()[i] * ms.grad_u[i][0] * ms.grad_u[i][0] * uyy;
  }
  return std::abs(s);
}

struct SmoothingRatio {
  double value = 0;
  bool stationary = false;
};

/// |u|^{n+1} / (|grad u|_{L2} |grad u|^n); flagged stationary when grad u
/// vanishes to roundoff.
template <int N>
SmoothingRatio smoothing_ratio(const SupNorms& s) {
  if (!(s.grad > 1e-13) || !(s.grad_l2 > 1e-13)) return {0.0, true};
  return {std::pow(s.u, N + 1) / (s.grad_l2 * std::pow(s.grad, N)), false};
}

inline double combined_monitor(double M, double J, double kappa) { return M + kappa * J; }

// ---------------------------------------------------------------------------

/// One row of the diagnostic time series.
struct DiagnosticRecord {
  double t = 0;
  double dt = 0;
  double M = 0;
  double Y = 0;
  double F = 0;
  double F_lower = 0;
  double dF_identity = 0;
  double J = 0;
  double I_aubin = 0;
  SupNorms norms;
  LemmaTerms lemma;
  SmoothingRatio smoothing;
  double perelman_sum = 0;
  double curvature_residual = 0;
  double norm_const = 0;
  double dY_bound_margin = 0;  // filled from consecutive records
};

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> c = {
      "t",          "dt",           "M",           "Y",          "F",         "F_lower",
      "dF_identity", "J",           "I_aubin",     "u_sup",      "grad_sup",  "lap_sup",
      "grad_l2",    "lemma_lhs",    "lemma_I",     "lemma_gradsq", "lemma_cs_rhs", "lemma_rhs4",
      "lemma_rhs5", "lemma_rhs19",  "smoothing_ratio", "stationary", "perelman_sum",
      "curvature_residual", "norm_const", "dY_bound_margin"};
  return c;
}

inline std::vector<double> csv_values(const DiagnosticRecord& r) {
  return {r.t,
          r.dt,
          r.M,
          r.Y,
          r.F,
          r.F_lower,
          r.dF_identity,
          r.J,
          r.I_aubin,
          r.norms.u,
          r.norms.grad,
          r.norms.lap,
          r.norms.grad_l2,
          r.lemma.lhs,
          r.lemma.I,
          r.lemma.gradsq,
          r.lemma.cs_rhs,
          r.lemma.rhs4,
          r.lemma.rhs5,
          r.lemma.rhs19,
          r.smoothing.value,
          r.smoothing.stationary ? 1.0 : 0.0,
          r.perelman_sum,
          r.curvature_residual,
          r.norm_const,
          r.dY_bound_margin};
}

/// Initial data every relative functional is measured against.
template <int N>
struct Reference {
  SymplecticPotential<N> sp;
  MetricSample<N> ms;
  std::optional<AnalyticPotential<N>> analytic;  // enables J
};

/// Full record for the current state. J and I are zero without an analytic
/// reference.
template <int N>
DiagnosticRecord diagnose(double t, double dt, const SymplecticPotential<N>& sp, const MetricSample<N>& ms,
                          const Reference<N>& ref) {
  const auto& g = sp.grid();
  DiagnosticRecord r;
  r.t = t;
  r.dt = dt;
  r.M = mabuchi(sp, ms, ref.sp, ref.ms);
  r.Y = dissipation(ms, g);
  auto F = f_functional(sp, ms, ref.sp, ref.ms);
  r.F = F.F;
  r.F_lower = F.lower;
  r.dF_identity = f_derivative_identity(ms, ref.ms, g);
  auto ks = legendre(sp, ms);
  if (ref.analytic) {
    auto jv = j_functional(j_sample_images(*ref.analytic, sp, ks));
    r.J = jv.J;
    r.I_aubin = jv.aubin;
  }
  r.norms = sup_norms(ms, g);
  r.lemma = lemma_terms(ms, ks, g);
  r.smoothing = smoothing_ratio<N>(r.norms);
  r.perelman_sum = r.norms.u + r.norms.grad + r.norms.lap;
  for (std::size_t i = 0; i < g.size(); ++i)
    r.curvature_residual = std::max(r.curvature_residual, std::abs(ms.scalar[i] - N + ms.laplacian[i]));
  r.norm_const = ms.norm_const;
  return r;
}

}  // namespace toricflow
