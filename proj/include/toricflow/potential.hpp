#pragma once

// Symplectic potentials f = f_G + psi on a quadrature grid; Ricci potential,
// curvature and Legendre data.
//
// Only psi is discretized. With M = I + H_G Hess psi (H_G = (Hess f_G)^{-1}),
//
//   H        = (Hess f)^{-1} = M^{-1} H_G,
//   u_raw    = -(abreu_G + log det M + psi - x . grad psi),
//   u        = u_raw + c,   c = log( (1/V) int_P exp(-u_raw) d(mu) ),
//
// so every quantity is smooth up to the boundary. Metric quantities:
//   |grad u|^2 = <H grad_x u, grad_x u>,  Delta u = d_i (H^{ij} d_j u),
//   R = -d_i d_j H^{ij}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/grid.hpp"
#include "toricflow/guillemin.hpp"
#include "toricflow/perturbation.hpp"
#include "toricflow/polytope.hpp"

namespace toricflow {

/// Polytope, grid and the cached canonical potential at every node.
template <int N>
class Discretization {
 public:
  Discretization(ReflexivePolytope p, int resolution)
      : polytope_(std::move(p)), grid_(polytope_, resolution), facets_(polytope_) {
    auto rep = validate(polytope_);
    if (!rep.passed()) {
      std::string why = rep.failures.empty() ? "invalid polytope" : rep.failures.front();
      throw Error("polytope fails validation: " + why);
    }
    cache_.reserve(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) cache_.push_back(guillemin<N>(facets_, grid_.point(i)));
  }

  const ReflexivePolytope& polytope() const { return polytope_; }
  const QuadratureGrid<N>& grid() const { return grid_; }
  const FacetData<N>& facets() const { return facets_; }
  const GuilleminValue<N>& canonical(std::size_t i) const { return cache_[i]; }
  std::size_t size() const { return grid_.size(); }

 private:
  ReflexivePolytope polytope_;
  QuadratureGrid<N> grid_;
  FacetData<N> facets_;
  std::vector<GuilleminValue<N>> cache_;
};

/// Closed-form potential f_G + psi_0 with psi_0 analytic; used for initial
/// data and as the exact reference in Legendre inversions.
template <int N>
class AnalyticPotential {
 public:
  AnalyticPotential(FacetData<N> facets, Perturbation psi) : facets_(std::move(facets)), psi_(std::move(psi)) {}

  const FacetData<N>& facets() const { return facets_; }
  const Perturbation& perturbation() const { return psi_; }

  bool inside(const Vec<N>& x) const {
    for (std::size_t i = 0; i < facets_.size(); ++i)
      if (!(facets_.ell(i, x) > 0)) return false;
    return true;
  }
  double value(const Vec<N>& x) const { return guillemin<N>(facets_, x).value + psi_.value<N>(x); }
  Vec<N> gradient(const Vec<N>& x) const { return guillemin<N>(facets_, x).grad + psi_.gradient<N>(x); }
  Mat<N> hessian(const Vec<N>& x) const { return guillemin<N>(facets_, x).hess + psi_.hessian<N>(x); }
  /// (Hess f)^{-1}, evaluated in the boundary-regular form.
  Mat<N> inverse_hessian(const Vec<N>& x) const {
    auto g = guillemin<N>(facets_, x);
    Mat<N> M = Mat<N>::Identity() + g.inverse * psi_.hessian<N>(x);
    Mat<N> H = M.inverse() * g.inverse;
    return 0.5 * (H + H.transpose());
  }

  /// Solves grad f(x) = y by damped Newton on f(x) - <x, y>.
  Vec<N> invert(const Vec<N>& y, Vec<N> x = Vec<N>::Zero()) const {
    if (!inside(x)) x = Vec<N>::Zero();
    auto objective = [&](const Vec<N>& z) { return value(z) - z.dot(y); };
    double F = objective(x);
    for (int it = 0; it < 200; ++it) {
      Vec<N> r = gradient(x) - y;
      Mat<N> Hinv = inverse_hessian(x);
      Vec<N> step = -(Hinv * r);
      double dec = -r.dot(step);
      if (dec < 1e-28 || step.norm() < 1e-17) break;
      double t = 1;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        Vec<N> z = x + t * step;
        if (!inside(z)) continue;
        double Fz = objective(z);
        if (Fz <= F - 1e-4 * t * dec || (t == 1 && std::abs(Fz - F) < 1e-15 * (1 + std::abs(F)))) {
          x = z;
          F = Fz;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return x;
  }

 private:
  FacetData<N> facets_;
  Perturbation psi_;
};

template <int N>
struct SymplecticPotential {
  std::shared_ptr<const Discretization<N>> disc;
  std::vector<double> psi;

  static SymplecticPotential zero(std::shared_ptr<const Discretization<N>> d) {
    return {d, std::vector<double>(d->size(), 0.0)};
  }
  static SymplecticPotential from(std::shared_ptr<const Discretization<N>> d, const Perturbation& p) {
    SymplecticPotential sp{d, std::vector<double>(d->size())};
    for (std::size_t i = 0; i < d->size(); ++i) sp.psi[i] = p.value<N>(d->grid().point(i));
    return sp;
  }
  const QuadratureGrid<N>& grid() const { return disc->grid(); }
};

/// Per-node metric package.
template <int N>
struct MetricSample {
  std::vector<Vec<N>> psi_grad;
  std::vector<Mat<N>> psi_hess;
  std::vector<Mat<N>> hess_f;
  std::vector<Mat<N>> H;
  std::vector<double> log_det;  // log det Hess f
  std::vector<double> logq;     // log det (I + H_G Hess psi)
  std::vector<double> u_raw;
  std::vector<double> u;
  double norm_const = 0;
  std::vector<Vec<N>> grad_u;  // coordinate gradient
  std::vector<Vec<N>> flux;    // H grad u, the y-gradient of u
  std::vector<double> grad_sq;
  std::vector<double> laplacian;  // d_i (H^{ij} d_j u)
  std::vector<double> scalar;     // Abreu scalar curvature

  std::size_t size() const { return u.size(); }
};

namespace detail {

template <int N>
struct NodeMetric {
  Mat<N> H;
  double logq;
  double u_raw;
};

template <int N>
NodeMetric<N> node_metric(const GuilleminValue<N>& g, const Vec<N>& x, double psi, const Vec<N>& dpsi,
                          const Mat<N>& d2psi, std::size_t node) {
  Mat<N> M = Mat<N>::Identity() + g.inverse * d2psi;
  double detM = M.determinant();
  if (!(detM > 0)) throw PositivityError(node, "Hessian lost positive definiteness at node " + std::to_string(node));
  Mat<N> H = M.inverse() * g.inverse;
  H = 0.5 * (H + H.transpose());
  if (!(H(0, 0) > 0)) throw PositivityError(node, "Hessian lost positive definiteness at node " + std::to_string(node));
  double logq = std::log(detM);
  double u_raw = -(g.abreu + logq + psi - x.dot(dpsi));
  if (!std::isfinite(u_raw)) throw PositivityError(node, "non-finite Ricci potential at node " + std::to_string(node));
  return {H, logq, u_raw};
}

/// c with (1/V) sum_i w_i exp(-(u_raw_i + c)) = 1.
inline double normalization_constant(const std::vector<double>& w, const std::vector<double>& u_raw, double V) {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : u_raw) lo = std::min(lo, v);
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::exp(-(u_raw[i] - lo));
  double c = std::log(s / V) - lo;
  if (!std::isfinite(c)) throw Error("normalization integral is not finite");
  return c;
}

}  // namespace detail

/// Normalized Ricci potential u at every node (the flow velocity is -u).
/// Throws PositivityError when Hess f is not positive definite at a node.
template <int N>
double ricci_potential_values(const SymplecticPotential<N>& sp, std::vector<double>& u) {
  const auto& d = *sp.disc;
  const auto& g = d.grid();
  u.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec<N> dpsi = Vec<N>::Zero();
    Mat<N> d2psi = Mat<N>::Zero();
    for (const auto& e : g.stencil(i)) {
      double v = sp.psi[e.col];
      dpsi += e.grad * v;
      d2psi += e.hess * v;
    }
    u[i] = detail::node_metric<N>(d.canonical(i), g.point(i), sp.psi[i], dpsi, d2psi, i).u_raw;
  }
  double c = detail::normalization_constant(g.weights(), u, g.volume());
  for (double& v : u) v += c;
  return c;
}

/// Full metric package, including curvature and the Laplacian of u.
template <int N>
MetricSample<N> ricci_potential(const SymplecticPotential<N>& sp) {
  const auto& d = *sp.disc;
  const auto& g = d.grid();
  const std::size_t n = g.size();
  MetricSample<N> ms;
  ms.psi_grad.resize(n);
  ms.psi_hess.resize(n);
  ms.hess_f.resize(n);
  ms.H.resize(n);
  ms.log_det.resize(n);
  ms.logq.resize(n);
  ms.u_raw.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ms.psi_grad[i] = g.gradient(sp.psi, i);
    ms.psi_hess[i] = g.hessian(sp.psi, i);
    const auto& can = d.canonical(i);
    auto nm = detail::node_metric<N>(can, g.point(i), sp.psi[i], ms.psi_grad[i], ms.psi_hess[i], i);
    ms.H[i] = nm.H;
    ms.logq[i] = nm.logq;
    ms.u_raw[i] = nm.u_raw;
    ms.hess_f[i] = can.hess + ms.psi_hess[i];
    ms.log_det[i] = can.log_det + nm.logq;
  }
  ms.norm_const = detail::normalization_constant(g.weights(), ms.u_raw, g.volume());
  ms.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) ms.u[i] = ms.u_raw[i] + ms.norm_const;

  ms.grad_u.resize(n);
  ms.flux.resize(n);
  ms.grad_sq.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ms.grad_u[i] = g.gradient(ms.u, i);
    ms.flux[i] = ms.H[i] * ms.grad_u[i];
    ms.grad_sq[i] = std::max(0.0, ms.grad_u[i].dot(ms.flux[i]));
  }
  ms.laplacian.assign(n, 0.0);
  ms.scalar.assign(n, 0.0);
  std::vector<double> comp(n);
  for (int a = 0; a < N; ++a) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = ms.flux[i][a];
    for (std::size_t i = 0; i < n; ++i) ms.laplacian[i] += g.gradient(comp, i)[a];
    for (int b = 0; b < N; ++b) {
      for (std::size_t i = 0; i < n; ++i) comp[i] = ms.H[i](a, b);
      for (std::size_t i = 0; i < n; ++i) ms.scalar[i] -= g.hessian(comp, i)(a, b);
    }
  }
  return ms;
}

struct SupNorms {
  double u = 0;     // max |u|
  double grad = 0;  // sqrt(max |grad u|^2)
  double lap = 0;   // max |Delta u|
  double grad_l2 = 0;
};

template <int N>
SupNorms sup_norms(const MetricSample<N>& ms, const QuadratureGrid<N>& g) {
  SupNorms s;
  double gmax = 0, Y = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    s.u = std::max(s.u, std::abs(ms.u[i]));
    gmax = std::max(gmax, ms.grad_sq[i]);
    s.lap = std::max(s.lap, std::abs(ms.laplacian[i]));
    Y += g.weights()[i] * ms.grad_sq[i];
  }
  s.grad = std::sqrt(gmax);
  s.grad_l2 = std::sqrt(Y);
  return s;
}

/// Legendre data on the image of the grid under grad f.
template <int N>
struct KahlerPotentialSamples {
  std::vector<Vec<N>> y;
  std::vector<double> phi;
  std::vector<Mat<N>> dual_hess;  // Hess phi (y) = (Hess f)^{-1} (x)
  std::vector<double> dy_weight;  // d(mu) weight times det Hess f
};

/// Throws Error when grad f is not monotone along lattice neighbours.
template <int N>
KahlerPotentialSamples<N> legendre(const SymplecticPotential<N>& sp, const MetricSample<N>& ms) {
  const auto& d = *sp.disc;
  const auto& g = d.grid();
  KahlerPotentialSamples<N> ks;
  const std::size_t n = g.size();
  ks.y.resize(n);
  ks.phi.resize(n);
  ks.dual_hess = ms.H;
  ks.dy_weight.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = g.point(i);
    const auto& can = d.canonical(i);
    ks.y[i] = can.grad + ms.psi_grad[i];
    ks.phi[i] = x.dot(ks.y[i]) - (can.value + sp.psi[i]);
    ks.dy_weight[i] = g.weights()[i] * std::exp(ms.log_det[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < N; ++a) {
      LatticePoint<N> q = g.lattice(i);
      q[a] += 1;
      int j = g.node_at(q);
      if (j < 0) continue;
      if (!((ks.y[j] - ks.y[i]).dot(g.point(j) - g.point(i)) > 0))
        throw Error("gradient map is not monotone between nodes " + std::to_string(i) + " and " +
                    std::to_string(j) + ": potential is not convex");
    }
  }
  return ks;
}

template <int N>
KahlerPotentialSamples<N> legendre(const SymplecticPotential<N>& sp) {
  return legendre(sp, ricci_potential(sp));
}

/// Inverse transform: f~(x) = max_k (<x, y_k> - phi_k) at the midpoints of
/// lattice edges whose endpoints stay at distance >= `core` from dP,
/// compared with f_G + (linearly interpolated) psi. Returns the max error.
template <int N>
double legendre_round_trip_error(const SymplecticPotential<N>& sp, const KahlerPotentialSamples<N>& ks,
                                 double core = 0.25) {
  const auto& d = *sp.disc;
  const auto& g = d.grid();
  double err = 0;
  auto far_from_boundary = [&](std::size_t i) {
    for (std::size_t k = 0; k < g.facet_count(); ++k)
      if (g.ell(i, k) < core) return false;
    return true;
  };
  const long long R = 3;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!far_from_boundary(i)) continue;
    for (int a = 0; a < N; ++a) {
      LatticePoint<N> q = g.lattice(i);
      q[a] += 1;
      int j = g.node_at(q);
      if (j < 0 || !far_from_boundary(std::size_t(j))) continue;
      Vec<N> mid = 0.5 * (g.point(i) + g.point(j));
      double truth = guillemin<N>(d.facets(), mid).value + 0.5 * (sp.psi[i] + sp.psi[j]);
      double best = -std::numeric_limits<double>::infinity();
      LatticePoint<N> c = g.lattice(i);
      if constexpr (N == 1) {
        for (long long dx = -R; dx <= R; ++dx) {
          int k = g.node_at({c[0] + dx});
          if (k >= 0) best = std::max(best, mid.dot(ks.y[k]) - ks.phi[k]);
        }
      } else {
        for (long long dx = -R; dx <= R; ++dx)
          for (long long dy = -R; dy <= R; ++dy) {
            int k = g.node_at({c[0] + dx, c[1] + dy});
            if (k >= 0) best = std::max(best, mid.dot(ks.y[k]) - ks.phi[k]);
          }
      }
      err = std::max(err, std::abs(best - truth));
    }
  }
  return err;
}

}  // namespace toricflow
