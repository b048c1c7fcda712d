#pragma once

// Explicit RK4 for the normalized flow d(psi)/dt = -u(psi).

#include <algorithm>
#include <cmath>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/potential.hpp"

namespace toricflow {

template <int N>
struct FlowState {
  double t = 0;
  SymplecticPotential<N> sp;
  double dt = 0;          // last accepted step
  double norm_const = 0;  // c(t) of the current state
  long long steps = 0;
  std::vector<double> u;  // normalized Ricci potential at the current state

  static FlowState initial(SymplecticPotential<N> sp) {
    FlowState s;
    s.sp = std::move(sp);
    s.norm_const = ricci_potential_values(s.sp, s.u);
    return s;
  }
};

/// Gershgorin bound on the spectrum of the linearized right-hand side
/// d(psi) -> H : Hess d(psi) - x . grad d(psi) + d(psi).
template <int N>
double spectral_bound(const SymplecticPotential<N>& sp) {
  const auto& g = sp.grid();
  double rho = 0;
  std::vector<double> row;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Mat<N> d2 = g.hessian(sp.psi, i);
    const auto& can = sp.disc->canonical(i);
    Mat<N> M = Mat<N>::Identity() + can.inverse * d2;
    Mat<N> H = M.inverse() * can.inverse;
    double s = 0;
    const Vec<N>& x = g.point(i);
    bool has_centre = false;
    for (const auto& e : g.stencil(i)) {
      double c = (H.cwiseProduct(e.hess)).sum() - x.dot(e.grad);
      if (e.col == int(i)) {
        c += 1;
        has_centre = true;
      }
      s += std::abs(c);
    }
    if (!has_centre) s += 1;
    rho = std::max(rho, s);
  }
  return rho;
}

/// Largest step inside the RK4 stability interval for the current state.
template <int N>
double stable_step(const SymplecticPotential<N>& sp) {
  return 2.5 / spectral_bound(sp);
}

namespace detail {

// k1 is the velocity at the current state; on success `out` holds the new
// potential, `u_out` its Ricci potential and `c_out` its normalization.
template <int N>
bool rk4_attempt(const SymplecticPotential<N>& sp, const std::vector<double>& k1, double dt,
                 std::vector<double>& out, std::vector<double>& u_out, double& c_out) {
  const std::size_t n = sp.psi.size();
  std::vector<double> k2, k3, k4;
  SymplecticPotential<N> tmp{sp.disc, std::vector<double>(n)};
  try {
    for (std::size_t i = 0; i < n; ++i) tmp.psi[i] = sp.psi[i] - 0.5 * dt * k1[i];
    ricci_potential_values(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp.psi[i] = sp.psi[i] - 0.5 * dt * k2[i];
    ricci_potential_values(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp.psi[i] = sp.psi[i] - dt * k3[i];
    ricci_potential_values(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp.psi[i] = sp.psi[i] - dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    c_out = ricci_potential_values(tmp, u_out);
  } catch (const PositivityError&) {
    return false;
  }
  out = std::move(tmp.psi);
  return true;
}

}  // namespace detail

/// One RK4 step of size dt, halving up to 20 times when a stage or the new
/// state loses positivity. Throws PositivityError when no halving succeeds.
template <int N>
FlowState<N> step(const FlowState<N>& s, double dt) {
  std::vector<double> u0;
  const std::vector<double>* k1 = &s.u;
  if (s.u.size() != s.sp.psi.size()) {
    ricci_potential_values(s.sp, u0);
    k1 = &u0;
  }
  double h = dt;
  for (int halvings = 0; halvings <= 20; ++halvings, h *= 0.5) {
    FlowState<N> out;
    if (detail::rk4_attempt(s.sp, *k1, h, out.sp.psi, out.u, out.norm_const)) {
      out.sp.disc = s.sp.disc;
      out.t = s.t + h;
      out.dt = h;
      out.steps = s.steps + 1;
      return out;
    }
  }
  throw PositivityError(0, "positivity lost at t = " + std::to_string(s.t) + " after 20 step halvings");
}

}  // namespace toricflow
