#pragma once

// Canonical potential f_G = sum_i l_i log l_i and its derivatives.
//
// The combinations that enter the flow are evaluated in a form that stays
// smooth up to the boundary. With Q(x) = sum_S det(v_S)^2 prod_{i not in S} l_i
// (S running over n-element facet subsets),
//
//   det Hess f_G                 = Q / prod_i l_i,
//   (Hess f_G)^{-1}              = sum_i (prod_{j != i} l_j) v_i^perp v_i^perp^T / Q   (n = 2),
//   log det Hess f_G + f_G - x.grad f_G = log Q + sum_i (o_i - 1) log l_i - <sum_i v_i, x>.
//
// On a reflexive polytope (o_i = 1) the last line is smooth on the closed
// polytope; for cp1 it is identically log 2.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/polytope.hpp"

namespace toricflow {

template <int N>
struct FacetData {
  std::vector<Eigen::Matrix<double, N, 1>> normals;
  std::vector<double> offsets;

  FacetData() = default;
  explicit FacetData(const ReflexivePolytope& p) {
    if (p.dimension() != N) throw Error("polytope dimension mismatch");
    for (const auto& f : p.facets()) {
      Eigen::Matrix<double, N, 1> v;
      for (int a = 0; a < N; ++a) v[a] = double(f.normal[a]);
      normals.push_back(v);
      offsets.push_back(double(f.offset));
    }
  }

  std::size_t size() const { return normals.size(); }
  double ell(std::size_t i, const Eigen::Matrix<double, N, 1>& x) const {
    return normals[i].dot(x) + offsets[i];
  }
};

template <int N>
struct GuilleminValue {
  double value = 0;
  Eigen::Matrix<double, N, 1> grad;
  Eigen::Matrix<double, N, N> hess;
  Eigen::Matrix<double, N, N> inverse;  // (Hess f_G)^{-1}
  double log_det = 0;                   // log det Hess f_G
  double abreu = 0;                     // log det Hess f_G + f_G - x . grad f_G
};

/// Throws Error when x is not strictly inside P.
template <int N>
GuilleminValue<N> guillemin(const FacetData<N>& P, const Eigen::Matrix<double, N, 1>& x) {
  using V = Eigen::Matrix<double, N, 1>;
  using M = Eigen::Matrix<double, N, N>;
  const std::size_t k = P.size();
  std::vector<double> l(k);
  for (std::size_t i = 0; i < k; ++i) {
    l[i] = P.ell(i, x);
    if (!(l[i] > 0)) throw Error("point is not strictly inside the polytope");
  }
  GuilleminValue<N> g;
  g.grad = V::Zero();
  g.hess = M::Zero();
  V vsum = V::Zero();
  double sum_log_extra = 0, sum_log = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double lg = std::log(l[i]);
    g.value += l[i] * lg;
    g.grad += P.normals[i] * (lg + 1);
    g.hess += P.normals[i] * P.normals[i].transpose() / l[i];
    vsum += P.normals[i];
    sum_log_extra += (P.offsets[i] - 1) * lg;
    sum_log += lg;
  }
  auto prod_except = [&](std::size_t a, std::size_t b) {
    double p = 1;
    for (std::size_t j = 0; j < k; ++j)
      if (j != a && j != b) p *= l[j];
    return p;
  };
  double Q = 0;
  g.inverse = M::Zero();
  if constexpr (N == 1) {
    for (std::size_t i = 0; i < k; ++i) {
      double p = prod_except(i, i);
      Q += P.normals[i][0] * P.normals[i][0] * p;
    }
    double all = 1;
    for (double li : l) all *= li;
    g.inverse(0, 0) = all / Q;
  } else {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        double d = P.normals[i][0] * P.normals[j][1] - P.normals[i][1] * P.normals[j][0];
        Q += d * d * prod_except(i, j);
      }
    for (std::size_t i = 0; i < k; ++i) {
      V perp(-P.normals[i][1], P.normals[i][0]);
      g.inverse += prod_except(i, i) * perp * perp.transpose();
    }
    g.inverse /= Q;
  }
  g.log_det = std::log(Q) - sum_log;
  g.abreu = std::log(Q) + sum_log_extra - vsum.dot(x);
  return g;
}

}  // namespace toricflow
