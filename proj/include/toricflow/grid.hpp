#pragma once

// Lattice-aligned quadrature grid on a reflexive polytope.
//
// Nodes are the points of the lattice hZ^n (h = 1/m) strictly inside P, so
// every node has min_i l_i >= h. Interior weights integrate the piecewise
// multilinear interpolant of the nodal values, with values at non-node cell
// corners taken from the nearest node; the weights are positive and sum to
// vol(P) up to rounding. Each facet carries a trapezoid rule in sigma-measure
// whose values are extrapolated linearly from two nodes along an inward
// lattice direction.
//
// Derivative stencils are fourth order, built from line stencils along a
// unimodular lattice basis d1, d2 and a third direction d1 +- d2 that
// recovers the mixed derivative. Lines are central away from the boundary
// and one-sided (most centred available window) near it.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/polytope.hpp"

namespace toricflow {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;
template <int N>
using LatticePoint = std::array<long long, N>;

/// Contribution of one node value to the gradient and Hessian at a node.
template <int N>
struct StencilEntry {
  int col;
  Vec<N> grad;
  Mat<N> hess;
};

/// One point of a facet quadrature rule.
template <int N>
struct BoundaryNode {
  std::size_t facet;
  Vec<N> x;
  double weight;
  int near;  // node at distance h along the inward direction
  int far;   // node at distance 2h
};

template <int N>
class QuadratureGrid {
  static_assert(N == 1 || N == 2, "dimensions 1 and 2 only");

 public:
  /// `resolution` is the number of lattice steps across the widest side of
  /// the bounding box, rounded up so that h = 1/m for an integer m.
  QuadratureGrid(const ReflexivePolytope& p, int resolution) {
    if (p.dimension() != N) throw GridError("polytope dimension does not match the grid");
    if (resolution < 16) throw GridError("resolution must be at least 16");
    auto [blo, bhi] = p.integer_bounding_box();
    long long width = 0;
    for (int a = 0; a < N; ++a) width = std::max(width, bhi[a] - blo[a]);
    m_ = (resolution + width - 1) / width;
    h_ = 1.0 / double(m_);
    for (int a = 0; a < N; ++a) {
      lo_[a] = blo[a] * m_;
      extent_[a] = (bhi[a] - blo[a]) * m_ + 1;
    }
    for (const auto& f : p.facets()) {
      Vec<N> v;
      for (int a = 0; a < N; ++a) v[a] = double(f.normal[a]);
      normals_.push_back(v);
      lattice_normals_.push_back(f.normal);
      offsets_.push_back(f.offset);
    }
    volume_ = to_double(moments(p).volume);
    enumerate_nodes();
    if (x_.empty()) throw GridError("resolution too small: no interior nodes");
    build_weights();
    build_boundary(p);
    build_stencils();
  }

  int dimension() const { return N; }
  double h() const { return h_; }
  long long m() const { return m_; }
  std::size_t size() const { return x_.size(); }
  double volume() const { return volume_; }
  std::size_t facet_count() const { return normals_.size(); }

  const std::vector<Vec<N>>& points() const { return x_; }
  const Vec<N>& point(std::size_t i) const { return x_[i]; }
  const LatticePoint<N>& lattice(std::size_t i) const { return lattice_[i]; }
  const std::vector<double>& weights() const { return w_; }
  const std::vector<BoundaryNode<N>>& boundary() const { return boundary_; }
  const std::vector<StencilEntry<N>>& stencil(std::size_t i) const { return stencils_[i]; }
  const Vec<N>& normal(std::size_t k) const { return normals_[k]; }

  /// l_k at node i, exact in units of h.
  double ell(std::size_t i, std::size_t k) const {
    return double(lattice_ell(lattice_[i], k)) * h_;
  }

  /// Node index at a lattice point, -1 if the point is not a node.
  int node_at(const LatticePoint<N>& q) const {
    std::size_t flat = 0;
    for (int a = N - 1; a >= 0; --a) {
      long long c = q[a] - lo_[a];
      if (c < 0 || c >= extent_[a]) return -1;
      flat = flat * std::size_t(extent_[a]) + std::size_t(c);
    }
    return index_[flat];
  }

  double integrate(const std::vector<double>& f) const {
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w_[i] * f[i];
    return s;
  }

  /// Boundary integral in sigma-measure of a nodal field.
  double integrate_boundary(const std::vector<double>& f) const {
    double s = 0;
    for (const auto& b : boundary_) s += b.weight * (2 * f[b.near] - f[b.far]);
    return s;
  }

  Vec<N> gradient(const std::vector<double>& f, std::size_t i) const {
    Vec<N> g = Vec<N>::Zero();
    for (const auto& e : stencils_[i]) g += e.grad * f[e.col];
    return g;
  }

  Mat<N> hessian(const std::vector<double>& f, std::size_t i) const {
    Mat<N> H = Mat<N>::Zero();
    for (const auto& e : stencils_[i]) H += e.hess * f[e.col];
    return H;
  }

  /// Whether node i uses the central stencil.
  bool is_central(std::size_t i) const { return central_[i]; }

 private:
  long long lattice_ell(const LatticePoint<N>& q, std::size_t k) const {
    long long s = offsets_[k] * m_;
    for (int a = 0; a < N; ++a) s += lattice_normals_[k][a] * q[a];
    return s;
  }

  bool strictly_inside(const LatticePoint<N>& q) const {
    for (std::size_t k = 0; k < normals_.size(); ++k)
      if (lattice_ell(q, k) <= 0) return false;
    return true;
  }

  Vec<N> to_point(const LatticePoint<N>& q) const {
    Vec<N> x;
    for (int a = 0; a < N; ++a) x[a] = double(q[a]) * h_;
    return x;
  }

  void enumerate_nodes() {
    std::size_t total = 1;
    for (int a = 0; a < N; ++a) total *= std::size_t(extent_[a]);
    index_.assign(total, -1);
    LatticePoint<N> q;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t r = flat;
      for (int a = 0; a < N; ++a) {
        q[a] = lo_[a] + static_cast<long long>(r % std::size_t(extent_[a]));
        r /= std::size_t(extent_[a]);
      }
      if (!strictly_inside(q)) continue;
      index_[flat] = int(x_.size());
      lattice_.push_back(q);
      x_.push_back(to_point(q));
    }
  }

  // Nearest node to a lattice point (used for cell corners that are not
  // nodes). Searches growing shells; ties broken by scan order.
  int nearest_node(const LatticePoint<N>& q) const {
    int direct = node_at(q);
    if (direct >= 0) return direct;
    for (long long r = 1; r <= 8; ++r) {
      int best = -1;
      long long best_d = std::numeric_limits<long long>::max();
      LatticePoint<N> c;
      if constexpr (N == 1) {
        for (long long s : {-r, r}) {
          c[0] = q[0] + s;
          int k = node_at(c);
          if (k >= 0 && s * s < best_d) best = k, best_d = s * s;
        }
      } else {
        for (long long dx = -r; dx <= r; ++dx)
          for (long long dy = -r; dy <= r; ++dy) {
            if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
            c = {q[0] + dx, q[1] + dy};
            int k = node_at(c);
            long long d = dx * dx + dy * dy;
            if (k >= 0 && d < best_d) best = k, best_d = d;
          }
      }
      if (best >= 0) return best;
    }
    throw GridError("cell corner has no nearby interior node");
  }

  double ell_at(const Vec<N>& x, std::size_t k) const { return normals_[k].dot(x) + double(offsets_[k]); }

  void build_weights() {
    w_.assign(x_.size(), 0.0);
    if constexpr (N == 1) {
      for (long long c = lo_[0]; c + 1 < lo_[0] + extent_[0]; ++c) {
        double a = double(c) * h_, b = double(c + 1) * h_;
        for (std::size_t k = 0; k < normals_.size(); ++k) {
          double root = -double(offsets_[k]) / normals_[k][0];
          if (normals_[k][0] > 0) a = std::max(a, root);
          else b = std::min(b, root);
        }
        if (!(b > a)) continue;
        // Integrals of the two hat functions over [a, b] within the cell.
        auto s = [&](double x) { return (x - double(c) * h_) / h_; };
        double sa = s(a), sb = s(b);
        double right = h_ * (sb * sb - sa * sa) / 2;
        double left = h_ * (sb - sa) - right;
        w_[nearest_node({c})] += left;
        w_[nearest_node({c + 1})] += right;
      }
    } else {
      for (long long cx = lo_[0]; cx + 1 < lo_[0] + extent_[0]; ++cx) {
        for (long long cy = lo_[1]; cy + 1 < lo_[1] + extent_[1]; ++cy) {
          std::vector<Vec<2>> poly = {to_point({cx, cy}), to_point({cx + 1, cy}),
                                      to_point({cx + 1, cy + 1}), to_point({cx, cy + 1})};
          for (std::size_t k = 0; k < normals_.size() && poly.size() >= 3; ++k) poly = clip(poly, k);
          if (poly.size() < 3) continue;
          Vec<2> origin = to_point({cx, cy});
          std::array<double, 4> acc{0, 0, 0, 0};
          auto basis = [&](const Vec<2>& x, std::array<double, 4>& out, double scale) {
            double s = (x[0] - origin[0]) / h_, t = (x[1] - origin[1]) / h_;
            out[0] += scale * (1 - s) * (1 - t);
            out[1] += scale * s * (1 - t);
            out[2] += scale * s * t;
            out[3] += scale * (1 - s) * t;
          };
          for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
            const Vec<2>& A = poly[0];
            const Vec<2>& B = poly[i];
            const Vec<2>& C = poly[i + 1];
            double area = 0.5 * ((B - A)[0] * (C - A)[1] - (B - A)[1] * (C - A)[0]);
            if (area <= 0) continue;
            // Edge-midpoint rule, exact for the quadratic bilinear basis.
            basis(0.5 * (A + B), acc, area / 3);
            basis(0.5 * (B + C), acc, area / 3);
            basis(0.5 * (C + A), acc, area / 3);
          }
          const std::array<LatticePoint<2>, 4> corners = {
              LatticePoint<2>{cx, cy}, {cx + 1, cy}, {cx + 1, cy + 1}, {cx, cy + 1}};
          for (int c = 0; c < 4; ++c)
            if (acc[c] != 0) w_[nearest_node(corners[c])] += acc[c];
        }
      }
    }
  }

  std::vector<Vec<2>> clip(const std::vector<Vec<2>>& poly, std::size_t k) const {
    std::vector<Vec<2>> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec<2>& p = poly[i];
      const Vec<2>& q = poly[(i + 1) % n];
      double sp = ell_at(p, k), sq = ell_at(q, k);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    return out;
  }

  // Inward lattice direction d from boundary point q with both q + d and
  // q + 2d nodes, preferring <v, d> = 1 and short d.
  std::pair<int, int> inward_pair(const LatticePoint<N>& q, std::size_t k) const {
    int best_near = -1, best_far = -1;
    long long best_score = std::numeric_limits<long long>::max();
    const long long R = 3;
    auto consider = [&](const LatticePoint<N>& d) {
      long long vd = 0, len = 0;
      for (int a = 0; a < N; ++a) vd += lattice_normals_[k][a] * d[a], len += d[a] * d[a];
      if (vd <= 0) return;
      LatticePoint<N> q1, q2;
      for (int a = 0; a < N; ++a) q1[a] = q[a] + d[a], q2[a] = q[a] + 2 * d[a];
      int n1 = node_at(q1), n2 = node_at(q2);
      if (n1 < 0 || n2 < 0) return;
      long long score = (vd - 1) * 1000 + len;
      if (score < best_score) best_score = score, best_near = n1, best_far = n2;
    };
    if constexpr (N == 1) {
      for (long long dx = -R; dx <= R; ++dx) consider({dx});
    } else {
      for (long long dx = -R; dx <= R; ++dx)
        for (long long dy = -R; dy <= R; ++dy) consider({dx, dy});
    }
    if (best_near < 0) throw GridError("boundary point without an inward node pair");
    return {best_near, best_far};
  }

  void build_boundary(const ReflexivePolytope& p) {
    const auto& vs = p.vertices();
    for (std::size_t k = 0; k < normals_.size(); ++k) {
      const auto& [ia, ib] = p.facet_vertices()[k];
      if constexpr (N == 1) {
        if (!is_integer(vs[ia][0])) throw GridError("vertex is not a lattice point");
        LatticePoint<1> q = {vs[ia][0].convert_to<long long>() * m_};
        auto [n1, n2] = inward_pair(q, k);
        boundary_.push_back({k, to_point(q), 1.0, n1, n2});
      } else {
        LatticePoint<2> a, b;
        for (int c = 0; c < 2; ++c) {
          if (!is_integer(vs[ia][c]) || !is_integer(vs[ib][c]))
            throw GridError("vertex is not a lattice point");
          a[c] = vs[ia][c].convert_to<long long>() * m_;
          b[c] = vs[ib][c].convert_to<long long>() * m_;
        }
        IntVector v = detail::primitive(lattice_normals_[k]);
        long long ex = -v[1], ey = v[0];
        long long steps = ex != 0 ? (b[0] - a[0]) / ex : (b[1] - a[1]) / ey;
        long long sgn = steps < 0 ? -1 : 1;
        steps *= sgn;
        for (long long j = 0; j <= steps; ++j) {
          LatticePoint<2> q = {a[0] + sgn * j * ex, a[1] + sgn * j * ey};
          double wt = h_ * ((j == 0 || j == steps) ? 0.5 : 1.0);
          auto [n1, n2] = inward_pair(q, k);
          boundary_.push_back({k, to_point(q), wt, n1, n2});
        }
      }
    }
  }

  // Line stencil along lattice direction d at node i: coefficient maps for
  // the directional first derivative <grad, d> and second derivative d^T H d,
  // both fourth order. Central five-point windows where available, otherwise
  // the most centred window of consecutive nodes (five points for the first
  // derivative, six for the second).
  struct Line {
    std::map<int, double> first, second;
    bool central = false;
    int skew = 0;  // 0 central, 1 nodes on both sides, 2 one side only
  };

  static const std::vector<double>& fd_weights(int lo, int count, int derivative) {
    // All windows used by line_stencil, built once (thread-safe static init).
    static const std::map<std::array<int, 3>, std::vector<double>> table = [] {
      std::map<std::array<int, 3>, std::vector<double>> t;
      for (int c = 5; c <= 6; ++c)
        for (int l = -(c - 1); l <= 0; ++l)
          for (int der = 1; der <= 2; ++der) t[{l, c, der}] = solve_weights(l, c, der);
      return t;
    }();
    return table.at({lo, count, derivative});
  }

  static std::vector<double> solve_weights(int lo, int count, int derivative) {
    Eigen::MatrixXd V(count, count);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
    for (int p = 0; p < count; ++p)
      for (int k = 0; k < count; ++k) V(p, k) = std::pow(double(lo + k), p);
    rhs[derivative] = derivative == 2 ? 2.0 : 1.0;
    Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    return std::vector<double>(w.data(), w.data() + count);
  }

  bool line_stencil(std::size_t i, const LatticePoint<N>& d, Line& out) const {
    constexpr int kReach = 6;
    auto at = [&](long long k) {
      LatticePoint<N> q;
      for (int a = 0; a < N; ++a) q[a] = lattice_[i][a] + k * d[a];
      return node_at(q);
    };
    int a = 0, b = 0;
    while (a > -kReach && at(a - 1) >= 0) --a;
    while (b < kReach && at(b + 1) >= 0) ++b;
    out = Line{};
    out.central = a <= -2 && b >= 2;
    out.skew = out.central ? 0 : (a < 0 && b > 0 ? 1 : 2);
    auto window = [&](int count) {
      int best = std::numeric_limits<int>::min();
      for (int lo = std::max(a, -(count - 1)); lo <= std::min(0, b - count + 1); ++lo)
        if (best == std::numeric_limits<int>::min() || std::abs(2 * lo + count - 1) < std::abs(2 * best + count - 1))
          best = lo;
      return best;
    };
    int lo1 = out.central ? -2 : window(5);
    int n2 = out.central ? 5 : 6;
    int lo2 = out.central ? -2 : window(6);
    if (lo1 == std::numeric_limits<int>::min() || lo2 == std::numeric_limits<int>::min()) return false;
    const auto& w1 = fd_weights(lo1, 5, 1);
    const auto& w2 = fd_weights(lo2, n2, 2);
    for (int k = 0; k < 5; ++k)
      if (w1[k] != 0) out.first[at(lo1 + k)] += w1[k] / h_;
    for (int k = 0; k < n2; ++k)
      if (w2[k] != 0) out.second[at(lo2 + k)] += w2[k] / (h_ * h_);
    return true;
  }

  void build_stencils() {
    stencils_.resize(x_.size());
    central_.assign(x_.size(), false);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if constexpr (N == 1) {
        Line l;
        if (!line_stencil(i, {1}, l)) throw GridError("node without a usable stencil");
        central_[i] = l.central;
        std::map<int, StencilEntry<1>> merged;
        for (auto [col, c] : l.first) entry(merged, col).grad[0] += c;
        for (auto [col, c] : l.second) entry(merged, col).hess(0, 0) += c;
        for (auto& [col, e] : merged) stencils_[i].push_back(e);
      } else {
        build_stencil_2d(i);
      }
    }
  }

  static StencilEntry<N>& entry(std::map<int, StencilEntry<N>>& m, int col) {
    auto it = m.find(col);
    if (it == m.end()) it = m.emplace(col, StencilEntry<N>{col, Vec<N>::Zero(), Mat<N>::Zero()}).first;
    return it->second;
  }

  void build_stencil_2d(std::size_t i) {
    std::map<int, StencilEntry<N>> merged;
    {
      static const std::array<LatticePoint<2>, 8> dirs = {
          LatticePoint<2>{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}, {1, 2}, {2, -1}, {1, -2}};
      long long best_score = std::numeric_limits<long long>::max();
      Line b1, b2, b3;
      LatticePoint<2> bd1{}, bd2{};
      int bsign = 0;
      for (std::size_t a = 0; a < dirs.size(); ++a) {
        for (std::size_t b = a + 1; b < dirs.size(); ++b) {
          const auto& d1 = dirs[a];
          const auto& d2 = dirs[b];
          long long det = d1[0] * d2[1] - d1[1] * d2[0];
          if (det != 1 && det != -1) continue;
          Line l1, l2;
          if (!line_stencil(i, d1, l1) || !line_stencil(i, d2, l2)) continue;
          for (int sign : {1, -1}) {
            LatticePoint<2> d3 = {d1[0] + sign * d2[0], d1[1] + sign * d2[1]};
            Line l3;
            if (!line_stencil(i, d3, l3)) continue;
            long long one_sided = l1.skew + l2.skew + l3.skew;
            long long len = d1[0] * d1[0] + d1[1] * d1[1] + d2[0] * d2[0] + d2[1] * d2[1] +
                            d3[0] * d3[0] + d3[1] * d3[1];
            long long score = one_sided * 1000 + len;
            if (score < best_score) {
              best_score = score;
              b1 = l1, b2 = l2, b3 = l3;
              bd1 = d1, bd2 = d2;
              bsign = sign;
            }
          }
        }
      }
      if (bsign == 0) throw GridError("node without a usable stencil");
      central_[i] = b1.central && b2.central && b3.central;
      // gvec = B^T grad, T = B^T H B with B = [d1 d2].
      Mat<2> B;
      B << double(bd1[0]), double(bd2[0]), double(bd1[1]), double(bd2[1]);
      Mat<2> Binv = B.inverse();
      Mat<2> BinvT = Binv.transpose();
      auto add_grad = [&](const Line& l, int which) {
        for (auto [col, c] : l.first) entry(merged, col).grad += BinvT.col(which) * c;
      };
      add_grad(b1, 0);
      add_grad(b2, 1);
      // Contribution of T entries to H = B^{-T} T B^{-1}.
      auto add_T = [&](const std::map<int, double>& coeffs, int r, int s, double scale) {
        Mat<2> E = Mat<2>::Zero();
        E(r, s) = 1;
        E(s, r) = 1;
        Mat<2> G = BinvT * E * Binv;
        for (auto [col, c] : coeffs) entry(merged, col).hess += G * (c * scale);
      };
      // T11 = s1, T22 = s2; T12 = (s3 - s1 - s2)/2 for d1 + d2 and
      // (s1 + s2 - s3)/2 for d1 - d2.
      add_T(b1.second, 0, 0, 1.0);
      add_T(b2.second, 1, 1, 1.0);
      double sg = double(bsign);
      add_T(b3.second, 0, 1, 0.5 * sg);
      add_T(b1.second, 0, 1, -0.5 * sg);
      add_T(b2.second, 0, 1, -0.5 * sg);
    }
    for (auto& [col, e] : merged) stencils_[i].push_back(e);
  }

  long long m_ = 1;
  double h_ = 1;
  double volume_ = 0;
  LatticePoint<N> lo_{};
  std::array<long long, N> extent_{};
  std::vector<Vec<N>> normals_;
  std::vector<IntVector> lattice_normals_;
  std::vector<long long> offsets_;
  std::vector<int> index_;
  std::vector<LatticePoint<N>> lattice_;
  std::vector<Vec<N>> x_;
  std::vector<double> w_;
  std::vector<BoundaryNode<N>> boundary_;
  std::vector<std::vector<StencilEntry<N>>> stencils_;
  std::vector<bool> central_;
};

}  // namespace toricflow
