#pragma once

// Exact combinatorics and moment arithmetic of reflexive Delzant polytopes
// in dimension one and two. A polytope is the set
//
//   P = { x : l_i(x) = <v_i, x> + o_i >= 0 },
//
// with integer normals v_i and offsets o_i (reflexive polytopes have o_i = 1).
// All arithmetic is exact rational. The boundary measure d(sigma) on the facet
// {l_i = 0} is the Lebesgue measure rescaled so that d(sigma) ^ dl_i = d(mu),
// which on a lattice edge is the lattice length. With that convention
//
//   int_{dP} F d(sigma) = int_P (n F + x . grad F) d(mu)
//
// for every reflexive P, and the Donaldson functional
//   L_P(F) = int_{dP} F d(sigma) - n int_P F d(mu)
// reduces to int_P x . grad F d(mu).

#include <algorithm>
#include <cstddef>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "toricflow/errors.hpp"

namespace toricflow {

using Rational = boost::multiprecision::cpp_rational;
using RationalVector = std::vector<Rational>;
using IntVector = std::vector<long long>;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

inline bool is_integer(const Rational& r) {
  return boost::multiprecision::denominator(r) == 1;
}

struct Facet {
  IntVector normal;
  long long offset = 1;
};

namespace detail {

inline Rational dot(const IntVector& v, const RationalVector& x) {
  Rational s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += Rational(v[i]) * x[i];
  return s;
}

inline Rational dot(const RationalVector& a, const RationalVector& b) {
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline long long gcd_all(const IntVector& v) {
  long long g = 0;
  for (long long c : v) g = std::gcd(g, c < 0 ? -c : c);
  return g;
}

inline Rational cross(const RationalVector& a, const RationalVector& b) {
  return a[0] * b[1] - a[1] * b[0];
}

inline RationalVector sub(const RationalVector& a, const RationalVector& b) {
  RationalVector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

// Angular order around the origin starting at the positive x axis.
inline bool angle_less(const RationalVector& a, const RationalVector& b) {
  auto half = [](const RationalVector& p) {
    return (p[1] > 0 || (p[1] == 0 && p[0] > 0)) ? 0 : 1;
  };
  int ha = half(a), hb = half(b);
  if (ha != hb) return ha < hb;
  return cross(a, b) > 0;
}

/// Convex region with exact rational vertices: an interval {lo, hi} in one
/// dimension, a counter-clockwise polygon in two. Empty when `vertices` is.
struct Region {
  int dim = 0;
  std::vector<RationalVector> vertices;

  bool empty() const { return vertices.size() < static_cast<std::size_t>(dim + 1); }
};

/// Keeps the part of `r` where <c, x> + d >= 0.
inline Region clip(const Region& r, const RationalVector& c, const Rational& d) {
  Region out{r.dim, {}};
  if (r.empty()) return out;
  if (r.dim == 1) {
    Rational lo = r.vertices[0][0], hi = r.vertices[1][0];
    if (c[0] == 0) {
      if (d >= 0) out = r;
      return out;
    }
    Rational root = -d / c[0];
    if (c[0] > 0) lo = std::max(lo, root);
    else hi = std::min(hi, root);
    if (lo < hi) out.vertices = {{lo}, {hi}};
    return out;
  }
  const auto& vs = r.vertices;
  const std::size_t k = vs.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& p = vs[i];
    const auto& q = vs[(i + 1) % k];
    Rational sp = dot(c, p) + d;
    Rational sq = dot(c, q) + d;
    if (sp >= 0) out.vertices.push_back(p);
    if ((sp >= 0) != (sq >= 0)) {
      Rational t = sp / (sp - sq);
      out.vertices.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  // Drop repeated points produced by vertices lying on the cut line.
  std::vector<RationalVector> dedup;
  for (auto& v : out.vertices)
    if (dedup.empty() || dedup.back() != v) dedup.push_back(std::move(v));
  while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
  out.vertices = std::move(dedup);
  if (out.vertices.size() < 3) out.vertices.clear();
  return out;
}

inline Rational volume(const Region& r) {
  if (r.empty()) return 0;
  if (r.dim == 1) return r.vertices[1][0] - r.vertices[0][0];
  Rational a = 0;
  const std::size_t k = r.vertices.size();
  for (std::size_t i = 0; i < k; ++i) a += cross(r.vertices[i], r.vertices[(i + 1) % k]);
  return a / 2;
}

inline RationalVector first_moment(const Region& r) {
  RationalVector m(r.dim, Rational(0));
  if (r.empty()) return m;
  if (r.dim == 1) {
    const Rational& lo = r.vertices[0][0];
    const Rational& hi = r.vertices[1][0];
    m[0] = (hi * hi - lo * lo) / 2;
    return m;
  }
  const std::size_t k = r.vertices.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& p = r.vertices[i];
    const auto& q = r.vertices[(i + 1) % k];
    Rational w = cross(p, q);
    m[0] += (p[0] + q[0]) * w;
    m[1] += (p[1] + q[1]) * w;
  }
  m[0] /= 6;
  m[1] /= 6;
  return m;
}

}  // namespace detail

class ReflexivePolytope {
 public:
  ReflexivePolytope() = default;

  /// Derives the vertex list from the facets. Throws StructuralError for
  /// redundant facets, DegeneracyError for unbounded, empty or flat input and
  /// UnsupportedDimensionError outside n = 1, 2.
  ReflexivePolytope(int dimension, std::vector<Facet> facets, std::string name = {})
      : dim_(dimension), facets_(std::move(facets)), name_(std::move(name)) {
    if (dim_ < 1 || dim_ > 2)
      throw UnsupportedDimensionError("only dimensions 1 and 2 are supported, got " +
                                      std::to_string(dim_));
    for (std::size_t i = 0; i < facets_.size(); ++i) {
      if (facets_[i].normal.size() != static_cast<std::size_t>(dim_))
        throw StructuralError(StructuralError::Kind::kFacet, i,
                              "facet " + std::to_string(i) + " has a normal of wrong length");
      if (detail::gcd_all(facets_[i].normal) == 0)
        throw StructuralError(StructuralError::Kind::kFacet, i,
                              "facet " + std::to_string(i) + " has a zero normal");
    }
    if (dim_ == 1) derive_interval();
    else derive_polygon();
  }

  int dimension() const { return dim_; }
  const std::string& name() const { return name_; }
  const std::vector<Facet>& facets() const { return facets_; }
  /// Counter-clockwise in two dimensions, {lo, hi} in one.
  const std::vector<RationalVector>& vertices() const { return vertices_; }
  /// Facet indices incident to each vertex.
  const std::vector<std::vector<std::size_t>>& incidence() const { return incidence_; }
  /// Endpoints (start, end) of each facet in counter-clockwise order (n = 2),
  /// or (vertex, vertex) in one dimension.
  const std::vector<std::pair<std::size_t, std::size_t>>& facet_vertices() const {
    return facet_vertices_;
  }

  Rational ell(std::size_t i, const RationalVector& x) const {
    return detail::dot(facets_[i].normal, x) + Rational(facets_[i].offset);
  }

  bool contains(const RationalVector& x) const {
    for (std::size_t i = 0; i < facets_.size(); ++i)
      if (ell(i, x) < 0) return false;
    return true;
  }

  detail::Region region() const {
    detail::Region r{dim_, vertices_};
    return r;
  }

  /// Throws StructuralError naming the first given vertex that is not a
  /// vertex derived from the facets (or when the counts differ).
  void check_vertices(const std::vector<RationalVector>& given) const {
    for (std::size_t i = 0; i < given.size(); ++i) {
      if (std::find(vertices_.begin(), vertices_.end(), given[i]) == vertices_.end())
        throw StructuralError(StructuralError::Kind::kVertex, i,
                              "vertex " + std::to_string(i) + " is not a vertex of the facet data");
    }
    if (given.size() != vertices_.size())
      throw StructuralError(StructuralError::Kind::kVertex, given.size(),
                            "facet data has " + std::to_string(vertices_.size()) +
                                " vertices but " + std::to_string(given.size()) + " were listed");
  }

  /// Bounding box of the vertices, rounded outwards to integers.
  std::pair<IntVector, IntVector> integer_bounding_box() const {
    IntVector lo(dim_), hi(dim_);
    for (int a = 0; a < dim_; ++a) {
      Rational mn = vertices_[0][a], mx = vertices_[0][a];
      for (const auto& v : vertices_) {
        mn = std::min(mn, v[a]);
        mx = std::max(mx, v[a]);
      }
      lo[a] = floor_int(mn);
      hi[a] = -floor_int(-mx);
    }
    return {lo, hi};
  }

 private:
  static long long floor_int(const Rational& r) {
    using boost::multiprecision::cpp_int;
    cpp_int n = boost::multiprecision::numerator(r);
    cpp_int d = boost::multiprecision::denominator(r);
    cpp_int q = n / d;
    if (n < 0 && q * d != n) q -= 1;
    return q.convert_to<long long>();
  }

  void derive_interval() {
    std::optional<Rational> lo, hi;
    for (const auto& f : facets_) {
      Rational root = Rational(-f.offset) / Rational(f.normal[0]);
      if (f.normal[0] > 0) lo = lo ? std::max(*lo, root) : root;
      else hi = hi ? std::min(*hi, root) : root;
    }
    if (!lo || !hi) throw DegeneracyError("interval is unbounded");
    if (!(*lo < *hi)) throw DegeneracyError("interval is empty or a point");
    vertices_ = {{*lo}, {*hi}};
    incidence_.assign(2, {});
    facet_vertices_.assign(facets_.size(), {0, 0});
    for (std::size_t i = 0; i < facets_.size(); ++i) {
      Rational root = Rational(-facets_[i].offset) / Rational(facets_[i].normal[0]);
      std::size_t v = facets_[i].normal[0] > 0 ? 0 : 1;
      if (root != vertices_[v][0])
        throw StructuralError(StructuralError::Kind::kFacet, i,
                              "facet " + std::to_string(i) + " is redundant");
      incidence_[v].push_back(i);
      facet_vertices_[i] = {v, v};
    }
  }

  void derive_polygon() {
    const std::size_t k = facets_.size();
    if (k < 3) throw DegeneracyError("a polygon needs at least three facets");
    // Bounded iff consecutive normals (in angular order) turn by less than pi.
    std::vector<RationalVector> normals(k);
    for (std::size_t i = 0; i < k; ++i)
      normals[i] = {Rational(facets_[i].normal[0]), Rational(facets_[i].normal[1])};
    std::vector<RationalVector> sorted = normals;
    std::sort(sorted.begin(), sorted.end(), detail::angle_less);
    for (std::size_t i = 0; i < k; ++i) {
      if (detail::cross(sorted[i], sorted[(i + 1) % k]) <= 0 &&
          !(detail::cross(sorted[i], sorted[(i + 1) % k]) == 0 &&
            detail::dot(sorted[i], sorted[(i + 1) % k]) > 0))
        throw DegeneracyError("polygon is unbounded");
    }

    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const auto& a = facets_[i].normal;
        const auto& b = facets_[j].normal;
        long long det = a[0] * b[1] - a[1] * b[0];
        if (det == 0) continue;
        // a.x = -oa, b.x = -ob
        Rational oa = -facets_[i].offset, ob = -facets_[j].offset;
        RationalVector x = {(oa * b[1] - ob * a[1]) / Rational(det),
                            (a[0] * ob - b[0] * oa) / Rational(det)};
        if (!contains(x)) continue;
        if (std::find(vertices_.begin(), vertices_.end(), x) == vertices_.end())
          vertices_.push_back(std::move(x));
      }
    }
    if (vertices_.size() < 3) throw DegeneracyError("polygon is empty or flat");

    RationalVector centre(2, Rational(0));
    for (const auto& v : vertices_) {
      centre[0] += v[0];
      centre[1] += v[1];
    }
    centre[0] /= vertices_.size();
    centre[1] /= vertices_.size();
    std::sort(vertices_.begin(), vertices_.end(),
              [&](const RationalVector& p, const RationalVector& q) {
                return detail::angle_less(detail::sub(p, centre), detail::sub(q, centre));
              });
    if (detail::volume(region()) == 0) throw DegeneracyError("polygon has zero area");

    incidence_.assign(vertices_.size(), {});
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      for (std::size_t i = 0; i < k; ++i)
        if (ell(i, vertices_[v]) == 0) incidence_[v].push_back(i);

    facet_vertices_.assign(k, {0, 0});
    const std::size_t nv = vertices_.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::size_t> on;
      for (std::size_t v = 0; v < nv; ++v)
        if (ell(i, vertices_[v]) == 0) on.push_back(v);
      if (on.size() != 2)
        throw StructuralError(StructuralError::Kind::kFacet, i,
                              "facet " + std::to_string(i) + " is redundant");
      std::size_t a = on[0], b = on[1];
      // Counter-clockwise neighbours differ by one (cyclically).
      if ((a + 1) % nv == b) facet_vertices_[i] = {a, b};
      else facet_vertices_[i] = {b, a};
    }
  }

  int dim_ = 0;
  std::vector<Facet> facets_;
  std::string name_;
  std::vector<RationalVector> vertices_;
  std::vector<std::vector<std::size_t>> incidence_;
  std::vector<std::pair<std::size_t, std::size_t>> facet_vertices_;
};

struct ValidationReport {
  bool origin_interior = false;
  bool simple = false;
  bool delzant = false;
  bool reflexive = false;
  std::vector<std::string> failures;

  bool passed() const { return origin_interior && simple && delzant && reflexive; }
};

/// Checks origin interior, simplicity, the Delzant condition and reflexivity.
inline ValidationReport validate(const ReflexivePolytope& p) {
  ValidationReport rep;
  const int n = p.dimension();
  const auto& facets = p.facets();

  rep.origin_interior = true;
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (facets[i].offset <= 0) {
      rep.origin_interior = false;
      rep.failures.push_back("origin-interior: l_" + std::to_string(i) + "(0) = " +
                             std::to_string(facets[i].offset) + " <= 0");
    }
  }

  rep.simple = true;
  for (std::size_t v = 0; v < p.vertices().size(); ++v) {
    if (p.incidence()[v].size() != static_cast<std::size_t>(n)) {
      rep.simple = false;
      rep.failures.push_back("simple: vertex " + std::to_string(v) + " lies on " +
                             std::to_string(p.incidence()[v].size()) + " facets");
    }
  }

  rep.delzant = rep.simple;
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (detail::gcd_all(facets[i].normal) != 1) {
      rep.delzant = false;
      rep.failures.push_back("delzant: normal of facet " + std::to_string(i) +
                             " is not primitive");
    }
  }
  if (rep.simple) {
    for (std::size_t v = 0; v < p.vertices().size(); ++v) {
      const auto& inc = p.incidence()[v];
      long long det = 0;
      if (n == 1) det = facets[inc[0]].normal[0];
      else {
        const auto& a = facets[inc[0]].normal;
        const auto& b = facets[inc[1]].normal;
        det = a[0] * b[1] - a[1] * b[0];
      }
      if (det != 1 && det != -1) {
        rep.delzant = false;
        rep.failures.push_back("delzant: normals at vertex " + std::to_string(v) +
                               " have determinant " + std::to_string(det));
      }
    }
  }

  rep.reflexive = true;
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (facets[i].offset != 1) {
      rep.reflexive = false;
      rep.failures.push_back("reflexive: facet " + std::to_string(i) + " has offset " +
                             std::to_string(facets[i].offset));
    }
  }
  for (std::size_t v = 0; v < p.vertices().size(); ++v) {
    for (const auto& c : p.vertices()[v]) {
      if (!is_integer(c)) {
        rep.reflexive = false;
        rep.failures.push_back("reflexive: vertex " + std::to_string(v) +
                               " is not a lattice point");
        break;
      }
    }
  }
  return rep;
}

struct Moments {
  Rational volume;
  RationalVector first_moment;
  Rational boundary_volume;
  RationalVector boundary_first_moment;

  RationalVector barycenter() const {
    RationalVector b = first_moment;
    for (auto& c : b) c /= volume;
    return b;
  }
};

namespace detail {

inline IntVector primitive(const IntVector& v) {
  long long g = gcd_all(v);
  IntVector r = v;
  for (auto& c : r) c /= g;
  return r;
}

/// Sigma-length of the segment [a, b] on the facet with normal `normal`.
inline Rational sigma_length(const IntVector& normal, const RationalVector& a,
                             const RationalVector& b) {
  IntVector v = primitive(normal);
  // Primitive edge direction perpendicular to v.
  long long ex = -v[1], ey = v[0];
  Rational t = ex != 0 ? (b[0] - a[0]) / Rational(ex) : (b[1] - a[1]) / Rational(ey);
  return t < 0 ? Rational(-t) : t;
}

}  // namespace detail

/// Exact volume and first moments of P and of its boundary, by fan
/// triangulation and facet-by-facet summation.
inline Moments moments(const ReflexivePolytope& p) {
  Moments m;
  const int n = p.dimension();
  const auto& vs = p.vertices();
  m.first_moment.assign(n, Rational(0));
  m.boundary_first_moment.assign(n, Rational(0));
  if (n == 1) {
    m.volume = vs[1][0] - vs[0][0];
    m.first_moment[0] = (vs[1][0] * vs[1][0] - vs[0][0] * vs[0][0]) / 2;
    for (std::size_t i = 0; i < p.facets().size(); ++i) {
      const auto& x = vs[p.facet_vertices()[i].first];
      m.boundary_volume += 1;
      m.boundary_first_moment[0] += x[0];
    }
  } else {
    m.volume = 0;
    for (std::size_t i = 1; i + 1 < vs.size(); ++i) {
      Rational a = detail::cross(detail::sub(vs[i], vs[0]), detail::sub(vs[i + 1], vs[0])) / 2;
      m.volume += a;
      for (int c = 0; c < 2; ++c) m.first_moment[c] += a * (vs[0][c] + vs[i][c] + vs[i + 1][c]) / 3;
    }
    for (std::size_t i = 0; i < p.facets().size(); ++i) {
      const auto& [ia, ib] = p.facet_vertices()[i];
      Rational len = detail::sigma_length(p.facets()[i].normal, vs[ia], vs[ib]);
      m.boundary_volume += len;
      for (int c = 0; c < 2; ++c) m.boundary_first_moment[c] += len * (vs[ia][c] + vs[ib][c]) / 2;
    }
  }
  if (m.volume <= 0) throw DegeneracyError("polytope has zero volume");
  return m;
}

struct AffinePiece {
  RationalVector slope;
  Rational intercept;

  Rational operator()(const RationalVector& x) const { return detail::dot(slope, x) + intercept; }
  bool operator==(const AffinePiece&) const = default;
};

/// f(x) = max_k(<a_k, x> + b_k). Convex by construction.
class PiecewiseLinearConvex {
 public:
  PiecewiseLinearConvex() = default;
  explicit PiecewiseLinearConvex(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
    // Identical pieces would be counted twice by the region decomposition.
    std::vector<AffinePiece> unique;
    for (auto& p : pieces_)
      if (std::find(unique.begin(), unique.end(), p) == unique.end()) unique.push_back(p);
    pieces_ = std::move(unique);
  }

  static PiecewiseLinearConvex affine(RationalVector slope, Rational intercept = 0) {
    return PiecewiseLinearConvex({AffinePiece{std::move(slope), std::move(intercept)}});
  }

  /// max(0, <a, x> - c).
  static PiecewiseLinearConvex crease(const RationalVector& a, const Rational& c) {
    return PiecewiseLinearConvex(
        {AffinePiece{RationalVector(a.size(), Rational(0)), 0}, AffinePiece{a, -c}});
  }

  Rational operator()(const RationalVector& x) const {
    Rational best = pieces_.at(0)(x);
    for (std::size_t k = 1; k < pieces_.size(); ++k) best = std::max(best, pieces_[k](x));
    return best;
  }

  /// Adds the affine function <a, x> + b to every piece.
  PiecewiseLinearConvex plus_affine(const RationalVector& a, const Rational& b) const {
    std::vector<AffinePiece> out = pieces_;
    for (auto& p : out) {
      for (std::size_t i = 0; i < a.size(); ++i) p.slope[i] += a[i];
      p.intercept += b;
    }
    return PiecewiseLinearConvex(std::move(out));
  }

  const std::vector<AffinePiece>& pieces() const { return pieces_; }

 private:
  std::vector<AffinePiece> pieces_;
};

namespace detail {

/// Region of P where piece k attains the maximum.
inline Region piece_region(const ReflexivePolytope& p, const PiecewiseLinearConvex& f,
                           std::size_t k) {
  Region r = p.region();
  const auto& pk = f.pieces()[k];
  for (std::size_t j = 0; j < f.pieces().size() && !r.empty(); ++j) {
    if (j == k) continue;
    const auto& pj = f.pieces()[j];
    r = clip(r, sub(pk.slope, pj.slope), pk.intercept - pj.intercept);
  }
  return r;
}

}  // namespace detail

/// L_P(f) = int_{dP} f d(sigma) - n int_P f d(mu), evaluated exactly by
/// splitting P and each facet along the crease loci of f.
inline Rational donaldson_functional(const ReflexivePolytope& p, const PiecewiseLinearConvex& f) {
  const int n = p.dimension();
  Rational interior = 0;
  for (std::size_t k = 0; k < f.pieces().size(); ++k) {
    detail::Region r = detail::piece_region(p, f, k);
    if (r.empty()) continue;
    const auto& piece = f.pieces()[k];
    interior += detail::dot(piece.slope, detail::first_moment(r)) + piece.intercept * detail::volume(r);
  }

  Rational boundary = 0;
  const auto& vs = p.vertices();
  if (n == 1) {
    for (std::size_t i = 0; i < p.facets().size(); ++i) boundary += f(vs[p.facet_vertices()[i].first]);
  } else {
    for (std::size_t i = 0; i < p.facets().size(); ++i) {
      const auto& a = vs[p.facet_vertices()[i].first];
      const auto& b = vs[p.facet_vertices()[i].second];
      RationalVector d = detail::sub(b, a);
      std::vector<Rational> breaks = {0, 1};
      const auto& ps = f.pieces();
      for (std::size_t j = 0; j < ps.size(); ++j) {
        for (std::size_t l = j + 1; l < ps.size(); ++l) {
          RationalVector ds = detail::sub(ps[j].slope, ps[l].slope);
          Rational den = detail::dot(ds, d);
          if (den == 0) continue;
          Rational tau = -(detail::dot(ds, a) + ps[j].intercept - ps[l].intercept) / den;
          if (tau > 0 && tau < 1) breaks.push_back(tau);
        }
      }
      std::sort(breaks.begin(), breaks.end());
      breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
      Rational len = detail::sigma_length(p.facets()[i].normal, a, b);
      for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        Rational mid = (breaks[s] + breaks[s + 1]) / 2;
        RationalVector x = {a[0] + mid * d[0], a[1] + mid * d[1]};
        boundary += len * (breaks[s + 1] - breaks[s]) * f(x);
      }
    }
  }
  return boundary - Rational(n) * interior;
}

/// The same functional through its interior form sum_k <a_k, int_{R_k} x d(mu)>.
inline Rational donaldson_functional_interior_form(const ReflexivePolytope& p,
                                                   const PiecewiseLinearConvex& f) {
  Rational s = 0;
  for (std::size_t k = 0; k < f.pieces().size(); ++k) {
    detail::Region r = detail::piece_region(p, f, k);
    if (!r.empty()) s += detail::dot(f.pieces()[k].slope, detail::first_moment(r));
  }
  return s;
}

/// Toric Futaki character: k-th entry is L_P(x_k).
inline RationalVector futaki_character(const ReflexivePolytope& p) {
  const int n = p.dimension();
  RationalVector out(n);
  for (int k = 0; k < n; ++k) {
    RationalVector e(n, Rational(0));
    e[k] = 1;
    out[k] = donaldson_functional(p, PiecewiseLinearConvex::affine(e));
  }
  return out;
}

inline bool is_zero(const RationalVector& v) {
  return std::all_of(v.begin(), v.end(), [](const Rational& c) { return c == 0; });
}

inline std::vector<std::string> builtin_names() {
  return {"cp1", "cp2", "cp1xcp1", "dp1", "dp2", "dp3"};
}

/// Standard reflexive Delzant polytopes. dp_k is CP^2 blown up at k points.
inline ReflexivePolytope builtin(const std::string& name) {
  auto make = [&](int dim, std::vector<IntVector> normals) {
    std::vector<Facet> facets;
    for (auto& v : normals) facets.push_back(Facet{std::move(v), 1});
    return ReflexivePolytope(dim, std::move(facets), name);
  };
  if (name == "cp1") return make(1, {{1}, {-1}});
  if (name == "cp2") return make(2, {{1, 0}, {0, 1}, {-1, -1}});
  if (name == "cp1xcp1") return make(2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  if (name == "dp1") return make(2, {{1, 0}, {0, 1}, {-1, -1}, {0, -1}});
  if (name == "dp2") return make(2, {{1, 0}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1}});
  if (name == "dp3") return make(2, {{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1}});
  throw Error("unknown builtin polytope '" + name + "'");
}

inline bool is_builtin(const std::string& name) {
  auto names = builtin_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

// Polytope definition file:
//
//   # comment
//   name cp2
//   dimension 2
//   facet 1 0 1        <- normal components, then offset
//   vertex -1 -1       <- optional, cross-checked against the facets
//
// Vertex coordinates may be rationals written as p/q.

inline Rational parse_rational(const std::string& tok, std::size_t line) {
  try {
    auto slash = tok.find('/');
    if (slash == std::string::npos) {
      std::size_t pos = 0;
      long long v = std::stoll(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return Rational(v);
    }
    std::size_t p1 = 0, p2 = 0;
    std::string a = tok.substr(0, slash), b = tok.substr(slash + 1);
    long long num = std::stoll(a, &p1), den = std::stoll(b, &p2);
    if (p1 != a.size() || p2 != b.size() || den == 0) throw std::invalid_argument(tok);
    return Rational(num) / Rational(den);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a rational number, got '" + tok + "'");
  }
}

inline ReflexivePolytope read_polytope(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  std::optional<int> dim;
  std::string name;
  std::vector<Facet> facets;
  std::vector<std::size_t> facet_lines;
  std::vector<RationalVector> vertices;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (key == "name") {
      if (toks.size() != 1) throw ParseError(line_no, "'name' takes one token");
      name = toks[0];
    } else if (key == "dimension") {
      if (toks.size() != 1 || !is_integer(parse_rational(toks[0], line_no)))
        throw ParseError(line_no, "'dimension' takes one integer");
      dim = std::stoi(toks[0]);
      if (*dim < 1) throw ParseError(line_no, "dimension must be positive");
    } else if (key == "facet") {
      if (!dim) throw ParseError(line_no, "'facet' before 'dimension'");
      if (toks.size() != static_cast<std::size_t>(*dim + 1))
        throw ParseError(line_no, "'facet' needs " + std::to_string(*dim) +
                                      " normal components and an offset");
      Facet f;
      for (int i = 0; i <= *dim; ++i) {
        Rational r = parse_rational(toks[i], line_no);
        if (!is_integer(r)) throw ParseError(line_no, "facet entries must be integers");
        long long v = boost::multiprecision::numerator(r).convert_to<long long>();
        if (i < *dim) f.normal.push_back(v);
        else f.offset = v;
      }
      facets.push_back(std::move(f));
      facet_lines.push_back(line_no);
    } else if (key == "vertex") {
      if (!dim) throw ParseError(line_no, "'vertex' before 'dimension'");
      if (toks.size() != static_cast<std::size_t>(*dim))
        throw ParseError(line_no, "'vertex' needs " + std::to_string(*dim) + " coordinates");
      RationalVector v;
      for (const auto& t : toks) v.push_back(parse_rational(t, line_no));
      vertices.push_back(std::move(v));
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }
  if (!dim) throw ParseError(0, "missing 'dimension'");
  if (facets.empty()) throw ParseError(0, "no facets");
  ReflexivePolytope p(*dim, std::move(facets), name);
  if (!vertices.empty()) p.check_vertices(vertices);
  return p;
}

inline void write_polytope(std::ostream& out, const ReflexivePolytope& p) {
  out << "# toricflow polytope\n";
  if (!p.name().empty()) out << "name " << p.name() << "\n";
  out << "dimension " << p.dimension() << "\n";
  for (const auto& f : p.facets()) {
    out << "facet";
    for (auto c : f.normal) out << ' ' << c;
    out << ' ' << f.offset << "\n";
  }
  for (const auto& v : p.vertices()) {
    out << "vertex";
    for (const auto& c : v) out << ' ' << c;
    out << "\n";
  }
}

}  // namespace toricflow
