#pragma once

// Heuristic semistability scan over single-crease PL functions, and the
// consistency check between a scan verdict and a flow run.
//
// A "no-violation-found" verdict only says the scanned family is
// nonnegative; it certifies nothing.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/polytope.hpp"

namespace toricflow {

enum class Verdict { kUnstable, kNoViolationFound };

inline const char* to_string(Verdict v) { return v == Verdict::kUnstable ? "unstable" : "no-violation-found"; }

struct StabilityVerdict {
  std::string polytope;
  RationalVector futaki;
  bool futaki_zero = true;
  Rational crease_min = 0;
  PiecewiseLinearConvex witness;
  std::string witness_text;
  std::size_t evaluated = 0;
  Verdict verdict = Verdict::kNoViolationFound;
};

namespace detail {

inline std::string describe(const IntVector& a, const Rational& c, bool affine) {
  std::string s = affine ? "affine <(" : "max(0, <(";
  for (std::size_t i = 0; i < a.size(); ++i) s += (i ? "," : "") + std::to_string(a[i]);
  s += "), x>";
  if (!affine) s += " - " + to_string(c) + ")";
  return s;
}

// Primitive integer vectors with max-norm <= r (both signs).
inline std::vector<IntVector> primitive_directions(int n, int r) {
  std::vector<IntVector> out;
  if (n == 1) return {{1}, {-1}};
  for (long long a = -r; a <= r; ++a)
    for (long long b = -r; b <= r; ++b)
      if ((a != 0 || b != 0) && std::gcd(a, b) == 1) out.push_back({a, b});
  return out;
}

}  // namespace detail

/// L_P on max(0, <a, x> - c) for primitive a with |a|_inf <= family_size and
/// c at the midpoints of a 64-cell subdivision of [min_P <a,x>, max_P <a,x>],
/// plus the affines +-x_k.
inline StabilityVerdict scan(const ReflexivePolytope& P, int family_size) {
  if (family_size < 1) throw Error("family size must be at least 1");
  StabilityVerdict v;
  v.polytope = P.name();
  v.futaki = futaki_character(P);
  v.futaki_zero = is_zero(v.futaki);
  const int n = P.dimension();
  bool have = false;
  auto consider = [&](const PiecewiseLinearConvex& f, const Rational& value, std::string text) {
    ++v.evaluated;
    if (!have || value < v.crease_min) {
      have = true;
      v.crease_min = value;
      v.witness = f;
      v.witness_text = std::move(text);
    }
  };
  for (int k = 0; k < n; ++k)
    for (int sgn : {1, -1}) {
      IntVector a(n, 0);
      a[k] = sgn;
      RationalVector e(n, Rational(0));
      e[k] = sgn;
      // L_P(+-x_k) = +-Fut_k exactly.
      consider(PiecewiseLinearConvex::affine(e), sgn * v.futaki[k], detail::describe(a, 0, true));
    }
  constexpr int kOffsets = 64;
  for (const auto& a : detail::primitive_directions(n, family_size)) {
    RationalVector ar(a.begin(), a.end());
    Rational lo = detail::dot(a, P.vertices().front()), hi = lo;
    for (const auto& x : P.vertices()) {
      Rational s = detail::dot(a, x);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    for (int j = 0; j < kOffsets; ++j) {
      Rational c = lo + (hi - lo) * Rational(2 * j + 1, 2 * kOffsets);
      auto f = PiecewiseLinearConvex::crease(ar, c);
      consider(f, donaldson_functional(P, f), detail::describe(a, c, false));
    }
  }
  v.verdict = (v.crease_min < 0 || !v.futaki_zero) ? Verdict::kUnstable : Verdict::kNoViolationFound;
  return v;
}

/// What the consistency check needs from a flow run.
struct FlowEvidence {
  std::string polytope;
  double Y0 = 0;
  double tail_min_Y = 0;
  bool decay_accepted = false;
  bool log_bound_violated = false;
};

struct Consistency {
  bool consistent = true;
  bool y_to_zero = false;
  std::vector<std::string> flags;
};

/// Y is taken to reach zero when the exponential fit is accepted or the tail
/// minimum drops below 1e-3 Y(0).
inline Consistency crosscheck_flow(const StabilityVerdict& v, const FlowEvidence& e) {
  if (v.polytope != e.polytope)
    throw Error("verdict for '" + v.polytope + "' checked against a run on '" + e.polytope + "'");
  Consistency c;
  c.y_to_zero = e.decay_accepted || e.tail_min_Y < 1e-3 * e.Y0;
  if (!v.futaki_zero && c.y_to_zero) {
    c.consistent = false;
    c.flags.push_back("nonzero Futaki character but Y tends to zero");
  }
  if (v.verdict == Verdict::kNoViolationFound && v.futaki_zero && e.log_bound_violated) {
    c.consistent = false;
    c.flags.push_back("no violation found but M decreases faster than any log bound");
  }
  return c;
}

}  // namespace toricflow
