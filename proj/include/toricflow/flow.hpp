#pragma once

// Flow runs: configuration, the time loop with diagnostics, and the fits
// applied to the recorded series.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/functionals.hpp"
#include "toricflow/stepper.hpp"

namespace toricflow {

struct RunConfig {
  std::string polytope = "cp1";  // builtin name or path to a polytope file
  int resolution = 64;
  double dt = 1e-4;              // upper bound; the stable step may be smaller
  double t_max = 20;
  double record_interval = 0.01;
  double fit_window = 0.5;       // trailing fraction of [0, t_end] used by fits
  std::uint64_t seed = 0;
  int family_size = 3;
  double converge_tol = 1e-12;   // Y below this terminates as converged
  double stall_tol = 1e-10;      // sup of the non-affine part of d(psi)/dt
  std::vector<std::string> perturbation;  // raw lines of the [perturbation] section

  /// Expands the perturbation lines; random terms draw from the seed.
  Perturbation build_perturbation(int dimension) const {
    std::mt19937_64 rng(seed);
    Perturbation p;
    for (const auto& line : perturbation)
      for (auto& t : parse_perturbation_line(line, dimension, rng)) p.add(std::move(t));
    return p;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v, std::size_t line) {
  try {
    std::size_t pos = 0;
    T out;
    if constexpr (std::is_same_v<T, int>)
      out = std::stoi(v, &pos);
    else if constexpr (std::is_same_v<T, std::uint64_t>)
      out = std::stoull(v, &pos);
    else
      out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParseError(line, "'" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace detail

/// Flat `key = value` lines, '#' comments, and one optional [perturbation]
/// section whose lines are perturbation terms.
inline RunConfig read_config(std::istream& in) {
  RunConfig c;
  std::string raw;
  std::size_t line = 0;
  bool in_pert = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s != "[perturbation]") throw ParseError(line, "unknown section " + s);
      if (in_pert) throw ParseError(line, "duplicate [perturbation] section");
      in_pert = true;
      continue;
    }
    if (in_pert) {
      c.perturbation.push_back(s);
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    std::string key = detail::trim(s.substr(0, eq)), v = detail::trim(s.substr(eq + 1));
    if (v.empty()) throw ParseError(line, "missing value for '" + key + "'");
    if (key == "polytope") c.polytope = v;
    else if (key == "resolution") c.resolution = detail::parse_number<int>(key, v, line);
    else if (key == "dt") c.dt = detail::parse_number<double>(key, v, line);
    else if (key == "t_max") c.t_max = detail::parse_number<double>(key, v, line);
    else if (key == "record_interval") c.record_interval = detail::parse_number<double>(key, v, line);
    else if (key == "fit_window") c.fit_window = detail::parse_number<double>(key, v, line);
    else if (key == "seed") c.seed = detail::parse_number<std::uint64_t>(key, v, line);
    else if (key == "family_size") c.family_size = detail::parse_number<int>(key, v, line);
    else if (key == "converge_tol") c.converge_tol = detail::parse_number<double>(key, v, line);
    else if (key == "stall_tol") c.stall_tol = detail::parse_number<double>(key, v, line);
    else throw ParseError(line, "unknown key '" + key + "'");
  }
  return c;
}

/// Range checks that do not need the polytope.
inline void check_config(const RunConfig& c) {
  if (c.resolution < 16) throw ConfigError("resolution must be at least 16");
  if (!(c.dt > 0)) throw ConfigError("dt must be positive");
  if (!(c.t_max > 0)) throw ConfigError("t_max must be positive");
  if (!(c.record_interval > 0)) throw ConfigError("record_interval must be positive");
  if (!(c.fit_window > 0 && c.fit_window <= 1)) throw ConfigError("fit_window must lie in (0, 1]");
  if (c.family_size < 1) throw ConfigError("family_size must be at least 1");
  if (!(c.converge_tol > 0) || !(c.stall_tol > 0)) throw ConfigError("tolerances must be positive");
}

/// Builtin name, or a polytope file resolved relative to `base`.
inline ReflexivePolytope load_polytope(const std::string& source, const std::filesystem::path& base = {}) {
  if (is_builtin(source)) return builtin(source);
  std::filesystem::path p(source);
  if (p.is_relative() && !base.empty()) p = base / p;
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open polytope '" + source + "'");
  return read_polytope(in);
}

enum class RunStatus { kConverged, kStalled, kMaxTime, kAborted };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kStalled: return "stalled";
    case RunStatus::kMaxTime: return "max_time";
    case RunStatus::kAborted: return "aborted";
  }
  return "?";
}

template <int N>
struct RunResult {
  RunStatus status = RunStatus::kMaxTime;
  std::string message;
  std::vector<DiagnosticRecord> records;
  std::vector<double> nonaffine;  // per record: sup of the non-affine part of u
  SymplecticPotential<N> final_state;
  double t_end = 0;
  long long steps = 0;
  double h = 0;
  std::size_t nodes = 0;
};

/// sup_i |u_i - (a . x_i + b)| for the weighted least-squares affine fit.
template <int N>
double nonaffine_part(const QuadratureGrid<N>& g, const std::vector<double>& u) {
  Eigen::Matrix<double, N + 1, N + 1> A = Eigen::Matrix<double, N + 1, N + 1>::Zero();
  Eigen::Matrix<double, N + 1, 1> rhs = Eigen::Matrix<double, N + 1, 1>::Zero();
  for (std::size_t i = 0; i < g.size(); ++i) {
    Eigen::Matrix<double, N + 1, 1> phi;
    phi << g.point(i), 1.0;
    A += g.weights()[i] * phi * phi.transpose();
    rhs += g.weights()[i] * u[i] * phi;
  }
  Eigen::Matrix<double, N + 1, 1> c = A.ldlt().solve(rhs);
  double r = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Eigen::Matrix<double, N + 1, 1> phi;
    phi << g.point(i), 1.0;
    r = std::max(r, std::abs(u[i] - phi.dot(c)));
  }
  return r;
}

/// dY/dt <= 6(|Delta u| + |grad u|^2) Y: margin from each record to the next
/// (the last record reuses the preceding interval).
inline void fill_dY_bound_margins(std::vector<DiagnosticRecord>& rs) {
  for (std::size_t k = 0; k < rs.size(); ++k) {
    auto& r = rs[k];
    double bound = 6 * (r.norms.lap + r.norms.grad * r.norms.grad) * r.Y;
    double slope = 0;
    if (k + 1 < rs.size())
      slope = (rs[k + 1].Y - r.Y) / (rs[k + 1].t - r.t);
    else if (k > 0)
      slope = (r.Y - rs[k - 1].Y) / (r.t - rs[k - 1].t);
    r.dY_bound_margin = bound - slope;
  }
}

/// Runs the flow from f_G + psi_0 on P. Throws ConfigError when psi_0 breaks
/// convexity; later positivity failures abort the run with the series so far.
template <int N>
RunResult<N> run(const RunConfig& cfg, const ReflexivePolytope& P) {
  check_config(cfg);
  if (P.dimension() != N) throw Error("polytope dimension mismatch");
  const Perturbation pert = cfg.build_perturbation(N);
  auto disc = std::make_shared<const Discretization<N>>(P, cfg.resolution);
  auto sp0 = SymplecticPotential<N>::from(disc, pert);
  MetricSample<N> ms0;
  try {
    ms0 = ricci_potential(sp0);
  } catch (const PositivityError& e) {
    throw ConfigError(std::string("initial perturbation breaks convexity: ") + e.what());
  }
  Reference<N> ref{sp0, ms0, AnalyticPotential<N>(disc->facets(), pert)};

  RunResult<N> out;
  out.h = disc->grid().h();
  out.nodes = disc->size();
  auto state = FlowState<N>::initial(sp0);
  auto record = [&](const MetricSample<N>& ms, double dt) {
    out.records.push_back(diagnose(state.t, dt, state.sp, ms, ref));
    out.nonaffine.push_back(nonaffine_part(disc->grid(), ms.u));
  };
  record(ms0, 0.0);

  const long long n_records = std::max(1LL, (long long)std::ceil(cfg.t_max / cfg.record_interval - 1e-9));
  double cap = std::min(cfg.dt, stable_step(state.sp));
  out.status = RunStatus::kMaxTime;
  for (long long k = 1; k <= n_records; ++k) {
    const double target = std::min(cfg.t_max, k * cfg.record_interval);
    try {
      while (state.t < target - 1e-12) {
        if (state.steps % 10 == 0) cap = std::min(cfg.dt, stable_step(state.sp));
        // Equal substeps so the record time is hit without a sliver step.
        double remain = target - state.t;
        double dt = remain / std::ceil(remain / cap - 1e-9);
        state = step(state, dt);
      }
      if (!(state.t < target - 1e-12)) state.t = target;
      record(ricci_potential(state.sp), state.dt);
    } catch (const PositivityError& e) {
      out.status = RunStatus::kAborted;
      out.message = e.what();
      break;
    }
    const auto& last = out.records.back();
    if (last.Y < cfg.converge_tol) {
      out.status = RunStatus::kConverged;
      break;
    }
    // Stalled: the velocity is affine (a soliton-type drift) to tolerance and
    // Y has stopped changing.
    if (out.records.size() >= 2) {
      const auto& prev = out.records[out.records.size() - 2];
      double rel = std::abs(last.Y - prev.Y) / std::max(last.Y, std::numeric_limits<double>::min());
      if (out.nonaffine.back() < cfg.stall_tol && rel < cfg.stall_tol) {
        out.status = RunStatus::kStalled;
        break;
      }
    }
  }
  fill_dY_bound_margins(out.records);
  out.final_state = state.sp;
  out.t_end = state.t;
  out.steps = state.steps;
  return out;
}

// ---------------------------------------------------------------------------
// Fits.

struct DecayFit {
  double rate = 0;
  double r2 = 0;
  std::size_t points = 0;
  bool accepted = false;  // rate > 1e-3 and r2 > 0.99
};

/// Least-squares slope of log Y against t over [t0, t1]; rate = -slope.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& Y, double t0, double t1) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t0 || t[k] > t1) continue;
    if (!(Y[k] > 0)) throw Error("non-positive Y in the fit window");
    xs.push_back(t[k]);
    ys.push_back(std::log(Y[k]));
  }
  DecayFit f;
  f.points = xs.size();
  if (xs.size() < 3) return f;
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
  mx /= double(xs.size());
  my /= double(xs.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (!(sxx > 0)) return f;
  f.rate = -sxy / sxx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.accepted = f.rate > 1e-3 && f.r2 > 0.99;
  return f;
}

struct LogBoundFit {
  double C = 0;  // smallest C >= 0 with M >= -C log(1+t) - D at D = max(0, -M(0))
  double D = 0;
  bool zero_c_feasible = false;  // M levels off: C = 0 with D = -min M
  double D_zero_c = 0;
  bool violated = false;  // the required C keeps growing along the window
};

/// Lower bound M(t) >= -C log(1 + t) - D over the recorded series.
/// `zero_c_feasible` asks whether M has levelled off over the last half of
/// the series (its decrease there is below 1e-3 of the total); `violated`
/// flags a C that is still growing at the end (the needed C over the full
/// series exceeds 1.2 times the C needed over its first half), the signature
/// of a decrease faster than logarithmic.
inline LogBoundFit fit_log_bound(const std::vector<double>& t, const std::vector<double>& M) {
  LogBoundFit f;
  if (t.empty()) return f;
  f.D = std::max(0.0, -M.front());
  auto needed = [&](std::size_t upto) {
    double C = 0;
    for (std::size_t k = 0; k < upto; ++k)
      if (t[k] > 0) C = std::max(C, (-M[k] - f.D) / std::log1p(t[k]));
    return C;
  };
  f.C = needed(t.size());
  double mn = *std::min_element(M.begin(), M.end());
  f.D_zero_c = std::max(0.0, -mn);
  const std::size_t half = t.size() / 2;
  double total = std::abs(M.front() - M.back());
  double tail = std::abs(M[half] - M.back());
  f.zero_c_feasible = t.size() >= 4 && tail <= 1e-3 * total + 1e-14;
  double C_half = needed(half);
  f.violated = t.size() >= 4 && f.C > 1.2 * C_half && !f.zero_c_feasible;
  return f;
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
};

inline LinearFit fit_line(const std::vector<double>& t, const std::vector<double>& v, double t0, double t1) {
  double n = 0, mx = 0, my = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t0 && t[k] <= t1) n += 1, mx += t[k], my += v[k];
  LinearFit f;
  if (n < 2) return f;
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t0 && t[k] <= t1) sxx += (t[k] - mx) * (t[k] - mx), sxy += (t[k] - mx) * (v[k] - my);
  if (sxx > 0) f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

struct GrowthFit {
  double C1 = 0;  // slope over the fit window, clamped at 0
  double C2 = 0;  // max_k (F_k - C1 t_k)
};

/// F(t) - C1 t <= C2 along the series.
inline GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& v, double t0, double t1) {
  GrowthFit g;
  g.C1 = std::max(0.0, fit_line(t, v, t0, t1).slope);
  g.C2 = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) g.C2 = std::max(g.C2, v[k] - g.C1 * t[k]);
  return g;
}

struct MarginStats {
  double min_relative = std::numeric_limits<double>::infinity();  // min (rhs - lhs) / rhs
  int violations = 0;                                             // lhs > rhs + tol
};

inline void add_margin(MarginStats& m, double lhs, double rhs, double tol) {
  if (rhs > 0) m.min_relative = std::min(m.min_relative, (rhs - lhs) / rhs);
  if (lhs > rhs + tol) ++m.violations;
}

/// Tolerance 10 (h^2 + dt) * scale for every inequality check.
inline double inequality_tolerance(double h, double dt, double scale) { return 10 * (h * h + dt) * std::abs(scale); }

}  // namespace toricflow
