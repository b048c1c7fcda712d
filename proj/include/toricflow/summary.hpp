#pragma once

// Run summaries (JSON, schema version 1), the CSV series, node snapshots and
// the consolidated report.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "toricflow/errors.hpp"
#include "toricflow/flow.hpp"
#include "toricflow/stability.hpp"

namespace toricflow {

inline constexpr int kSchemaVersion = 1;

/// Horizon of the dissipation-identity check; later the identity compares
/// two quantities that are both at the level of the discretization error.
inline constexpr double kDissipationHorizon = 1.0;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json rational_vector(const RationalVector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : v) a.push_back(to_string(c));
  return a;
}

// Finite values only: JSON has no NaN, and a non-finite entry is a failure
// worth seeing as null.
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

/// Central-difference identity residuals over interior records.
struct IdentityResiduals {
  double dissipation = 0;  // max |dM/dt + Y| / Y, t <= horizon
  double dissipation_full = 0;
  double f_derivative = 0;  // max |dF/dt - rhs| / (1 + |dF/dt|)
};

inline IdentityResiduals identity_residuals(const std::vector<DiagnosticRecord>& rs, double horizon) {
  IdentityResiduals r;
  for (std::size_t k = 1; k + 1 < rs.size(); ++k) {
    double span = rs[k + 1].t - rs[k - 1].t;
    double dM = (rs[k + 1].M - rs[k - 1].M) / span;
    double dF = (rs[k + 1].F - rs[k - 1].F) / span;
    double e = std::abs(dM + rs[k].Y) / rs[k].Y;
    if (rs[k].t <= horizon + 1e-12) r.dissipation = std::max(r.dissipation, e);
    r.dissipation_full = std::max(r.dissipation_full, e);
    r.f_derivative = std::max(r.f_derivative, std::abs(dF - rs[k].dF_identity) / (1 + std::abs(dF)));
  }
  return r;
}

/// Worst checks over a series, each at tolerance 10 (h^2 + dt) * scale.
struct InequalityReport {
  MarginStats cauchy_schwarz, lemma5, lemma19, dY_bound;
  double lemma_min_margin = std::numeric_limits<double>::infinity();  // (rhs + tol - lhs) / rhs
  double dY_bound_min_margin = std::numeric_limits<double>::infinity();  // raw dY margin
  double dY_bound_min_relative = std::numeric_limits<double>::infinity();
  int F_lower_violations = 0;
};

inline InequalityReport check_inequalities(const std::vector<DiagnosticRecord>& rs, double h) {
  InequalityReport q;
  auto lemma = [&](MarginStats& m, double lhs, double rhs, double dt) {
    double tol = inequality_tolerance(h, dt, rhs);
    add_margin(m, lhs, rhs, tol);
    if (rhs > 0) q.lemma_min_margin = std::min(q.lemma_min_margin, (rhs + tol - lhs) / rhs);
  };
  for (const auto& r : rs) {
    lemma(q.cauchy_schwarz, r.lemma.lhs, r.lemma.cs_rhs, r.dt);
    lemma(q.lemma5, r.lemma.lhs, r.lemma.rhs5, r.dt);
    lemma(q.lemma19, r.lemma.I, r.lemma.rhs19, r.dt);
    double scale = 6 * (r.norms.lap + r.norms.grad * r.norms.grad) * r.Y;
    double tol = inequality_tolerance(h, r.dt, scale);
    if (r.dY_bound_margin < -tol) ++q.dY_bound.violations;
    q.dY_bound_min_margin = std::min(q.dY_bound_min_margin, r.dY_bound_margin);
    if (scale > 0) q.dY_bound_min_relative = std::min(q.dY_bound_min_relative, (r.dY_bound_margin + tol) / scale);
    if (r.F < r.F_lower - inequality_tolerance(h, r.dt, r.F_lower)) ++q.F_lower_violations;
  }
  return q;
}

inline std::string y_fate(const std::string& status, bool decay_accepted, double tail_min, double Y0) {
  if (status == "converged" || decay_accepted) return "decay";
  if (tail_min > 1e-3 * Y0) return "bounded-below";
  return "undetermined";
}

inline nlohmann::json config_json(const RunConfig& c) {
  return {{"polytope", c.polytope},       {"resolution", c.resolution},   {"dt", c.dt},
          {"t_max", c.t_max},             {"record_interval", c.record_interval},
          {"fit_window", c.fit_window},   {"seed", c.seed},               {"family_size", c.family_size},
          {"converge_tol", c.converge_tol}, {"stall_tol", c.stall_tol},   {"perturbation", c.perturbation}};
}

inline nlohmann::json verdict_json(const StabilityVerdict& v, int family_size) {
  return {{"futaki", detail::rational_vector(v.futaki)},
          {"futaki_zero", v.futaki_zero},
          {"crease_min", to_string(v.crease_min)},
          {"crease_min_value", to_double(v.crease_min)},
          {"witness", v.witness_text},
          {"evaluated", v.evaluated},
          {"family_size", family_size},
          {"verdict", to_string(v.verdict)}};
}

template <int N>
nlohmann::json summarize(const RunConfig& cfg, const ReflexivePolytope& P, const RunResult<N>& r,
                         const StabilityVerdict& v) {
  using nlohmann::json;
  const auto& rs = r.records;
  std::vector<double> t, Y, M, F, J;
  for (const auto& x : rs) t.push_back(x.t), Y.push_back(x.Y), M.push_back(x.M), F.push_back(x.F), J.push_back(x.J);
  const double t1 = r.t_end, t0 = r.t_end * (1 - cfg.fit_window);

  DecayFit decay;
  std::string decay_error;
  try {
    decay = fit_decay(t, Y, t0, t1);
  } catch (const Error& e) {
    decay_error = e.what();
  }
  auto logb = fit_log_bound(t, M);
  auto Ffit = fit_growth(t, F, t0, t1);
  auto Jfit = fit_growth(t, J, t0, t1);
  double tail_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t0) tail_min = std::min(tail_min, Y[k]);
  double kappa = Jfit.C1 > 0 ? tail_min / (2 * Jfit.C1) : 0.0;
  std::vector<double> combined;
  for (std::size_t k = 0; k < t.size(); ++k) combined.push_back(combined_monitor(M[k], J[k], kappa));
  auto comb = fit_line(t, combined, t0, t1);

  double integral_Y = 0;
  for (std::size_t k = 1; k < t.size(); ++k) integral_Y += 0.5 * (Y[k] + Y[k - 1]) * (t[k] - t[k - 1]);
  double drop = M.front() - M.back();

  auto ids = identity_residuals(rs, kDissipationHorizon);
  auto ineq = check_inequalities(rs, r.h);

  double smax = 0, umax = 0, gmax = 0, lmax = 0;
  for (const auto& x : rs) {
    smax = std::max(smax, x.smoothing.value);
    umax = std::max(umax, x.norms.u);
    gmax = std::max(gmax, x.norms.grad);
    lmax = std::max(lmax, x.norms.lap);
  }

  const std::string status = to_string(r.status);
  FlowEvidence ev{P.name(), Y.front(), tail_min, decay.accepted, logb.violated};
  auto cc = crosscheck_flow(v, ev);

  auto inf_or = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json s;
  s["schema_version"] = kSchemaVersion;
  s["config"] = config_json(cfg);
  s["polytope"] = {{"name", P.name()}, {"dimension", P.dimension()}};
  s["grid"] = {{"h", r.h}, {"nodes", r.nodes}};
  s["status"] = status;
  s["message"] = r.message;
  s["partial"] = r.status == RunStatus::kAborted;
  s["t_end"] = r.t_end;
  s["steps"] = r.steps;
  s["records"] = rs.size();
  s["Y"] = {{"initial", Y.front()}, {"final", Y.back()}, {"tail_min", detail::num(tail_min)}};
  s["Y_fate"] = y_fate(status, decay.accepted, tail_min, Y.front());
  s["M"] = {{"final", M.back()}, {"min", *std::min_element(M.begin(), M.end())}};
  s["energy_consistency"] = {{"integral_Y", integral_Y},
                             {"mabuchi_drop", drop},
                             {"relative_error", detail::num(std::abs(integral_Y - drop) / std::max(drop, 1e-300))}};
  s["identities"] = {{"dissipation_max_relative", ids.dissipation},
                     {"dissipation_horizon", kDissipationHorizon},
                     {"dissipation_max_relative_full", ids.dissipation_full},
                     {"F_derivative_max_relative", ids.f_derivative}};
  s["decay_fit"] = {{"window", {t0, t1}}, {"rate", decay.rate}, {"r2", decay.r2},
                    {"points", decay.points}, {"accepted", decay.accepted}, {"error", decay_error}};
  s["log_bound_fit"] = {{"C", logb.C},
                        {"D", logb.D},
                        {"zero_c_feasible", logb.zero_c_feasible},
                        {"D_zero_c", logb.D_zero_c},
                        {"violated", logb.violated}};
  s["F_fit"] = {{"C1", Ffit.C1}, {"C2", Ffit.C2}, {"lower_bound_violations", ineq.F_lower_violations}};
  s["J_fit"] = {{"C1", Jfit.C1}, {"C2", Jfit.C2}};
  s["combined_monitor"] = {{"kappa", kappa}, {"slope", comb.slope}};
  s["smoothing_ratio_max"] = smax;
  s["perelman_max"] = {{"u", umax}, {"grad", gmax}, {"lap", lmax}};
  auto stats = [&](const MarginStats& m) {
    return json{{"min_relative_margin", inf_or(m.min_relative)}, {"violations", m.violations}};
  };
  s["lemma"] = {{"min_margin", inf_or(ineq.lemma_min_margin)},
                {"cauchy_schwarz", stats(ineq.cauchy_schwarz)},
                {"rhs5", stats(ineq.lemma5)},
                {"rhs19", stats(ineq.lemma19)}};
  s["dY_bound"] = {{"min_margin", inf_or(ineq.dY_bound_min_margin)},
                  {"min_relative_margin", inf_or(ineq.dY_bound_min_relative)},
                  {"violations", ineq.dY_bound.violations}};
  s["stability"] = verdict_json(v, cfg.family_size);
  s["crosscheck"] = {{"consistent", cc.consistent}, {"y_to_zero", cc.y_to_zero}, {"flags", cc.flags}};
  return s;
}

inline std::string series_csv(const std::vector<DiagnosticRecord>& rs) {
  std::ostringstream out;
  const auto& cols = csv_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  for (const auto& r : rs) {
    auto vals = csv_values(r);
    for (std::size_t c = 0; c < vals.size(); ++c) out << (c ? "," : "") << detail::format_double(vals[c]);
    out << "\n";
  }
  return out.str();
}

/// Tab-separated per-node snapshot: coordinates, psi, u and the metric
/// diagnostics.
template <int N>
std::string snapshot_tsv(const SymplecticPotential<N>& sp) {
  auto ms = ricci_potential(sp);
  const auto& g = sp.grid();
  std::ostringstream out;
  for (int a = 0; a < N; ++a) out << "x" << a + 1 << "\t";
  out << "weight\tpsi\tu\tgrad_sq\tlaplacian\tscalar\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int a = 0; a < N; ++a) out << detail::format_double(g.point(i)[a]) << "\t";
    out << detail::format_double(g.weights()[i]) << "\t" << detail::format_double(sp.psi[i]) << "\t"
        << detail::format_double(ms.u[i]) << "\t" << detail::format_double(ms.grad_sq[i]) << "\t"
        << detail::format_double(ms.laplacian[i]) << "\t" << detail::format_double(ms.scalar[i]) << "\n";
  }
  return out.str();
}

/// Writes through a temporary file in the same directory and renames it into
/// place. Throws Error on any I/O failure.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Report.

struct ReportRow {
  std::string source;
  std::string polytope;
  bool futaki_zero = false;
  std::string verdict;
  std::string status;
  std::string y_fate;
  double C = 0, D = 0;
  bool zero_c_feasible = false;
  double lemma_margin = 0;
  double dY_margin = 0;
  bool fail = false;
};

/// Throws SchemaError on a missing or different schema version.
inline ReportRow report_row(const nlohmann::json& s, const std::string& source) {
  if (!s.is_object() || !s.contains("schema_version") || !s["schema_version"].is_number_integer())
    throw SchemaError(source + ": no schema_version");
  if (s["schema_version"].get<int>() != kSchemaVersion)
    throw SchemaError(source + ": schema_version " + std::to_string(s["schema_version"].get<int>()) +
                      ", expected " + std::to_string(kSchemaVersion));
  auto number = [](const nlohmann::json& v) {
    return v.is_number() ? v.get<double>() : std::numeric_limits<double>::infinity();
  };
  try {
    ReportRow r;
    r.source = source;
    r.polytope = s.at("polytope").at("name").get<std::string>();
    r.futaki_zero = s.at("stability").at("futaki_zero").get<bool>();
    r.verdict = s.at("stability").at("verdict").get<std::string>();
    r.status = s.at("status").get<std::string>();
    r.y_fate = s.at("Y_fate").get<std::string>();
    r.C = s.at("log_bound_fit").at("C").get<double>();
    r.D = s.at("log_bound_fit").at("D").get<double>();
    r.zero_c_feasible = s.at("log_bound_fit").at("zero_c_feasible").get<bool>();
    if (r.zero_c_feasible) {
      r.C = 0;
      r.D = s.at("log_bound_fit").at("D_zero_c").get<double>();
    }
    r.lemma_margin = number(s.at("lemma").at("min_margin"));
    r.dY_margin = number(s.at("dY_bound").at("min_relative_margin"));
    r.fail = r.lemma_margin < 0 || r.dY_margin < 0 || r.status == "aborted";
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(source + ": " + e.what());
  }
}

inline std::string report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-10s %-6s %-19s %-10s %-14s %-12s %-12s %-11s %-11s %s\n", "polytope", "futaki",
                "verdict", "status", "Y-fate", "C", "D", "lemma", "dY_bound", "check");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-6s %-19s %-10s %-14s %-12.5g %-12.5g %-11.3g %-11.3g %s\n",
                  r.polytope.c_str(), r.futaki_zero ? "zero" : "nonzero", r.verdict.c_str(), r.status.c_str(),
                  r.y_fate.c_str(), r.C, r.D, r.lemma_margin, r.dY_margin,
                  r.fail ? "FAIL" : "ok");
    out << buf;
  }
  return out.str();
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "source,polytope,futaki_zero,verdict,status,y_fate,C,D,zero_c_feasible,lemma_min_margin,"
         "dY_bound_min_relative_margin,check\n";
  for (const auto& r : rows)
    out << r.source << "," << r.polytope << "," << (r.futaki_zero ? 1 : 0) << "," << r.verdict << "," << r.status
        << "," << r.y_fate << "," << detail::format_double(r.C) << "," << detail::format_double(r.D) << ","
        << (r.zero_c_feasible ? 1 : 0) << "," << detail::format_double(r.lemma_margin) << ","
        << detail::format_double(r.dY_margin) << "," << (r.fail ? "FAIL" : "ok") << "\n";
  return out.str();
}

}  // namespace toricflow
