// toricflow: validate polytopes, run flows, scan for destabilizers, report.
//
// Exit codes: 0 success, 1 invalid input, 2 parse or usage error, 3 flow
// aborted, 4 I/O failure, 5 schema mismatch.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "toricflow/summary.hpp"

namespace fs = std::filesystem;
using namespace toricflow;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kUsage = 2, kAbort = 3, kIo = 4, kSchema = 5 };

fs::path default_out_dir() {
  if (const char* env = std::getenv("TORICFLOW_OUT_DIR"); env && *env) return env;
  return ".";
}

std::string columns_help() {
  std::string s = "\nCSV columns (flow series, fixed order):\n  ";
  const auto& c = csv_columns();
  for (std::size_t i = 0; i < c.size(); ++i) s += c[i] + (i + 1 < c.size() ? (i % 6 == 5 ? ",\n  " : ", ") : "\n");
  s += "\nExit codes: 0 success, 1 invalid input, 2 parse/usage, 3 flow abort, 4 I/O, 5 schema.\n"
       "Environment: TORICFLOW_OUT_DIR sets the default output directory.\n";
  return s;
}

int cmd_validate(const std::string& source) {
  ReflexivePolytope P = [&] {
    try {
      return load_polytope(source);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      throw;
    }
  }();
  auto rep = validate(P);
  std::cout << "polytope " << (P.name().empty() ? source : P.name()) << " (dimension " << P.dimension() << ", "
            << P.facets().size() << " facets, " << P.vertices().size() << " vertices)\n";
  std::cout << "  origin interior: " << (rep.origin_interior ? "yes" : "no") << "\n"
            << "  simple:          " << (rep.simple ? "yes" : "no") << "\n"
            << "  delzant:         " << (rep.delzant ? "yes" : "no") << "\n"
            << "  reflexive:       " << (rep.reflexive ? "yes" : "no") << "\n";
  for (const auto& f : rep.failures) std::cout << "  failure: " << f << "\n";
  std::cout << (rep.passed() ? "valid" : "invalid") << "\n";
  return rep.passed() ? kOk : kInvalid;
}

int cmd_dump(const std::string& source) {
  write_polytope(std::cout, load_polytope(source));
  return kOk;
}

int cmd_scan(const std::string& source, int family_size) {
  auto P = load_polytope(source);
  if (!validate(P).passed()) {
    std::cerr << "error: polytope fails validation\n";
    return kInvalid;
  }
  auto v = scan(P, family_size);
  std::cout << verdict_json(v, family_size).dump(2) << "\n";
  return kOk;
}

struct FlowOverrides {
  std::string polytope;
  int resolution = 0;
  double t_max = 0, dt = 0;
  std::int64_t seed = -1;
  int family_size = 0;
};

template <int N>
RunStatus flow_and_write(const RunConfig& cfg, const ReflexivePolytope& P, const fs::path& out_dir,
                         const std::string& stem, std::ostream& log) {
  auto result = run<N>(cfg, P);
  auto verdict = scan(P, cfg.family_size);
  nlohmann::json summary = summarize(cfg, P, result, verdict);
  fs::create_directories(out_dir);
  write_atomic(out_dir / (stem + ".csv"), series_csv(result.records));
  write_atomic(out_dir / (stem + ".summary.json"), summary.dump(2) + "\n");
  write_atomic(out_dir / (stem + ".snapshot.tsv"), snapshot_tsv(result.final_state));
  log << stem << ": " << to_string(result.status) << " at t = " << result.t_end << " (" << result.steps
      << " steps), Y = " << result.records.back().Y << ", Y-fate " << summary["Y_fate"].get<std::string>()
      << ", verdict " << to_string(verdict.verdict)
      << (summary["crosscheck"]["consistent"].get<bool>() ? ", consistent" : ", INCONSISTENT") << "\n";
  if (!result.message.empty()) log << stem << ": " << result.message << "\n";
  return result.status;
}

int flow_one(const fs::path& config_path, const FlowOverrides& o, const fs::path& out_dir, std::ostream& log) {
  RunConfig cfg;
  {
    std::ifstream in(config_path);
    if (!in) {
      log << "error: cannot open config " << config_path << "\n";
      return kIo;
    }
    try {
      cfg = read_config(in);
    } catch (const ParseError& e) {
      log << "error: " << config_path.string() << ":" << e.line() << ": " << e.what() << "\n";
      return kUsage;
    }
  }
  if (!o.polytope.empty()) cfg.polytope = o.polytope;
  if (o.resolution > 0) cfg.resolution = o.resolution;
  if (o.t_max > 0) cfg.t_max = o.t_max;
  if (o.dt > 0) cfg.dt = o.dt;
  if (o.seed >= 0) cfg.seed = std::uint64_t(o.seed);
  if (o.family_size > 0) cfg.family_size = o.family_size;
  try {
    check_config(cfg);
    auto P = load_polytope(cfg.polytope, config_path.parent_path());
    if (!validate(P).passed()) {
      log << "error: polytope '" << cfg.polytope << "' fails validation\n";
      return kInvalid;
    }
    std::string stem = config_path.stem().string();
    RunStatus s =
        P.dimension() == 1 ? flow_and_write<1>(cfg, P, out_dir, stem, log) : flow_and_write<2>(cfg, P, out_dir, stem, log);
    return s == RunStatus::kAborted ? kAbort : kOk;
  } catch (const ParseError& e) {
    log << "error: polytope file line " << e.line() << ": " << e.what() << "\n";
    return kUsage;
  } catch (const UnsupportedDimensionError& e) {
    log << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::string what = e.what();
    bool io = what.rfind("cannot write", 0) == 0 || what.rfind("write failed", 0) == 0 || what.rfind("cannot move", 0) == 0;
    log << "error: " << what << "\n";
    return io ? kIo : kInvalid;
  }
}

// Most severe outcome first: abort, then I/O, schema, usage, invalid.
int worst(int a, int b) {
  static const int rank[] = {0, 1, 2, 5, 4, 3};  // by exit code
  return rank[a] >= rank[b] ? a : b;
}

int cmd_flow(const std::vector<std::string>& configs, const FlowOverrides& o, const fs::path& out_dir, int jobs) {
  std::vector<int> codes(configs.size(), kOk);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      std::ostringstream log;
      codes[i] = flow_one(configs[i], o, out_dir, log);
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cout << log.str() << std::flush;
    }
  };
  jobs = std::clamp(jobs, 1, int(configs.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  int code = kOk;
  for (int c : codes) code = worst(code, c);
  return code;
}

int cmd_report(const std::vector<std::string>& files, const fs::path& out_dir) {
  if (files.empty()) {
    std::cerr << "error: report needs at least one summary file\n";
    return kUsage;
  }
  std::vector<ReportRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) {
      std::cerr << "error: cannot open " << f << "\n";
      return kIo;
    }
    nlohmann::json s;
    try {
      in >> s;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << f << ": " << e.what() << "\n";
      return kUsage;
    }
    try {
      rows.push_back(report_row(s, f));
    } catch (const SchemaError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kSchema;
    }
  }
  std::cout << report_table(rows);
  try {
    fs::create_directories(out_dir);
    write_atomic(out_dir / "report.csv", report_csv(rows));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalized Kahler-Ricci flow on toric Fano manifolds in symplectic coordinates"};
  app.footer(columns_help());
  app.require_subcommand(1);

  std::string polytope;
  auto* validate_cmd = app.add_subcommand("validate", "Check a polytope (builtin name or file)");
  validate_cmd->add_option("--polytope", polytope, "builtin name or polytope file")->required();

  auto* dump_cmd = app.add_subcommand("dump", "Print a polytope in the file format");
  dump_cmd->add_option("--polytope", polytope, "builtin name or polytope file")->required();

  int family_size = 3;
  auto* scan_cmd = app.add_subcommand("scan", "Scan single-crease PL functions for negative Donaldson values");
  scan_cmd->add_option("--polytope", polytope, "builtin name or polytope file")->required();
  scan_cmd->add_option("--family-size", family_size, "max-norm bound on crease directions")->check(CLI::PositiveNumber);

  std::vector<std::string> configs;
  FlowOverrides o;
  std::string out_dir = default_out_dir().string();
  int jobs = 1;
  auto* flow_cmd = app.add_subcommand("flow", "Run flows; writes <stem>.csv, <stem>.summary.json, <stem>.snapshot.tsv");
  flow_cmd->add_option("--config", configs, "run configuration file(s)")->required();
  flow_cmd->add_option("--polytope", o.polytope, "override the polytope");
  flow_cmd->add_option("--resolution", o.resolution, "override the resolution")->check(CLI::PositiveNumber);
  flow_cmd->add_option("--tmax", o.t_max, "override t_max")->check(CLI::PositiveNumber);
  flow_cmd->add_option("--dt", o.dt, "override the step bound")->check(CLI::PositiveNumber);
  flow_cmd->add_option("--seed", o.seed, "seed for random perturbations")->check(CLI::NonNegativeNumber);
  flow_cmd->add_option("--family-size", o.family_size, "stability scan size")->check(CLI::PositiveNumber);
  flow_cmd->add_option("--out-dir", out_dir, "output directory (default $TORICFLOW_OUT_DIR or .)");
  flow_cmd->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> summaries;
  std::string report_dir = default_out_dir().string();
  auto* report_cmd = app.add_subcommand("report", "Tabulate run summaries; writes report.csv");
  report_cmd->add_option("summaries", summaries, "summary JSON files");
  report_cmd->add_option("--out-dir", report_dir, "output directory for report.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(polytope);
    if (*dump_cmd) return cmd_dump(polytope);
    if (*scan_cmd) return cmd_scan(polytope, family_size);
    if (*flow_cmd) return cmd_flow(configs, o, out_dir, jobs);
    if (*report_cmd) return cmd_report(summaries, report_dir);
  } catch (const ParseError& e) {
    std::cerr << "error: line " << e.line() << ": " << e.what() << "\n";
    return kUsage;
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kUsage;
}
