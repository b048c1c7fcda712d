#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "toricflow/functionals.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("toricflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const std::string& env = "") {
    fs::path log = dir_ / "stdout.txt";
    std::string cmd = env + " " + TORICFLOW_BIN + std::string(" ") + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
  }

  fs::path write(const std::string& name, const std::string& content) {
    fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path short_config(const std::string& name = "short.conf") {
    return write(name,
                 "polytope = cp1\nresolution = 64\nt_max = 0.2\nrecord_interval = 0.02\n"
                 "[perturbation]\nbump 0.05 2\n");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidateExitCodes) {
  EXPECT_EQ(run("validate --polytope cp2").code, 0);
  auto bad = write("big.poly", "dimension 2\nfacet 1 0 2\nfacet 0 1 2\nfacet -1 0 2\nfacet 0 -1 2\n");
  auto r = run("validate --polytope " + bad.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("invalid"), std::string::npos);
  auto garbled = write("garbled.poly", "dimension 2\nfacet 1 zero 1\n");
  r = run("validate --polytope " + garbled.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 2"), std::string::npos);
  auto cube = write("cube.poly",
                    "dimension 3\nfacet 1 0 0 1\nfacet -1 0 0 1\nfacet 0 1 0 1\nfacet 0 -1 0 1\n"
                    "facet 0 0 1 1\nfacet 0 0 -1 1\n");
  EXPECT_EQ(run("validate --polytope " + cube.string()).code, 1);
  EXPECT_EQ(run("validate --polytope nonesuch").code, 1);
  EXPECT_EQ(run("validate").code, 2);
}

TEST_F(Cli, DumpRoundTrips) {
  auto r = run("dump --polytope dp2");
  ASSERT_EQ(r.code, 0);
  auto p = write("dp2.poly", r.out);
  EXPECT_EQ(run("validate --polytope " + p.string()).code, 0);
  EXPECT_EQ(run("dump --polytope " + p.string()).out, r.out);
}

TEST_F(Cli, ScanReportsVerdict) {
  auto r = run("scan --polytope dp1 --family-size 1");
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["verdict"], "unstable");
  EXPECT_EQ(j["futaki_zero"], false);
  EXPECT_EQ(nlohmann::json::parse(run("scan --polytope cp2 --family-size 1").out)["verdict"], "no-violation-found");
}

TEST_F(Cli, FlowWritesArtifactsDeterministically) {
  auto cfg = short_config();
  auto out = dir_ / "out";
  auto r = run("flow --config " + cfg.string() + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(fs::exists(out / "short.csv"));
  ASSERT_TRUE(fs::exists(out / "short.summary.json"));
  ASSERT_TRUE(fs::exists(out / "short.snapshot.tsv"));

  std::string csv = slurp(out / "short.csv");
  std::string header = csv.substr(0, csv.find('\n'));
  std::string expect;
  for (const auto& c : toricflow::csv_columns()) expect += (expect.empty() ? "" : ",") + c;
  EXPECT_EQ(header, expect);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
  EXPECT_EQ(csv.find("nan"), std::string::npos);
  EXPECT_EQ(csv.find("inf"), std::string::npos);

  auto s = nlohmann::json::parse(slurp(out / "short.summary.json"));
  EXPECT_EQ(s["schema_version"], 1);
  EXPECT_EQ(s["status"], "max_time");
  EXPECT_EQ(s["config"]["resolution"], 64);
  EXPECT_EQ(s["stability"]["verdict"], "no-violation-found");

  ASSERT_EQ(run("flow --config " + cfg.string() + " --out-dir " + out.string()).code, 0);
  EXPECT_EQ(slurp(out / "short.csv"), csv);
  for (const auto& e : fs::directory_iterator(out)) EXPECT_EQ(e.path().extension() == ".tmp", false);
}

TEST_F(Cli, FlowOverridesAndEnvironment) {
  auto cfg = short_config();
  auto out = dir_ / "env";
  auto r = run("flow --config " + cfg.string() + " --resolution 32 --tmax 0.1", "TORICFLOW_OUT_DIR=" + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  auto s = nlohmann::json::parse(slurp(out / "short.summary.json"));
  EXPECT_EQ(s["config"]["resolution"], 32);
  EXPECT_DOUBLE_EQ(s["t_end"].get<double>(), 0.1);
}

TEST_F(Cli, FlowFansOutOverConfigs) {
  auto a = short_config("a.conf"), b = short_config("b.conf");
  auto out = dir_ / "many";
  auto r = run("flow --jobs 2 --config " + a.string() + " " + b.string() + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(out / "a.csv"), slurp(out / "b.csv"));
}

TEST_F(Cli, FlowErrorCodes) {
  auto out = dir_ / "out";
  auto garbled = write("garbled.conf", "polytope = cp1\nresolution == 3\n");
  auto r = run("flow --config " + garbled.string() + " --out-dir " + out.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find(":2:"), std::string::npos);

  auto unknown = write("unknown.conf", "polytope = nonesuch\n");
  EXPECT_EQ(run("flow --config " + unknown.string() + " --out-dir " + out.string()).code, 1);
  auto nonconvex = write("nonconvex.conf", "polytope = cp1\n[perturbation]\nbump 1.0 2\n");
  EXPECT_EQ(run("flow --config " + nonconvex.string() + " --out-dir " + out.string()).code, 1);
  EXPECT_EQ(run("flow --config " + (dir_ / "missing.conf").string()).code, 4);

  auto blocker = write("blocker", "not a directory\n");
  EXPECT_EQ(run("flow --config " + short_config().string() + " --out-dir " + (blocker / "sub").string()).code, 4);
}

TEST_F(Cli, ReportTabulatesAndChecksSchema) {
  auto out = dir_ / "out";
  ASSERT_EQ(run("flow --config " + short_config().string() + " --out-dir " + out.string()).code, 0);
  auto summary = out / "short.summary.json";
  auto r = run("report " + summary.string() + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("cp1"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "report.csv"));

  auto j = nlohmann::json::parse(slurp(summary));
  j["schema_version"] = 99;
  auto wrong = write("wrong.json", j.dump());
  EXPECT_EQ(run("report " + wrong.string() + " --out-dir " + out.string()).code, 5);
  j.erase("schema_version");
  EXPECT_EQ(run("report " + write("none.json", j.dump()).string() + " --out-dir " + out.string()).code, 5);
  EXPECT_EQ(run("report --out-dir " + out.string()).code, 2);
  EXPECT_EQ(run("report " + write("broken.json", "{").string()).code, 2);
}

TEST_F(Cli, HelpDocumentsColumns) {
  auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("dY_bound_margin"), std::string::npos);
  EXPECT_NE(r.out.find("TORICFLOW_OUT_DIR"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}
