#include "bgadj/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace bgadj;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("bgadjust");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("bgadj_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}), cli::kExitUsage);
  EXPECT_EQ(run_cli({"simulate"}), cli::kExitUsage);  // missing --out
  EXPECT_EQ(run_cli({"frobnicate"}), cli::kExitUsage);
  // scenario A with a lesion violates the scenario invariant
  EXPECT_EQ(run_cli({"simulate", "--scenario", "A", "--lesion", "10,10,4", "--out",
                     path("x")}),
            cli::kExitUsage);
  // sgmm without templates
  EXPECT_EQ(run_cli({"fit", "--method", "sgmm", "--in", path("missing.baf"), "--out",
                     path("p.params")}),
            cli::kExitUsage);
}

TEST_F(CliTest, SimulateIsByteDeterministic) {
  const std::vector<std::string> flags{"simulate", "--scenario", "B", "--dims", "48,40",
                                       "--seed", "7", "--lesion", "24,20,5", "--out",
                                       path("s1")};
  ASSERT_EQ(run_cli(flags), 0);
  std::vector<std::string> flags2 = flags;
  flags2.back() = path("s2");
  ASSERT_EQ(run_cli(flags2), 0);
  for (const char* suffix : {".obs.baf", ".templates.baf", ".truth.params", ".mask.baf"})
    EXPECT_EQ(slurp(path("s1") + suffix), slurp(path("s2") + suffix)) << suffix;
}

TEST_F(CliTest, SimulateFitEvalPipeline) {
  ASSERT_EQ(run_cli({"simulate", "--scenario", "A", "--dims", "64,64", "--seed", "5",
                     "--out", path("sim")}),
            0);
  ASSERT_TRUE(std::filesystem::exists(path("sim.obs.baf")));
  ASSERT_TRUE(std::filesystem::exists(path("sim.templates.baf")));
  ASSERT_TRUE(std::filesystem::exists(path("sim.truth.params")));

  ASSERT_EQ(run_cli({"fit", "--method", "rb-sgmm", "--in", path("sim.obs.baf"),
                     "--templates", path("sim.templates.baf"), "--out",
                     path("fit.params")}),
            0);
  ASSERT_TRUE(std::filesystem::exists(path("fit.params")));
  ASSERT_TRUE(std::filesystem::exists(path("fit.params.log.jsonl")));

  ASSERT_EQ(run_cli({"eval", "--est", path("fit.params"), "--truth",
                     path("sim.truth.params"), "--templates", path("sim.templates.baf"),
                     "--out", path("err.csv")}),
            0);
  const std::string csv = slurp(path("err.csv"));
  EXPECT_NE(csv.find("parameter,error"), std::string::npos);
  EXPECT_NE(csv.find("mu_1,"), std::string::npos);
  EXPECT_NE(csv.find("pi,"), std::string::npos);

  // the fit log is JSON lines with a nondecreasing-ish loglik trace
  std::ifstream log(path("fit.params.log.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    ++rows;
  }
  EXPECT_GE(rows, 3);
}

TEST_F(CliTest, StandardizeOutputsAndDefaults) {
  ASSERT_EQ(run_cli({"simulate", "--scenario", "A", "--dims", "48,40", "--seed", "3",
                     "--out", path("sim")}),
            0);
  ASSERT_EQ(run_cli({"standardize", "--in", path("sim.obs.baf"), "--params",
                     path("sim.truth.params"), "--templates", path("sim.templates.baf"),
                     "--out", path("std")}),
            0);
  const BafRaster scores = read_baf(path("std.scores.baf"));
  EXPECT_EQ(scores.channels, 2);
  const BafRaster z = read_baf(path("std.z.baf"));
  EXPECT_EQ(z.channels, 1);
  const BafRaster pvals = read_baf(path("std.p.baf"));
  for (double v : pvals.data) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_NE(slurp(path("std.summary.csv")).find("ks_statistic"), std::string::npos);

  // contrast dimension mismatch is a usage error
  EXPECT_EQ(run_cli({"standardize", "--in", path("sim.obs.baf"), "--params",
                     path("sim.truth.params"), "--templates", path("sim.templates.baf"),
                     "--contrast", "1,0,0", "--out", path("bad")}),
            cli::kExitUsage);
}

TEST_F(CliTest, TailHeatmapCsv) {
  ASSERT_EQ(run_cli({"tail", "--case", "1", "--rho", "0.5", "--kappa2", "0.1", "--alpha",
                     "0.01", "--grid", "3x2", "--reps", "5000", "--seed", "2", "--out",
                     path("hm.csv")}),
            0);
  const std::string csv = slurp(path("hm.csv"));
  EXPECT_NE(csv.find("kappa1,pi1,R,SE"), std::string::npos);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 3 * 2);
}

TEST_F(CliTest, CdfTableAgreesWithOracle) {
  ASSERT_EQ(run_cli({"cdf", "--tau", "1.4", "--delta1", "0.9", "--pi0", "0.5", "--t",
                     "-2:2:0.5", "--reps", "50000", "--seed", "4", "--out",
                     path("cdf.csv")}),
            0);
  std::ifstream f(path("cdf.csv"));
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "t,F_exact,F_mc,SE");
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) {
    double t, fe, fm, se;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &fe, &fm, &se), 4);
    ASSERT_NEAR(fm, fe, 4.0 * se + 1e-6);
    ++rows;
  }
  EXPECT_EQ(rows, 9);

  // the tau = 1, Delta_2 > 0 branch has a finite upper endpoint and is
  // exercised through the same table
  ASSERT_EQ(run_cli({"cdf", "--tau", "1", "--delta1", "1.5", "--pi0", "0.3", "--t",
                     "-1:1:1", "--reps", "20000", "--out", path("cdf2.csv")}),
            0);

  // Theta_0 parameters are refused with a message naming the condition
  EXPECT_EQ(run_cli({"cdf", "--tau", "1", "--delta1", "0", "--pi0", "0", "--out",
                     path("cdf3.csv")}),
            cli::kExitUsage);
}

TEST_F(CliTest, DataFormatErrors) {
  std::ofstream(path("junk.baf")) << "not a raster";
  EXPECT_EQ(run_cli({"fit", "--method", "gmm", "--in", path("junk.baf"), "--out",
                     path("p.params")}),
            cli::kExitDataFormat);
  std::ofstream(path("junk.params")) << "K banana";
  EXPECT_EQ(run_cli({"eval", "--est", path("junk.params"), "--truth",
                     path("junk.params"), "--out", path("e.csv")}),
            cli::kExitDataFormat);
}

TEST_F(CliTest, FitNonConvergenceExitCode) {
  ASSERT_EQ(run_cli({"simulate", "--scenario", "A", "--dims", "32,32", "--seed", "2",
                     "--out", path("sim")}),
            0);
  // a single iteration cannot reach the tolerance on this data
  EXPECT_EQ(run_cli({"fit", "--method", "sgmm", "--in", path("sim.obs.baf"),
                     "--templates", path("sim.templates.baf"), "--max-iter", "1",
                     "--tol", "1e-12", "--out", path("p.params")}),
            cli::kExitNoConvergence);
}
