#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "runner/runner.hpp"

namespace fs = std::filesystem;
using namespace sfdde::cli;

namespace {

std::string config_path(const std::string& name) { return std::string(SFDDE_CONFIG_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sfdde_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.yaml";
  std::ofstream(p) << text;
  return p;
}

RunResult run_quiet(RunOptions options) {
  std::ostringstream log;
  return run(options, log);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Cli, GitBlobHashMatchesGit) {
  // git hash-object of "hello\n" and of the empty file
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Cli, ZeroModelSimulationIsConstant) {
  const auto out = scratch("zero");
  const auto r = run_quiet({config_path("simulate_zero.yaml"), out.string(), std::nullopt, 1, {}});
  ASSERT_EQ(r.exit_code, 0);
  const auto rows = lines_of(slurp(out / "path_00000.csv"));
  ASSERT_EQ(rows.front(), "t,x1,is_jump");
  ASSERT_EQ(rows.size(), 152u);  // header + 151 nodes on [-0.5, 1]
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].substr(rows[i].find(',')), ",1.5000000000000000e+00,0");
  }
  EXPECT_TRUE(fs::exists(out / "manifest.yaml"));
  EXPECT_TRUE(fs::exists(out / "summary.txt"));
}

TEST(Cli, PicardWithOneIterateIsNumericalFailure) {
  const auto out = scratch("kmax");
  std::ostringstream log;
  const auto r = run({config_path("picard.yaml"), out.string(), std::nullopt, 1, {"experiment.kmax=1", "experiment.N=5"}}, log);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(log.str().find("InsufficientIterates"), std::string::npos);
}

TEST(Cli, ReferenceConfigsValidateClean) {
  for (const char* name : {"simulate_zero.yaml", "robustness_ts.yaml", "ito_check.yaml", "picard.yaml",
                           "fk_brownian.yaml", "noise_info.yaml"}) {
    std::ostringstream out;
    EXPECT_EQ(validate(config_path(name), out), 0) << name;
    EXPECT_EQ(out.str(), "") << name;
  }
}

TEST(Cli, ValidateListsEveryProblem) {
  const auto dir = scratch("validate");
  std::string text = slurp(config_path("robustness_ts.yaml"));
  text.replace(text.find("dt: 0.01"), 8, "dt: 0.03");
  text.replace(text.find("[0.8, 0.4, 0.2, 0.1]"), 20, "[0.8, 0.4, 0.005]");
  const auto path = write_config(dir, text);
  std::ostringstream out;
  EXPECT_EQ(validate(path.string(), out), 2);
  const auto report = out.str();
  EXPECT_NE(report.find("grid.dt = 0.03 does not divide model.r = 0.5"), std::string::npos) << report;
  EXPECT_NE(report.find("experiment.eps_list[2]: eps = 0.005 must exceed noise.eps_ref = 0.01"), std::string::npos)
      << report;
  EXPECT_GE(lines_of(report).size(), 2u);
}

TEST(Cli, ValidateReportsLinesAndUnknownKeys) {
  const auto dir = scratch("unknown");
  const auto path = write_config(dir, R"(model:
  d: 1
  r: 0.5
  sigma: 2
  initial: {kind: constant, value: 1.0}
grid: {dt: 0.01, T: 1.0}
noise: {eps_ref: 0.0}
experiment:
  family: picard
  kmax: many
)");
  std::ostringstream out;
  EXPECT_EQ(validate(path.string(), out), 2);
  EXPECT_NE(out.str().find("line 4: model.sigma: unknown key"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("line 10: experiment.kmax: expected an integer"), std::string::npos) << out.str();
}

TEST(Cli, MissingFileIsAnError) {
  std::ostringstream out;
  EXPECT_EQ(validate("/nonexistent/config.yaml", out), 2);
  EXPECT_NE(out.str().find("cannot open"), std::string::npos);
  const auto r = run_quiet({"/nonexistent/config.yaml", scratch("missing").string(), std::nullopt, 1, {}});
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, OverridesReachTheModel) {
  const auto out = scratch("override");
  const auto r = run_quiet({config_path("simulate_zero.yaml"), out.string(), std::nullopt, 1,
                            {"model.initial.value=-2.0", "experiment.N=1"}});
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.artifacts.size(), 1u);
  const auto rows = lines_of(slurp(out / "path_00000.csv"));
  EXPECT_EQ(rows.back().substr(rows.back().find(',')), ",-2.0000000000000000e+00,0");

  const auto bad = run_quiet({config_path("simulate_zero.yaml"), out.string(), std::nullopt, 1, {"model.kernels.3.tau=1"}});
  EXPECT_EQ(bad.exit_code, 2);
}

TEST(Cli, FailedAssertionStillCompletes) {
  const auto out = scratch("assert_fail");
  const auto r = run_quiet({config_path("fk_brownian.yaml"), out.string(), std::nullopt, 1,
                            {"experiment.N=2000", "experiment.assert.expected=5.0"}});
  EXPECT_EQ(r.exit_code, 0);
  const auto summary = slurp(out / "summary.txt");
  EXPECT_NE(summary.find("FAIL fk_closed_form"), std::string::npos) << summary;
  EXPECT_NE(summary.find("PASS flow_exact"), std::string::npos) << summary;
}

TEST(Cli, CsvBytesIndependentOfThreads) {
  std::string first;
  for (int threads : {1, 3}) {
    const auto out = scratch("threads" + std::to_string(threads));
    const auto r = run_quiet({config_path("robustness_ts.yaml"), out.string(), std::nullopt, threads,
                              {"experiment.N=300"}});
    ASSERT_EQ(r.exit_code, 0);
    const auto csv = slurp(out / "sweep.csv");
    if (first.empty()) first = csv;
    else EXPECT_EQ(csv, first);
  }
}

TEST(Cli, ManifestRederivesArtifacts) {
  const auto out = scratch("manifest");
  const auto r = run_quiet({config_path("fk_brownian.yaml"), out.string(), 77, 1, {"experiment.N=500"}});
  ASSERT_EQ(r.exit_code, 0);
  const YAML::Node manifest = YAML::LoadFile((out / "manifest.yaml").string());
  EXPECT_EQ(manifest["seed"].as<std::uint64_t>(), 77u);

  // the echoed config alone reproduces every artifact
  const auto again = scratch("manifest_again");
  YAML::Emitter echo;
  echo << manifest["config"];
  const auto path = write_config(again, echo.c_str());
  const auto r2 = run_quiet({path.string(), (again / "out").string(), std::nullopt, 2, {}});
  ASSERT_EQ(r2.exit_code, 0);
  for (const auto& entry : manifest["artifacts"]) {
    const auto name = entry["file"].as<std::string>();
    EXPECT_EQ(git_blob_sha1(slurp(again / "out" / name)), entry["sha1"].as<std::string>()) << name;
  }
}

TEST(Cli, DefaultOutputDirectoryFromEnvironment) {
  ::setenv("SFDDE_OUT_DIR", "/tmp/sfdde_env_out", 1);
  EXPECT_EQ(default_out_dir(), "/tmp/sfdde_env_out");
  ::unsetenv("SFDDE_OUT_DIR");
  EXPECT_EQ(default_out_dir(), "sfdde-out");
}
