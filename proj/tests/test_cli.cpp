#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("locpoly_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  CliResult run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("'") + LOCPOLY_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  fs::path write_json(const std::string& name, const json& j) const { return write(name, j.dump()); }

  /// generate a dataset; returns the parsed sidecar.
  json generate(const std::string& name, const json& spec) const {
    const auto spec_path = write_json(name + ".spec.json", spec);
    const auto r = run("generate '" + spec_path.string() + "' '" + path(name + ".csv").string() + "'");
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(slurp(path(name + ".truth.json")));
  }

  std::string csv(const std::string& name) const { return "'" + path(name + ".csv").string() + "'"; }

  fs::path dir_;
};

double max_abs_diff(const json& a, const json& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i].get<double>() - b[i].get<double>()));
  return m;
}

} // namespace

TEST_F(CliTest, GenerateThenFitRecoversTruth) {
  const auto truth = generate("q", {{"d", 1}, {"D", 3}, {"degree", 2}, {"n", 500}, {"seed", 4}, {"noise", {{"kind", "sphere"}, {"sigma", 0.0}}}});
  ASSERT_EQ(truth["schema"], 1);
  for (const char* op : {"identity", "d1", "d1d1"}) {
    const auto r = run("fit " + csv("q") + " --k 3 --operator " + op);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = json::parse(r.out);
    EXPECT_EQ(report["schema"], 1);
    EXPECT_EQ(report["status"], "ok");
    EXPECT_EQ(report["D"], 3);
    EXPECT_LE(max_abs_diff(report["value"], truth["truth"][op]), 1e-8) << op;
  }
}

TEST_F(CliTest, SidecarIdentityIsValueAtOrigin) {
  const auto truth = generate("c", {{"d", 2}, {"D", 2}, {"degree", 2}, {"n", 5}, {"seed", 1}});
  // Graded order puts the constant monomial first.
  for (int j = 0; j < 2; ++j) EXPECT_EQ(truth["truth"]["identity"][j], truth["coefficients"][j][0]);
  EXPECT_EQ(truth["basis"].size(), 6u);
}

TEST_F(CliTest, DerivativeOfIdentityFunction) {
  const auto truth =
      generate("lin", {{"d", 1}, {"D", 1}, {"degree", 1}, {"n", 300}, {"coefficients", {{0.0, 1.0}}}, {"noise", {{"sigma", 0.0}}}});
  EXPECT_EQ(truth["truth"]["d1"][0], 1.0);
  const auto r = run("fit " + csv("lin") + " --k 2 --operator d1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)["value"][0].get<double>(), 1.0, 1e-10);
}

TEST_F(CliTest, OutputFileAndConfigMerge) {
  generate("q", {{"d", 1}, {"D", 2}, {"n", 400}, {"seed", 2}, {"noise", {{"sigma", 0.05}}}});
  const auto cfg = write_json("cfg.json", {{"k", 3}, {"operator", "d1"}, {"bandwidth_constant", 0.8}});
  auto r = run("fit " + csv("q") + " --config '" + cfg.string() + "' -o '" + path("rep.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = json::parse(slurp(path("rep.json")));
  EXPECT_EQ(report["k"], 3);
  EXPECT_EQ(report["operator"], "d1");
  EXPECT_EQ(report["bandwidth_constant"], 0.8);
  // Flags override the file.
  r = run("fit " + csv("q") + " --config '" + cfg.string() + "' --operator identity");
  ASSERT_EQ(r.code, 0) << r.err;
  report = json::parse(r.out);
  EXPECT_EQ(report["operator"], "identity");
  EXPECT_EQ(report["k"], 3);
}

TEST_F(CliTest, CenterTranslatesTheTarget) {
  generate("q", {{"d", 1}, {"D", 1}, {"degree", 1}, {"n", 400}, {"coefficients", {{2.0, 3.0}}}, {"noise", {{"sigma", 0.0}}}});
  const auto r = run("fit " + csv("q") + " --k 2 --center 0.5 -b 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)["value"][0].get<double>(), 2.0 + 3.0 * 0.5, 1e-10);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  generate("q", {{"n", 50}});
  EXPECT_EQ(run("fit " + csv("q") + " --k 0").code, 2);
  EXPECT_EQ(run("fit " + csv("q") + " --operator grad").code, 2);
  EXPECT_EQ(run("fit " + csv("q") + " --k 2 --operator d1d1").code, 2);
  EXPECT_EQ(run("fit " + csv("q") + " --operator d2").code, 2);
  EXPECT_EQ(run("fit " + csv("q") + " -b -1").code, 2);
  EXPECT_EQ(run("robust " + csv("q") + " --eps0 0.5").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  const auto r = run("fit " + csv("q") + " --k 0");
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << "one-line message expected: " << r.err;
}

TEST_F(CliTest, DataErrorsExitThree) {
  write("bad.csv", "x1,y1\n0.1,abc\n");
  const auto r = run("fit '" + path("bad.csv").string() + "'");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("ParseError"), std::string::npos) << r.err;
  write("hdr.csv", "a,b\n1,2\n");
  EXPECT_EQ(run("fit '" + path("hdr.csv").string() + "'").code, 3);
}

TEST_F(CliTest, NumericalDegeneracyExitsFour) {
  // Three samples at two distinct sites cannot fix a quadratic.
  write("rank.csv", "x1,y1\n0.1,1\n0.1,1\n-0.2,2\n");
  auto r = run("fit '" + path("rank.csv").string() + "' --k 3 -b 10");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("RankDeficient"), std::string::npos) << r.err;
  write("few.csv", "x1,y1\n0.1,1\n0.2,2\n");
  r = run("fit '" + path("few.csv").string() + "' --k 3 -b 10");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("InsufficientSamples"), std::string::npos) << r.err;
}

TEST_F(CliTest, RobustReportsSplitCount) {
  generate("q", {{"n", 2000}, {"D", 2}, {"seed", 5}, {"noise", {{"sigma", 0.1}}}});
  const auto r = run("robust " + csv("q") + " --k 3 --failure-prob 0.1 --eps0 0.4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(r.out);
  EXPECT_EQ(report["nu"], 116);
  EXPECT_EQ(report["splits"].size(), 116u);
  EXPECT_EQ(report["mode"], "adaptive");
  EXPECT_GT(2 * report["covered"].get<int>(), 116);
}

TEST_F(CliTest, RobustSingleSplitMatchesFit) {
  generate("q", {{"n", 600}, {"D", 3}, {"seed", 6}, {"noise", {{"kind", "gaussian"}, {"sigma", 0.2}}}});
  const auto fit = run("fit " + csv("q") + " --k 3 --operator d1");
  const auto robust = run("robust " + csv("q") + " --k 3 --operator d1 --failure-prob 0.98019867330675525");
  ASSERT_EQ(fit.code, 0) << fit.err;
  ASSERT_EQ(robust.code, 0) << robust.err;
  const auto a = json::parse(fit.out), b = json::parse(robust.out);
  EXPECT_EQ(b["nu"], 1);
  for (std::size_t j = 0; j < 3; ++j) {
    const double va = a["value"][j], vb = b["value"][j];
    EXPECT_NEAR(va, vb, 1e-12 * std::max(1.0, std::abs(va)));
  }
}

TEST_F(CliTest, RobustTooFewSamplesExitsThree) {
  generate("q", {{"n", 50}, {"noise", {{"sigma", 0.1}}}});
  const auto r = run("robust " + csv("q") + " --k 3");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("TooFewSamples"), std::string::npos) << r.err;
}

TEST_F(CliTest, RobustFixedRadiusTooSmallExitsFive) {
  generate("q", {{"n", 3000}, {"noise", {{"sigma", 0.5}}}});
  const auto r = run("robust " + csv("q") + " --k 2 --radius 1e-12");
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("NoMajorityBall"), std::string::npos) << r.err;
  EXPECT_EQ(run("robust " + csv("q") + " --k 2 --radius 100").code, 0);
}

TEST_F(CliTest, ConvergenceSinglePointAndDeterminism) {
  const auto spec = write_json("spec.json", {{"d", 1},
                                             {"k", 3},
                                             {"D_list", {1}},
                                             {"n_list", {100}},
                                             {"trials", 1},
                                             {"noise", {{"kind", "sphere"}, {"sigma", 0.0}}},
                                             {"seed", 3}});
  auto r = run("convergence '" + spec.string() + "' '" + path("out1").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto agg = slurp(path("out1") / "aggregate.csv");
  std::istringstream lines(agg);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(header, "D,n,mean_error,var_error,trials_ok");
  const double err = std::stod(row.substr(row.find(',', row.find(',') + 1) + 1));
  EXPECT_LE(err, 1e-8);
  const auto rate = json::parse(slurp(path("out1") / "rate.json"));
  EXPECT_EQ(rate["status"], "too_few_points");
  EXPECT_TRUE(fs::exists(path("out1") / "convergence.svg"));
}

TEST_F(CliTest, ConvergenceRerunIsByteIdentical) {
  const auto spec = write_json("spec.json", {{"D_list", {1, 5}},
                                             {"n_list", {100, 300, 1000}},
                                             {"trials", 3},
                                             {"noise", {{"kind", "ball"}, {"sigma", 0.1}}},
                                             {"seed", 11}});
  ASSERT_EQ(run("convergence '" + spec.string() + "' '" + path("a").string() + "' --threads 1").code, 0);
  ASSERT_EQ(run("convergence '" + spec.string() + "' '" + path("b").string() + "' --threads 3").code, 0);
  for (const char* f : {"raw.csv", "aggregate.csv", "convergence.svg", "rate.json"})
    EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
  const auto rate = json::parse(slurp(path("a") / "rate.json"));
  EXPECT_EQ(rate["schema"], 1);
  EXPECT_EQ(rate["status"], "ok");
  EXPECT_NEAR(rate["r_expected"].get<double>(), 3.0 / 7.0, 1e-15);
}

TEST_F(CliTest, ConvergenceInvalidSpecLeavesNoOutputs) {
  const auto spec = write_json("spec.json", {{"trials", 0}});
  const auto r = run("convergence '" + spec.string() + "' '" + path("out").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("SpecInvalid"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("out") / "raw.csv"));
  write("broken.json", "{ not json");
  EXPECT_EQ(run("convergence '" + path("broken.json").string() + "' '" + path("out").string() + "'").code, 2);
}

TEST_F(CliTest, ConvergenceAllTrialsFailedExitsFour) {
  const auto spec = write_json("spec.json", {{"n_list", {1, 2}}, {"trials", 2}});
  const auto r = run("convergence '" + spec.string() + "' '" + path("out").string() + "'");
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(fs::exists(path("out") / "raw.csv"));
  EXPECT_FALSE(fs::exists(path("out") / "aggregate.csv"));
}

TEST_F(CliTest, GenerateIsDeterministic) {
  const json spec{{"d", 2}, {"D", 4}, {"n", 100}, {"seed", 8}, {"noise", {{"kind", "gaussian"}, {"sigma", 0.3}}}};
  generate("a", spec);
  generate("b", spec);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.truth.json")), slurp(path("b.truth.json")));
  EXPECT_EQ(slurp(path("a.csv")).substr(0, 18), "x1,x2,y1,y2,y3,y4\n");
}
