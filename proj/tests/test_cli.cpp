#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rcm/config.hpp"

namespace fs = std::filesystem;
using namespace rcm;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rcm-cli-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(RCM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// File content with comment lines dropped.
std::string body(const fs::path& p) {
  std::stringstream in(slurp(p)), out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out << line << "\n";
  }
  return out.str();
}

}  // namespace

TEST(Config, ValidExample) {
  const auto p = parse_config("experiment=decay\nlaw=constant:1\nd=1\nn=64\nseed=7");
  ASSERT_TRUE(p.ok()) << format_issues(p.issues);
  EXPECT_EQ(p.config.experiment, "decay");
  EXPECT_EQ(p.config.law->descriptor(), ConductanceLaw::constant(1).descriptor());
  EXPECT_EQ(*p.config.d, 1);
  EXPECT_EQ(*p.config.n, 64);
  EXPECT_EQ(*p.config.seed, 7u);
}

TEST(Config, PeriodTwoReportsLine) {
  const auto p = parse_config("# header\nn=2");
  ASSERT_EQ(p.issues.size(), 1u);
  EXPECT_EQ(p.issues[0].line, 2);
  EXPECT_EQ(p.issues[0].message, "n must be >= 3");
}

TEST(Config, TwoPointLaw) {
  const auto p = parse_config("law=twopoint:0.5,1,4");
  ASSERT_TRUE(p.ok());
  const auto& tp = std::get<law::TwoPoint>(p.config.law->variant());
  EXPECT_EQ(tp.p, 0.5);
  EXPECT_EQ(tp.low, 1.0);
  EXPECT_EQ(tp.high, 4.0);
}

TEST(Config, CollectsEveryIssue) {
  const auto p = parse_config("n=2\nbogus=1\nmu=1,-0.1\nd=x\nn=5\ntimes=3,1\nnoequals\nlaw=gauss:1");
  ASSERT_EQ(p.issues.size(), 8u) << format_issues(p.issues);
  std::vector<int> lines;
  for (const auto& i : p.issues) lines.push_back(i.line);
  EXPECT_EQ(lines, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
  const auto text = format_issues(p.issues);
  EXPECT_NE(text.find("line 2: unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(text.find("line 5: duplicate key 'n'"), std::string::npos);
}

TEST(Config, ListForms) {
  const auto p = parse_config("times=geom:1,100,3\nmu=lin:1,0.5,3\nboxes=2,4");
  ASSERT_TRUE(p.ok()) << format_issues(p.issues);
  ASSERT_EQ(p.config.times->size(), 3u);
  EXPECT_NEAR((*p.config.times)[1], 10.0, 1e-12);
  EXPECT_EQ(*p.config.mu, (std::vector<double>{1.0, 0.75, 0.5}));
  EXPECT_FALSE(parse_config("times=geom:0,1,3").ok());
  EXPECT_FALSE(parse_config("boxes=1.5").ok());
}

TEST(Cli, HelpListsColumns) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("nonsense"), 2);
}

TEST(Cli, ZeroFunctionalOnConstantFieldPasses) {
  const auto out = scratch("zero");
  EXPECT_EQ(run("decay --law constant:1 --functional drift --n 64 --realizations 2 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "config.txt"));
  const auto summary = slurp(out / "summary.txt");
  EXPECT_NE(summary.find("vanishes"), std::string::npos);
  EXPECT_EQ(slurp(out / "decay.csv").rfind("# rcm-csv v1", 0), 0u);
}

TEST(Cli, RerunIsByteIdentical) {
  const auto a = scratch("det-a");
  const auto b = scratch("det-b");
  const std::string args = "decay --law twopoint:0.5,1,4 --walker conductance --d 1 --n 32 --realizations 3 "
                           "--times geom:1,100,9 --seed 5 --out ";
  ASSERT_LE(run(args + a.string() + " --workers 1"), 1);
  ASSERT_LE(run(args + b.string() + " --workers 3"), 1);
  for (const char* f : {"decay.csv", "fit.csv", "config.txt"}) EXPECT_EQ(body(a / f), body(b / f)) << f;
}

TEST(Cli, InvalidMuLeavesNoArtifacts) {
  const auto out = scratch("badmu");
  EXPECT_EQ(run("diffusivity --mu 1,0,-1 --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
  // Rejected inside the experiment rather than by the parser.
  EXPECT_EQ(run("diffusivity --mu 0.1,1 --d 1 --n 8 --realizations 1 --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "run.cfg");
    os << "experiment=field-dump\nlaw=twopoint:0.5,1,4\nd=2\nn=3\n";
  }
  const auto out = dir / "out";
  EXPECT_EQ(run("field-dump --config " + (dir / "run.cfg").string() + " --n 12 --out " + out.string()), 0);
  const auto txt = slurp(out / "field.txt");
  EXPECT_NE(txt.find("n=12"), std::string::npos) << txt.substr(0, 200);
  EXPECT_TRUE(fs::exists(out / "field.csv"));
  // Config says field-dump, subcommand says decay.
  const auto out2 = dir / "out2";
  EXPECT_EQ(run("decay --config " + (dir / "run.cfg").string() + " --out " + out2.string()), 2);
  EXPECT_FALSE(fs::exists(out2));
  {
    std::ofstream os(dir / "bad.cfg");
    os << "n=2\ncolour=blue\n";
  }
  EXPECT_EQ(run("field-dump --config " + (dir / "bad.cfg").string() + " --out " + out2.string()), 2);
  EXPECT_EQ(run("field-dump --config " + (dir / "missing.cfg").string() + " --out " + out2.string()), 2);
  EXPECT_FALSE(fs::exists(out2));
}

TEST(Cli, SpectrumArtifactsAndImport) {
  const auto out = scratch("spec");
  EXPECT_EQ(run("spectrum --d 1 --n 16 --out " + out.string()), 0);
  for (const char* f : {"spectrum.csv", "operator.coo", "measure.csv", "variance.csv", "resolvent.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(slurp(out / "operator.coo").rfind("# rcm-coo v1", 0), 0u);
  const auto again = scratch("spec-import");
  EXPECT_EQ(run("spectrum --input " + (out / "measure.csv").string() + " --out " + again.string()), 0);
  EXPECT_EQ(body(out / "variance.csv"), body(again / "variance.csv"));
  EXPECT_EQ(run("spectrum --d 2 --n 80 --out " + scratch("spec-big").string()), 2);
}

TEST(Cli, NumericalErrorsExitThree) {
  // Exact decay with the conductance walk needs a dense spectrum per field.
  const auto out = scratch("cap");
  EXPECT_EQ(run("decay --walker conductance --d 2 --n 80 --realizations 1 --out " + out.string()), 3);
  EXPECT_FALSE(fs::exists(out));
  // A saturated bad cluster is reported, not failed.
  const auto sat = scratch("sat");
  EXPECT_EQ(run("field-dump --law constant:2 --d 1 --n 5 --eta 1 --out " + sat.string()), 0);
  EXPECT_NE(slurp(sat / "summary.txt").find("saturated"), std::string::npos);
}

TEST(Cli, MsdRejectsUnboundedLaw) {
  EXPECT_EQ(run("msd --law pareto:0.25,0.1,inf --out " + scratch("msd").string()), 2);
}

TEST(Cli, SimulateWritesTrajectory) {
  const auto out = scratch("sim");
  EXPECT_EQ(run("simulate --d 2 --n 9 --horizon 5 --seed 3 --out " + out.string()), 0);
  const auto t = slurp(out / "trajectory.csv");
  EXPECT_EQ(t.rfind("# rcm-csv v1", 0), 0u);
}

TEST(Cli, NashCheckPasses) {
  EXPECT_EQ(run("nash-check --d 2 --boxes 1,2 --realizations 2 --out " + scratch("nash").string()), 0);
}
