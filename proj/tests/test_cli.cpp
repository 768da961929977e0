// Exit codes and output of the command-line tool.
#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kDir = TCRAN_SOURCE_DIR;

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " " + std::string(TCRAN_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string golden(const std::string& name) { return "--scenario " + kDir + "/goldens/" + name; }

fs::path scratch() {
  auto d = fs::temp_directory_path() / ("tcran_cli_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, WorkedExampleStrong) {
  auto r = run(golden("sec6.scn"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("announced  strong at t=31 by node 2"), std::string::npos) << r.out;
}

TEST(Cli, PrimaryUserExampleWeak) {
  auto r = run(golden("sec6_pu.scn"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("announced  weak at t=63 by node 1"), std::string::npos) << r.out;
}

TEST(Cli, MachineReport) {
  auto r = run(golden("sec6.scn") + " --report machine");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("announcement.0=strong 31 2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("exit=0\n"), std::string::npos);
  EXPECT_EQ(run(golden("sec6.scn") + " --report machine").out, r.out);
}

TEST(Cli, BrokenGuardExitsWithSafetyCode) {
  EXPECT_EQ(run(golden("sec6.scn") + " --mutant flip-strong-guard").code, 3);
  EXPECT_EQ(run(golden("sec6.scn") + " --mutant keep-in-map").code, 3);
}

TEST(Cli, ShortHorizonIsLiveness) {
  EXPECT_EQ(run(golden("sec6.scn") + " --horizon 10").code, 4);
  EXPECT_EQ(run(golden("sec6.scn"), "TCRAN_HORIZON=10").code, 4);
  EXPECT_EQ(run(golden("sec6.scn") + " --horizon 100", "TCRAN_HORIZON=10").code, 0);
}

TEST(Cli, ParseErrors) {
  auto dir = scratch();
  std::ofstream(dir / "bad.scn") << "tcran-scenario 1\n[nodes]\n1 x\n";
  auto r = run("--scenario " + (dir / "bad.scn").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
  EXPECT_EQ(run("--scenario " + (dir / "missing.scn").string()).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run(golden("sec6.scn") + " --fuzz 3").code, 1);
  EXPECT_EQ(run(golden("sec6.scn") + " --mutant nonsense").code, 1);
}

TEST(Cli, TraceReplay) {
  auto dir = scratch();
  auto trace = (dir / "sec6.trace").string();
  ASSERT_EQ(run(golden("sec6_pu.scn") + " --trace-out " + trace).code, 0);
  auto r = run("--replay " + trace);
  EXPECT_EQ(r.code, 0) << r.out;
  std::stringstream ss;
  ss << std::ifstream(trace).rdbuf();
  std::string t = ss.str();
  auto at = t.find("hold=9/10");
  ASSERT_NE(at, std::string::npos);
  t.replace(at, 9, "hold=7/10");
  std::ofstream(dir / "edited.trace") << t;
  r = run("--replay " + (dir / "edited.trace").string());
  EXPECT_EQ(r.code, 6);
  EXPECT_NE(r.out.find("diverged"), std::string::npos);
}

TEST(Cli, FuzzCleanAndRepeatable) {
  auto a = run("--fuzz 200 --seed 42");
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("violations 0"), std::string::npos);
  EXPECT_EQ(run("--fuzz 200 --seed 42 --threads 3").out, a.out);
}

TEST(Cli, FuzzFailuresAreDumped) {
  auto dir = scratch() / "dump";
  auto r = run("--fuzz 10 --mutant keep-in-map --dump-dir " + dir.string());
  EXPECT_EQ(r.code, 3) << r.out;
  std::size_t scn = 0, trace = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    scn += e.path().extension() == ".scn";
    trace += e.path().extension() == ".trace";
  }
  EXPECT_GT(scn, 0u);
  EXPECT_EQ(scn, trace);
}
