// Command-line front end: run a scenario, fuzz random suites, replay traces.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tcran/fuzz.hpp"
#include "tcran/report.hpp"

namespace {

using namespace tcran;

// Exit codes. Run verdicts come from RunReport::exit_code().
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitSafety = 3;
constexpr int kExitLiveness = 4;
constexpr int kExitBounds = 5;
constexpr int kExitReplay = 6;
constexpr int kExitBaseline = 7;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

SimTime default_horizon() {
  if (const char* env = std::getenv("TCRAN_HORIZON")) return parse_time(env);
  return SimConfig{}.horizon;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& trace_out,
            SimTime horizon, bool machine, Mutation mutation) {
  Scenario s;
  try {
    s = load_scenario_file(path);
    if (seed) s.params.seed = *seed;
    validate_scenario(s);
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  }
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.mutation = mutation;
  cfg.record_trace = !trace_out.empty();
  CheckedRun run = run_checked(s, cfg);
  if (!trace_out.empty()) write_file(trace_out, format_trace(s, cfg, run.trace));
  RunReport rep = make_report(s, run, path, trace_out);
  std::cout << (machine ? render_machine(rep) : render_text(rep));
  return rep.exit_code();
}

int cmd_fuzz(const FuzzConfig& cfg, const std::string& dump_dir) {
  FuzzSummary sum = run_fuzz(cfg);
  std::cout << render_summary(sum);
  if (!sum.failures.empty()) {
    std::filesystem::create_directories(dump_dir);
    for (const auto& f : sum.failures) {
      const auto base = std::filesystem::path(dump_dir) / ("seed-" + std::to_string(f.seed));
      write_file(base.string() + ".scn", f.scenario);
      write_file(base.string() + ".trace", f.trace);
    }
    std::cout << "failing scenarios and traces written to " << dump_dir << "\n";
  }
  int code = 0;
  for (const auto& f : sum.failures)
    for (const auto& v : f.violations) {
      int c = v.rfind("safety", 0) == 0     ? kExitSafety
              : v.rfind("liveness", 0) == 0 ? kExitLiveness
              : v.rfind("bounds", 0) == 0   ? kExitBounds
                                            : kExitBaseline;
      code = code ? std::min(code, c) : c;
    }
  return code;
}

int cmd_replay(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    replay_trace(text);
  } catch (const ReplayDivergence& e) {
    std::cout << "replay diverged: " << e.what() << "\n";
    return kExitReplay;
  } catch (const ParseError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  } catch (const ValidationError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  }
  std::cout << "replay identical\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Termination detection simulator for multi-channel cognitive radio networks"};
  app.set_version_flag("--version", "tcran 1.0");

  std::string scenario, trace_out, replay, report = "text", horizon_text, mutant = "none";
  std::string dump_dir = "fuzz-failures";
  std::optional<std::uint64_t> seed;
  std::uint64_t fuzz_runs = 0;
  FuzzConfig fz;

  app.add_option("--scenario", scenario, "Scenario file to run");
  app.add_option("--seed", seed, "Override the scenario seed; base seed with --fuzz (default 42)");
  app.add_option("--trace-out", trace_out, "Write the replayable trace to this file");
  app.add_option("--horizon", horizon_text,
                 "Simulation horizon in time units (default $TCRAN_HORIZON, else 100000)");
  app.add_option("--report", report, "Report format")
      ->check(CLI::IsMember({"text", "machine"}))
      ->capture_default_str();
  app.add_option("--fuzz", fuzz_runs, "Run N random scenarios with every check")->check(CLI::PositiveNumber);
  app.add_option("--replay", replay, "Re-run a trace and compare it line by line");
  app.add_option("--max-nodes", fz.max_nodes, "Fuzz: largest network size")->capture_default_str();
  app.add_option("--pu-rate", fz.pu_rate, "Fuzz: primary user activity rate")->capture_default_str();
  app.add_option("--fail-rate", fz.fail_rate, "Fuzz: node failure rate")->capture_default_str();
  app.add_option("--threads", fz.threads, "Fuzz: worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--dump-dir", dump_dir, "Fuzz: where failing scenarios and traces go")->capture_default_str();
  app.add_option("--mutant", mutant)->group("");  // fault injection for the checker's own tests

  CLI11_PARSE(app, argc, argv);

  const int modes = !scenario.empty() + (fuzz_runs > 0) + !replay.empty();
  if (modes != 1) {
    std::cerr << "exactly one of --scenario, --fuzz, --replay is required\n" << app.help();
    return kExitUsage;
  }
  auto mutation = parse_mutation(mutant);
  if (!mutation) {
    std::cerr << "unknown mutant " << mutant << "\n";
    return kExitUsage;
  }
  SimTime horizon;
  try {
    horizon = horizon_text.empty() ? default_horizon() : parse_time(horizon_text);
  } catch (const std::exception& e) {
    std::cerr << "bad horizon: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (!replay.empty()) return cmd_replay(replay);
    if (fuzz_runs > 0) {
      fz.runs = fuzz_runs;
      fz.base_seed = seed.value_or(fz.base_seed);
      fz.horizon = horizon;
      fz.mutation = *mutation;
      return cmd_fuzz(fz, dump_dir);
    }
    return cmd_run(scenario, seed, trace_out, horizon, report == "machine", *mutation);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
