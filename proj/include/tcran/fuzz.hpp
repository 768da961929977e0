#pragma once

#include <map>
#include <string>
#include <vector>

#include "tcran/checker.hpp"

namespace tcran {

struct FuzzConfig {
  std::uint64_t runs = 1000;
  std::uint64_t base_seed = 42;
  std::size_t max_nodes = 30;
  double pu_rate = 0.3;
  double fail_rate = 0.1;
  unsigned threads = 0;  // 0: hardware concurrency
  SimTime horizon = SimConfig{}.horizon;
  Mutation mutation = Mutation::None;
};

// Scenario for run i of a suite: seed base+i, 1..max_nodes nodes, 2..5 channels.
// About a quarter of the seeds are failure-free.
Scenario fuzz_scenario(const FuzzConfig& cfg, std::uint64_t i);

struct FuzzFailure {
  std::uint64_t seed = 0;
  std::vector<std::string> violations;  // prefixed "safety: ", "liveness: ", "bounds: "
  std::string scenario;                 // rendered scenario text
  std::string trace;                    // replayable trace of the failing run
};

struct BoundTotals {
  std::uint64_t max_count = 0;
  std::uint64_t exceeded = 0;  // runs where count > bound
};

struct FuzzSummary {
  std::uint64_t runs = 0;
  std::uint64_t failure_free = 0;
  std::uint64_t strong = 0;  // runs with a strong announcement
  std::uint64_t weak = 0;
  std::uint64_t ff_strong = 0;  // failure-free runs that announced strong
  std::uint64_t early_strong = 0;
  std::uint64_t weak_mismatch = 0;
  std::uint64_t conservation_failures = 0;
  std::uint64_t conservation_checks = 0;
  std::uint64_t cycle_runs = 0;
  std::uint64_t baseline_checked = 0;
  std::uint64_t baseline_mismatch = 0;
  std::map<MsgKind, BoundTotals> bounds;
  std::vector<FuzzFailure> failures;  // ordered by seed
  bool ok() const { return failures.empty() && baseline_mismatch == 0; }
};

// Runs the suite over worker threads. The summary does not depend on the thread count.
FuzzSummary run_fuzz(const FuzzConfig& cfg);

std::string render_summary(const FuzzSummary& s);

}  // namespace tcran
