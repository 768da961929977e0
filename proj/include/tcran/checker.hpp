#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tcran/counters.hpp"
#include "tcran/simnet.hpp"

namespace tcran {

struct SafetyViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LivenessViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BoundExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CycleDetected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact sum of all credit in the system: node holdings, stranded pools, credit in
// flight, and each unresolved surrender counted once however many copies exist.
Credit global_credit_sum(const Snapshot& s);

struct GroundTruth {
  bool terminated = false;       // every node passive, no COM in transit
  bool live_quiescent = false;   // every reachable node passive, no COM in transit
  std::vector<NodeId> cut_off;
};
GroundTruth ground_truth(const Snapshot& s);

// Throws SafetyViolation.
void assert_safety(const Announcement& a, const Snapshot& s);

// Parent-pointer height rooted at the chief (root = 1). Cut-off nodes that still
// hold credit form one extra level below the chief. Throws CycleDetected.
std::uint64_t tree_height(const Snapshot& s);

struct BoundLine {
  MsgKind kind;
  std::uint64_t count = 0;
  std::uint64_t bound = 0;
  bool pass = true;
};
std::vector<BoundLine> message_bounds_report(const ComplexityCounters& c);

struct CheckedRun {
  SimOutcome outcome;
  std::vector<TraceEvent> trace;
  std::vector<std::string> safety;
  std::vector<std::string> liveness;
  std::vector<std::string> bounds;
  std::vector<BoundLine> bound_lines;
  std::string liveness_note;
  std::uint64_t conservation_checks = 0;
  std::optional<std::uint64_t> height_at_strong;
  std::optional<std::uint64_t> height_at_weak;
  // Transient parent cycles seen between events. Re-parenting to a creditor can
  // close one under message reordering; they are reported, not fatal.
  std::vector<std::string> cycles;
  std::uint64_t cycle_events = 0;
  bool strong_cycle = false;
  bool weak_cycle = false;
  bool ok() const { return safety.empty() && liveness.empty() && bounds.empty(); }
};

// Throws LivenessViolation. `run` must carry the outcome and announcement heights.
void assert_liveness(const CheckedRun& run, const Scenario& s, const Simulator& sim);

using Observer = std::function<void(const Simulator&)>;
// Runs the scenario with every check after every event; violations are collected.
CheckedRun run_checked(const Scenario& s, const SimConfig& cfg, const Observer& observe = {});

}  // namespace tcran
