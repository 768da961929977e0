#pragma once

#include <string>

#include "tcran/checker.hpp"

namespace tcran {

// Slack k in the "Height + k message rounds" latency check (reported only).
inline constexpr std::uint64_t kLatencySlack = 4;

struct RunReport {
  std::string scenario_path;
  std::string trace_path;  // empty when no trace was written
  std::uint64_t seed = 0;
  std::vector<Announcement> announcements;
  std::optional<SimTime> truth_termination;
  bool horizon_exceeded = false;
  SimTime end_time = 0;
  std::uint64_t events = 0;
  ComplexityCounters counters;
  std::vector<BoundLine> bounds;
  std::uint64_t drops = 0;
  std::uint64_t stale_discards = 0;
  std::uint64_t void_handshakes = 0;
  std::uint64_t conservation_checks = 0;
  std::vector<std::string> safety;
  std::vector<std::string> liveness;
  std::vector<std::string> bound_violations;
  std::uint64_t cycle_events = 0;
  // Strong announcement delay after ground-truth termination, against the
  // Height + k rounds allowance (one round = d_max).
  std::optional<SimTime> latency;
  SimTime latency_allowance = 0;

  int exit_code() const;  // 0, or 3/4/5 for the first failing verdict class
};

RunReport make_report(const Scenario& s, const CheckedRun& run, std::string scenario_path,
                      std::string trace_path);

std::string render_text(const RunReport& r);
// One "key=value" pair per line in a fixed order; identical for identical runs.
std::string render_machine(const RunReport& r);

}  // namespace tcran
