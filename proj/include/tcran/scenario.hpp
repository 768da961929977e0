#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tcran/core.hpp"
#include "tcran/protocol.hpp"

namespace tcran {

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A fanout executed `offset` after the node's first activation. Fraction shares
// are taken of the hold at that instant; absolute shares are taken as written.
struct PlanEntry {
  SimTime offset = 0;
  bool fraction = false;
  FanoutPlan shares;
  bool operator==(const PlanEntry&) const = default;
};

struct ScenarioEvent {
  enum class Kind { PuAppear, PuDisappear, Fail, Recover, Crash, Join };
  SimTime time = 0;
  Kind kind = Kind::PuAppear;
  std::uint32_t target = 0;  // channel for PU events, node otherwise
  bool operator==(const ScenarioEvent&) const = default;
};

struct StartSpec {
  NodeId node = 0;
  Credit credit;
  SimTime time = 0;
  std::uint64_t session = 1;
  bool operator==(const StartSpec&) const = default;
};

struct Params {
  SimTime d_min = kTicksPerUnit / 10;
  SimTime d_max = kTicksPerUnit;
  SimTime d_ack = kTicksPerUnit / 100;
  SimTime d_detect = kTicksPerUnit;
  SimTime t_e = 5 * kTicksPerUnit;
  SimTime weak_wait = 50 * kTicksPerUnit;
  Credit ack_drop;  // probability an AcK/AAcK is lost
  bool freeze_affected = true;
  SplitStrategy split = SplitStrategy::Equal;
  ChoicePolicy choice = ChoicePolicy::LowestId;
  std::uint64_t seed = 1;
  bool operator==(const Params&) const = default;
};

struct Scenario {
  std::vector<NodeId> nodes;
  std::set<ChannelId> gcs;
  std::map<NodeId, std::set<ChannelId>> lcs;
  std::set<std::pair<NodeId, NodeId>> edges;  // stored with first < second
  std::optional<StartSpec> start;
  std::map<NodeId, SimTime> workload;
  std::map<NodeId, std::vector<PlanEntry>> plans;
  std::vector<ScenarioEvent> events;  // sorted by time, stable
  Params params;

  std::set<NodeId> neighbors(NodeId n) const;
  bool failure_free() const { return events.empty() && params.ack_drop.is_zero(); }
  bool operator==(const Scenario&) const = default;
};

SimTime parse_time(const std::string& s);  // "12", "0.25" (units) -> ticks
std::string format_time(SimTime t);

Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);
std::string render_scenario(const Scenario& s);
// Throws ValidationError naming the violated rule.
void validate_scenario(const Scenario& s);

Scenario gen_random_scenario(std::uint64_t seed, std::size_t n_nodes, std::size_t g_channels,
                             double pu_rate, double fail_rate);

// Portable seeded generator; identical output on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : x_(seed) {}
  std::uint64_t next();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  bool chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }

 private:
  std::uint64_t x_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace tcran
