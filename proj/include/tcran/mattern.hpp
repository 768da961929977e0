#pragma once

#include <optional>

#include "tcran/scenario.hpp"

namespace tcran {

// Classic weight-throwing detection with a fixed oracle at the initiator. Used as
// the failure-free reference: the workload and computation-message delays are
// the same as in the simulator, so both runs terminate at the same instant.
struct MatternResult {
  std::optional<SimTime> announcement;
  std::optional<SimTime> truth_termination;
  std::uint64_t computation_msgs = 0;
  std::uint64_t control_msgs = 0;  // credit returned to the oracle
  bool horizon_exceeded = false;
};

// Throws std::invalid_argument for scenarios with channel or node events.
MatternResult mattern_reference_run(const Scenario& s, SimTime horizon);

}  // namespace tcran
