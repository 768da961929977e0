#pragma once

#include <array>
#include <cstdint>

#include "tcran/core.hpp"

namespace tcran {

// Message and structure counters collected during one run. All fields only grow.
struct ComplexityCounters {
  std::array<std::uint64_t, kMsgKinds> sent{};
  // Reconciliation traffic (special messages, refunds, handshake for retried surrenders).
  std::array<std::uint64_t, kMsgKinds> retries{};
  std::uint64_t dropped = 0;
  std::uint64_t ack_drops = 0;  // injected AcK/AAcK losses
  std::uint64_t n_participants = 0;  // N: nodes that ever ran the computation or held credit
  std::uint64_t delta = 0;           // maximum degree of the topology
  std::uint64_t height = 0;          // maximum observed tree height
  std::uint64_t n_leave = 0;         // A4 executions
  std::uint64_t n_affected = 0;      // cut-off episodes
  std::uint64_t n_neighbor = 0;      // maximum participating neighbors of any node

  std::uint64_t count(MsgKind k) const { return sent[static_cast<std::size_t>(k)]; }
  std::uint64_t retry(MsgKind k) const { return retries[static_cast<std::size_t>(k)]; }
};

}  // namespace tcran
