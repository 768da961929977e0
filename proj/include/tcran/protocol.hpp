#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tcran/core.hpp"

namespace tcran {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AlreadyActive : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct StaleMessage : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct InsufficientCredit : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct UnknownSender : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct NoPendingHandshake : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct NotChiefExecutive : ProtocolError {
  using ProtocolError::ProtocolError;
};

enum class Activity { Passive, Active };

struct Parent {
  enum class Kind { Unset, Self, Node };
  Kind kind = Kind::Unset;
  NodeId node = 0;
  static Parent unset() { return {}; }
  static Parent self() { return {Kind::Self, 0}; }
  static Parent of(NodeId n) { return {Kind::Node, n}; }
  bool is_self() const { return kind == Kind::Self; }
  bool is_unset() const { return kind == Kind::Unset; }
  bool is(NodeId n) const { return kind == Kind::Node && node == n; }
  bool operator==(const Parent&) const = default;
};

// Sender side of a three-way handshake: credit stays here until AcK.
struct PendingSurrender {
  SurrenderId id;
  NodeId target = 0;
  Credit credit;
  std::uint32_t b = 0;
  std::map<NodeId, Credit> child_map;
  bool from_child = false;
  bool handover = false;
  std::optional<ChiefLedger> ledger;
  SimTime deadline = 0;
  bool operator==(const PendingSurrender&) const = default;
};

// Receiver side: credit is committed to hold on AAcK.
struct Escrow {
  SurrenderId id;
  NodeId from = 0;
  Credit credit;
  SimTime deadline = 0;
  bool operator==(const Escrow&) const = default;
};

struct NodeProtocolState {
  NodeId id = 0;
  Activity state = Activity::Passive;
  Parent parent;
  Credit hold;
  std::map<NodeId, Credit> in_map;
  std::map<NodeId, Credit> out_map;
  SessionTag tag;
  std::optional<SessionTag> terminated;  // set by a strong TM
  bool weak_seen = false;

  // Chief executive only.
  std::optional<ChiefLedger> ledger;
  std::optional<SimTime> weak_deadline;
  bool settled = false;  // chief finished its own work and holds credit passively
  bool weak_announced = false;
  bool strong_announced = false;

  std::vector<PendingSurrender> pending;
  std::vector<Escrow> escrow;
  std::set<NodeId> neighbors;
  std::uint64_t next_seq = 1;

  std::uint64_t stale_discards = 0;
  std::uint64_t unknown_sender = 0;

  bool is_chief() const { return parent.is_self(); }
  bool operator==(const NodeProtocolState&) const = default;
};

// Remote state the guards refer to (STATE(k), parent_k, current chief).
class PeerView {
 public:
  virtual ~PeerView() = default;
  virtual bool is_active(NodeId k) const = 0;
  virtual std::optional<NodeId> parent_of(NodeId k) const = 0;
  virtual std::optional<NodeId> chief() const = 0;
};

inline constexpr NodeId kChief = std::numeric_limits<NodeId>::max();

struct Send {
  NodeId dest = 0;  // kChief: resolved to the current chief on delivery
  Message msg;
};

enum class TimerKind { AckWait, AAckWait, WeakDeadline };
struct TimerRequest {
  TimerKind kind;
  SurrenderId id;
  SimTime deadline = 0;
};

struct TransitionOutput {
  NodeProtocolState state;
  std::vector<Send> sends;
  std::vector<TimerRequest> timers;
  std::optional<TermMode> announcement;
  std::string label;
};

enum class ChoicePolicy { LowestId, HighestId };
// Fault injection for testing the checker. FlipStrongGuard: a passive chief keeps
// the role and announces strong without holding all credit. KeepInMapOnImPC: the
// receiver of an ImPC copies the sender's in-map entry into hold without clearing it.
enum class Mutation { None, FlipStrongGuard, KeepInMapOnImPC };

struct ProtocolConfig {
  SimTime t_e = 5 * kTicksPerUnit;
  SimTime weak_wait = 50 * kTicksPerUnit;
  ChoicePolicy choice = ChoicePolicy::LowestId;
  Mutation mutation = Mutation::None;
};

using FanoutPlan = std::vector<std::pair<NodeId, Credit>>;

TransitionOutput on_external_start(NodeProtocolState s, const Credit& total, const FanoutPlan& plan,
                                   std::uint64_t session);
TransitionOutput on_com(NodeProtocolState s, NodeId from, const Message& m);
TransitionOutput distribute(NodeProtocolState s, const FanoutPlan& plan);
// With no peer or chief reachable the node goes passive with label "A4.4-wait"
// and keeps its credit; the caller retries via needs_surrender later.
TransitionOutput on_idle(NodeProtocolState s, const PeerView& view, SimTime now,
                         const ProtocolConfig& cfg);
TransitionOutput on_impc(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                         const ProtocolConfig& cfg);
TransitionOutput on_imp(NodeProtocolState s, NodeId from, const Message& m);
TransitionOutput on_ack(NodeProtocolState s, NodeId from, const Message& m);
TransitionOutput on_aack(NodeProtocolState s, NodeId from, const Message& m);
// Sender gave up waiting for AcK: retry towards the chief.
TransitionOutput on_handshake_timeout(NodeProtocolState s, const SurrenderId& id,
                                      const ProtocolConfig& cfg);
// Receiver gave up waiting for AAcK: forward the escrowed credit to the chief.
TransitionOutput on_aack_timeout(NodeProtocolState s, const SurrenderId& id, SimTime now,
                                 const ProtocolConfig& cfg);
TransitionOutput on_neighbor_affected(NodeProtocolState s, NodeId affected, std::uint64_t epoch,
                                      const Credit& resident, SimTime now,
                                      const ProtocolConfig& cfg);
TransitionOutput on_pan(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                        const ProtocolConfig& cfg);
TransitionOutput on_recovery(NodeProtocolState s, const PeerView& view, std::uint64_t epoch,
                             SimTime now, const ProtocolConfig& cfg);
TransitionOutput on_nap(NodeProtocolState s, NodeId from, const Message& m);
TransitionOutput on_special(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                            const ProtocolConfig& cfg);
TransitionOutput on_refund(NodeProtocolState s, NodeId from, const Message& m);
// view, when given, lets the chief drop out-records of nodes that already left.
TransitionOutput try_announce(NodeProtocolState s, SimTime now, const ProtocolConfig& cfg,
                              const PeerView* view = nullptr);
TransitionOutput on_tm(NodeProtocolState s, const Message& m);

// Credit physically held at the node: hold, in-credit and the chief's moved ledger.
// Escrow and pending surrenders are accounted per SurrenderId by the checker.
Credit local_credit(const NodeProtocolState& s);

// True when a passive, non-chief node still holds credit and must surrender it.
bool needs_surrender(const NodeProtocolState& s);

}  // namespace tcran
