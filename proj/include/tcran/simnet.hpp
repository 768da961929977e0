#pragma once

#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tcran/counters.hpp"
#include "tcran/protocol.hpp"
#include "tcran/scenario.hpp"

namespace tcran {

struct HorizonExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownChannel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ChannelWorld {
 public:
  ChannelWorld() = default;
  ChannelWorld(std::set<ChannelId> gcs, std::map<NodeId, std::set<ChannelId>> lcs);

  std::set<ChannelId> available(NodeId n) const;  // LCS minus occupied channels
  bool affected(NodeId n) const { return available(n).empty(); }
  std::optional<ChannelId> tuned(NodeId n) const;  // lowest available channel
  const std::set<ChannelId>& occupied() const { return occupied_; }
  const std::set<ChannelId>& gcs() const { return gcs_; }

  // Returns the nodes whose affected status flipped.
  std::vector<NodeId> appear(ChannelId c);
  std::vector<NodeId> disappear(ChannelId c);

 private:
  std::set<ChannelId> gcs_;
  std::map<NodeId, std::set<ChannelId>> lcs_;
  std::set<ChannelId> occupied_;
};

// Delay for the `counter`-th message of class `cls` sent by `src`. Shared with
// the baseline so both protocols see identical computation-message delays.
SimTime sample_delay(const Params& p, NodeId src, NodeId dst, int cls, std::uint64_t counter);

struct Envelope {
  std::uint64_t id = 0;
  NodeId src = 0;
  NodeId dst = 0;  // kChief until resolved at delivery
  Message msg;
  SimTime sent = 0;
};

struct DropRecord {
  SimTime time = 0;
  NodeId dst = 0;
  MsgKind kind = MsgKind::COM;
  std::string reason;  // "affected", "failed", "crashed", "absent", "injected"
};

struct TraceEvent {
  SimTime time = 0;
  NodeId node = 0;
  std::string label;
  std::string msg;
  Credit hold;
  Credit local;
  std::string str() const;
};

struct Announcement {
  TermMode mode = TermMode::Strong;
  SimTime time = 0;
  NodeId announcer = 0;
};

struct SimConfig {
  SimTime horizon = 100000 * kTicksPerUnit;
  Mutation mutation = Mutation::None;
  bool record_trace = true;
};

// Per-node simulator state around the pure protocol state.
struct NodeRuntime {
  NodeProtocolState proto;
  bool failed = false;
  bool crashed = false;
  bool absent = false;     // not joined yet
  bool rejoining = false;  // recovered, waiting for the chief's reply to NaP
  bool participated = false;  // ran the computation or held credit
  bool planned = false;  // fanout plans already scheduled
  std::uint64_t epoch = 0;
  SimTime cut_since = 0;
  Credit stranded;  // credit of messages dropped here while cut off
  SessionTag stranded_tag;
  bool cut_off(const ChannelWorld& w) const {
    return failed || crashed || absent || w.affected(proto.id);
  }
};

struct Snapshot {
  SimTime time = 0;
  Credit total;  // C of the computation (0 before the start)
  const std::map<NodeId, NodeRuntime>* nodes = nullptr;
  std::vector<const Envelope*> in_flight;  // queued deliveries and parked chief mail
  const std::set<SurrenderId>* resolved = nullptr;
  const ChannelWorld* world = nullptr;
};

struct SimOutcome {
  std::vector<Announcement> announcements;
  bool horizon_exceeded = false;
  SimTime end_time = 0;
  std::optional<SimTime> truth_termination;
  ComplexityCounters counters;
  std::vector<DropRecord> drops;
  std::uint64_t events = 0;
  std::uint64_t stale_discards = 0;
  std::uint64_t unknown_sender = 0;
  std::uint64_t void_handshakes = 0;  // AcK/AAcK/timeouts after the record was gone
};

class Simulator {
 public:
  using Hook = std::function<void(const Simulator&, const std::optional<Announcement>&)>;

  Simulator(Scenario s, SimConfig cfg = {});

  // Processes one event. Returns false once the queue is empty or past the horizon.
  bool step();
  SimOutcome run();
  void set_hook(Hook h) { hook_ = std::move(h); }

  SimTime now() const { return now_; }
  const Scenario& scenario() const { return sc_; }
  const ChannelWorld& world() const { return world_; }
  const std::map<NodeId, NodeRuntime>& nodes() const { return nodes_; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  const SimOutcome& outcome() const { return out_; }
  std::optional<NodeId> chief() const;
  Snapshot snapshot() const;
  bool truth_terminated() const;
  bool blocked(NodeId n) const { return blocked_.count(n) > 0; }

 private:
  struct LocalItem {
    enum class Kind { Work, Plan, Timer, Retry } kind;
    SimTime due = 0;
    std::size_t plan = 0;
    TimerRequest timer{};
  };
  struct Ev {
    SimTime time = 0;
    int cls = 0;
    std::uint64_t seq = 0;
    struct Deliver {
      Envelope env;
    };
    struct Local {
      NodeId node;
      std::uint64_t item;
      std::uint64_t gen;
    };
    struct World {
      ScenarioEvent e;
    };
    struct Start {};
    struct Detect {
      NodeId node;
      std::uint64_t epoch;
    };
    std::variant<Deliver, Local, World, Start, Detect> body;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      return std::tie(a.time, a.cls, a.seq) > std::tie(b.time, b.cls, b.seq);
    }
  };
  class View;

  void push(SimTime t, int cls, decltype(Ev::body) body);
  void send(NodeId src, const Send& s, bool retry = false);
  void apply(NodeId n, TransitionOutput o, const std::string& msg);
  void add_local(NodeId n, LocalItem item);
  void schedule_local(NodeId n, std::uint64_t item_id, const LocalItem& item);
  void on_activated(NodeId n);
  void cut(NodeId n);
  void uncut(NodeId n);
  void resume(NodeId n);
  void handle(const Ev::Deliver& d);
  void handle(const Ev::Local& l);
  void handle(const Ev::World& w);
  void handle(const Ev::Start&);
  void handle(const Ev::Detect& d);
  void deliver_to(NodeId dst, const Envelope& env);
  void settle();
  void idle(NodeId n, const char* why);
  void flush_mail();
  bool handover_in_motion() const;
  bool frozen(NodeId n) const;
  void record(NodeId n, const std::string& label, const std::string& msg);
  ProtocolConfig pcfg() const;
  Credit resident(NodeId n) const;

  Scenario sc_;
  SimConfig cfg_;
  ChannelWorld world_;
  std::map<NodeId, NodeRuntime> nodes_;
  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
  std::map<std::uint64_t, Envelope> in_flight_;  // keyed by envelope id
  std::vector<Envelope> mail_;                     // parked traffic for an unreachable chief
  std::map<NodeId, std::map<std::uint64_t, LocalItem>> local_;
  std::map<NodeId, std::uint64_t> gen_;
  std::set<NodeId> undetected_;  // cut off with every neighbor cut off as well
  std::set<NodeId> blocked_;  // waiting for a retry after NoActivePeer
  std::map<std::pair<NodeId, int>, std::uint64_t> delay_counter_;
  std::set<SurrenderId> resolved_;
  std::vector<TraceEvent> trace_;
  std::optional<Announcement> fresh_;
  Rng ack_rng_;
  Credit total_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t next_env_ = 1;
  std::uint64_t next_item_ = 1;
  SimOutcome out_;
  Hook hook_;
};

const char* mutation_name(Mutation m);
std::optional<Mutation> parse_mutation(const std::string& s);

// Header (seed, horizon, mutant, scenario lines prefixed "#| ") then one event per line.
std::string format_trace(const Scenario& s, const SimConfig& cfg, const std::vector<TraceEvent>& trace);

struct ReplayDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Re-runs the scenario recorded in a trace and throws ReplayDivergence unless the
// new trace is identical. Scenario errors propagate as ParseError/ValidationError.
void replay_trace(const std::string& text);

}  // namespace tcran
