#include "tcran/checker.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace tcran {

namespace {

struct IdCopy {
  Credit credit;
  Credit moved;
  bool received = false;  // the receiver already owns the ledger part
};

Credit ledger_moved(const std::optional<ChiefLedger>& l) { return l ? l->moved_sum() : Credit(); }

// Escrow and pending copies of a surrender the chief already settled are dead.
bool holds_credit(const NodeRuntime& nr, const std::set<SurrenderId>* resolved) {
  auto live = [&](const SurrenderId& id) { return !resolved || !resolved->count(id); };
  return !local_credit(nr.proto).is_zero() || !nr.stranded.is_zero() ||
         std::any_of(nr.proto.escrow.begin(), nr.proto.escrow.end(), [&](const Escrow& e) { return live(e.id); }) ||
         std::any_of(nr.proto.pending.begin(), nr.proto.pending.end(),
                     [&](const PendingSurrender& p) { return live(p.id); });
}

}  // namespace

Credit global_credit_sum(const Snapshot& s) {
  Credit sum;
  std::map<SurrenderId, IdCopy> ids;
  auto note = [&](const SurrenderId& id, const Credit& c, const Credit& moved, bool received) {
    auto [it, fresh] = ids.try_emplace(id, IdCopy{c, moved, received});
    if (!fresh) it->second.received = it->second.received || received;
  };
  if (s.nodes)
    for (const auto& [_, nr] : *s.nodes) {
      sum += local_credit(nr.proto);
      sum += nr.stranded;
      for (const auto& p : nr.proto.pending) note(p.id, p.credit, ledger_moved(p.ledger), false);
      for (const auto& e : nr.proto.escrow) note(e.id, e.credit, Credit(), true);
    }
  for (const Envelope* env : s.in_flight) {
    const auto& m = env->msg;
    switch (m.kind()) {
      case MsgKind::ImPC: {
        const auto& b = std::get<msg::ImPC>(m.body);
        note(b.id, b.credit, ledger_moved(b.ledger), false);
        break;
      }
      case MsgKind::SpecialForward: {
        const auto& b = std::get<msg::SpecialForward>(m.body);
        note(b.id, b.credit, ledger_moved(b.ledger), b.from_receiver);
        break;
      }
      default:
        sum += carried_credit(m);
    }
  }
  for (const auto& [id, c] : ids) {
    if (s.resolved && s.resolved->count(id)) continue;
    sum += c.credit;
    if (!c.received) sum += c.moved;
  }
  return sum;
}

GroundTruth ground_truth(const Snapshot& s) {
  GroundTruth g;
  bool com = std::any_of(s.in_flight.begin(), s.in_flight.end(),
                         [](const Envelope* e) { return e->msg.kind() == MsgKind::COM; });
  bool all = !com, live = !com;
  if (s.nodes)
    for (const auto& [n, nr] : *s.nodes) {
      bool cut = nr.cut_off(*s.world);
      if (cut) g.cut_off.push_back(n);
      if (nr.proto.state == Activity::Active) {
        all = false;
        if (!cut) live = false;
      }
    }
  g.terminated = all;
  g.live_quiescent = live;
  return g;
}

void assert_safety(const Announcement& a, const Snapshot& s) {
  const std::string at = " at t=" + format_time(a.time) + " by node " + std::to_string(a.announcer);
  const auto& nodes = *s.nodes;
  std::size_t chiefs = 0;
  for (const auto& [_, nr] : nodes) chiefs += nr.proto.is_chief() ? 1 : 0;
  const auto& ann = nodes.at(a.announcer).proto;
  if (!ann.is_chief() || chiefs != 1)
    throw SafetyViolation("announcement" + at + " without a unique chief executive");
  auto g = ground_truth(s);
  if (a.mode == TermMode::Strong) {
    if (!g.terminated) throw SafetyViolation("strong termination announced early" + at);
    return;
  }
  if (!g.live_quiescent) throw SafetyViolation("weak termination announced while live work remains" + at);
  const auto& led = *ann.ledger;
  if (ann.hold + led.c_pu_sum() != led.total_credit)
    throw SafetyViolation("weak termination" + at + " with the credit balance off: hold " + ann.hold.str() +
                          " + ledger " + led.c_pu_sum().str() + " != " + led.total_credit.str());
}

std::uint64_t tree_height(const Snapshot& s) {
  if (!s.nodes || s.total.is_zero()) return 0;
  const auto& nodes = *s.nodes;
  const ChannelWorld& w = *s.world;
  // While the chief role is in transit the handover target already counts as the
  // root; its stale pointer to the old chief may otherwise close a short cycle.
  std::set<NodeId> roots;
  for (const auto& [n, nr] : nodes)
    if (nr.proto.is_chief()) roots.insert(n);
  if (roots.empty())
    for (const auto& [_, nr] : nodes)
      for (const auto& p : nr.proto.pending)
        if (p.handover) roots.insert(p.target);
  // A pointer counts while the parent still lists the node in its out map. One
  // the parent already dropped (the node was passed up in a child map and never
  // got an ImP because its activation was still in transit) ends the chain.
  // Pointers revised by an ImP in transit are followed to the new parent.
  std::map<NodeId, NodeId> revised;
  for (const Envelope* env : s.in_flight) {
    if (env->msg.kind() != MsgKind::ImP || !nodes.count(env->dst)) continue;
    const auto& p = nodes.at(env->dst).proto.parent;
    if (p.kind == Parent::Kind::Node && p.node == env->src)
      revised[env->dst] = std::get<msg::ImP>(env->msg.body).p;
  }
  auto parent_of = [&](NodeId n) -> std::optional<NodeId> {
    const auto& p = nodes.at(n).proto.parent;
    if (p.kind != Parent::Kind::Node) return std::nullopt;
    if (auto it = revised.find(n); it != revised.end()) return it->second;
    if (!nodes.count(p.node) || !nodes.at(p.node).proto.out_map.count(n)) return std::nullopt;
    return p.node;
  };
  // Rejoining nodes stay with the partition until the chief answers their NaP.
  auto detached = [&](NodeId n) { return nodes.at(n).cut_off(w) || nodes.at(n).rejoining; };
  auto member = [&](NodeId n) {
    const auto& nr = nodes.at(n);
    if (detached(n) || roots.count(n)) return false;
    return nr.proto.state == Activity::Active || holds_credit(nr, s.resolved);
  };
  std::uint64_t h = 1;
  bool cut_credit = false;
  for (const auto& [n, nr] : nodes) {
    if (detached(n) && !nr.proto.is_chief() && holds_credit(nr, s.resolved)) cut_credit = true;
    if (!member(n)) continue;
    std::uint64_t len = 1;
    std::set<NodeId> seen{n};
    NodeId cur = n;
    while (true) {
      auto p = parent_of(cur);
      if (!p || !nodes.count(*p)) break;
      if (!seen.insert(*p).second) throw CycleDetected("parent cycle through node " + std::to_string(*p));
      if (!member(*p)) break;
      ++len;
      cur = *p;
    }
    h = std::max(h, len + 1);  // the chief sits above every chain
  }
  // Credit the chief books against a partition that is still cut off is the same
  // remainder seen from the chief's side.
  for (NodeId r : roots) {
    const auto& led = nodes.at(r).proto.ledger;
    if (!led) continue;
    for (const auto& [a, e] : led->affected)
      if (nodes.count(a) && detached(a) && !e.resident.is_zero())
        cut_credit = true;
  }
  if (cut_credit) h = std::max<std::uint64_t>(h, 2);
  return h;
}

std::vector<BoundLine> message_bounds_report(const ComplexityCounters& c) {
  const std::uint64_t nb = c.n_neighbor;
  const std::uint64_t nb1 = nb > 0 ? nb - 1 : 0;
  std::vector<BoundLine> out = {
      {MsgKind::COM, c.count(MsgKind::COM), c.n_participants * c.delta},
      {MsgKind::ImPC, c.count(MsgKind::ImPC), nb * c.n_leave},
      {MsgKind::ImP, c.count(MsgKind::ImP), nb1 * c.n_leave},
      {MsgKind::PaN, c.count(MsgKind::PaN), nb * c.n_affected},
      {MsgKind::NaP, c.count(MsgKind::NaP), (nb + 1) * c.n_affected},
      {MsgKind::AcK, c.count(MsgKind::AcK), nb * c.n_leave},
      {MsgKind::AAcK, c.count(MsgKind::AAcK), nb * c.n_leave},
  };
  for (auto& l : out) l.pass = l.count <= l.bound;
  return out;
}

void assert_liveness(const CheckedRun& run, const Scenario& s, const Simulator& sim) {
  const auto& o = run.outcome;
  auto has = [&](TermMode m) {
    return std::any_of(o.announcements.begin(), o.announcements.end(),
                       [&](const Announcement& a) { return a.mode == m; });
  };
  const bool strong = has(TermMode::Strong), weak = has(TermMode::Weak);
  if (run.strong_cycle || run.weak_cycle)
    throw LivenessViolation("parent cycle at the termination announcement");
  if (strong && run.height_at_strong && *run.height_at_strong != 1)
    throw LivenessViolation("tree height " + std::to_string(*run.height_at_strong) +
                            " at strong announcement");
  if (weak && run.height_at_weak && *run.height_at_weak != 2)
    throw LivenessViolation("tree height " + std::to_string(*run.height_at_weak) +
                            " at weak announcement");
  if (!s.start) return;
  if (s.failure_free()) {
    if (!strong)
      throw LivenessViolation(o.horizon_exceeded ? "horizon exceeded without strong announcement"
                                                 : "quiescent without strong announcement");
    return;
  }
  if (strong) return;
  const auto& nodes = sim.nodes();
  auto chief = sim.chief();
  if (!chief || nodes.at(*chief).cut_off(sim.world())) return;  // documented impossibility
  const auto& led = nodes.at(*chief).proto.ledger;
  bool stuck_credit = false, reported = true;
  for (const auto& [n, nr] : nodes) {
    if (!nr.cut_off(sim.world()) || !holds_credit(nr, sim.snapshot().resolved)) continue;
    stuck_credit = true;
    Credit truth = nr.proto.hold + nr.stranded;
    for (const auto& [_, c] : nr.proto.in_map) truth += c;
    const PuEntry* e = nullptr;
    if (led && led->affected.count(n)) e = &led->affected.at(n);
    // The chief can only balance its credit when its entry matches what the node holds.
    if (!e || e->resident != truth || !nr.proto.escrow.empty() || !nr.proto.pending.empty())
      reported = false;
  }
  if (!stuck_credit)
    throw LivenessViolation("no strong announcement although no cut-off node holds credit");
  if (!weak && reported) throw LivenessViolation("partition fully reported but no weak announcement");
}

CheckedRun run_checked(const Scenario& s, const SimConfig& cfg, const Observer& observe) {
  CheckedRun r;
  Simulator sim(s, cfg);
  std::uint64_t max_height = 0;
  sim.set_hook([&](const Simulator& sm, const std::optional<Announcement>& a) {
    auto snap = sm.snapshot();
    if (!snap.total.is_zero()) {
      ++r.conservation_checks;
      Credit sum = global_credit_sum(snap);
      if (sum != snap.total && r.safety.size() < 8)
        r.safety.push_back("conservation: credit sum " + sum.str() + " != " + snap.total.str() +
                           " at t=" + format_time(sm.now()));
    }
    std::size_t chiefs = 0;
    for (const auto& [n, nr] : sm.nodes()) {
      chiefs += nr.proto.is_chief() ? 1 : 0;
      if (r.safety.size() >= 8) continue;
      const auto& p = nr.proto;
      if (p.state == Activity::Active && p.hold.is_zero())
        r.safety.push_back("active node " + std::to_string(n) + " with zero hold at t=" +
                           format_time(sm.now()));
      // A passive non-chief that can act must have surrendered everything.
      bool can_act = !nr.rejoining && !nr.cut_off(sm.world()) && !sm.blocked(n);
      if (can_act && p.state == Activity::Passive && !p.is_chief() && !local_credit(p).is_zero())
        r.safety.push_back("passive node " + std::to_string(n) + " keeps credit at t=" +
                           format_time(sm.now()));
    }
    if (chiefs > 1 && r.safety.size() < 8)
      r.safety.push_back("two chief executives at t=" + format_time(sm.now()));
    try {
      std::uint64_t h = tree_height(snap);
      max_height = std::max(max_height, h);
      if (a) (a->mode == TermMode::Strong ? r.height_at_strong : r.height_at_weak) = h;
    } catch (const CycleDetected& e) {
      ++r.cycle_events;
      if (r.cycles.size() < 8) r.cycles.push_back(std::string(e.what()) + " at t=" + format_time(sm.now()));
      if (a) (a->mode == TermMode::Strong ? r.strong_cycle : r.weak_cycle) = true;
    }
    if (a) {
      try {
        assert_safety(*a, snap);
      } catch (const SafetyViolation& e) {
        r.safety.push_back(e.what());
      }
    }
    if (observe) observe(sm);
  });
  r.outcome = sim.run();
  r.outcome.counters.height = max_height;
  r.trace = sim.trace();
  try {
    assert_liveness(r, s, sim);
  } catch (const LivenessViolation& e) {
    r.liveness.push_back(e.what());
  }
  r.bound_lines = message_bounds_report(r.outcome.counters);
  for (const auto& l : r.bound_lines)
    if (!l.pass)
      r.bounds.push_back(std::string(kind_name(l.kind)) + " count " + std::to_string(l.count) +
                         " exceeds " + std::to_string(l.bound));
  return r;
}

}  // namespace tcran
