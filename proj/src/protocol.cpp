#include "tcran/protocol.hpp"

#include <algorithm>

namespace tcran {

namespace {

TransitionOutput start(NodeProtocolState&& s, const char* label) {
  TransitionOutput o;
  o.state = std::move(s);
  o.label = label;
  return o;
}

Message mk(const NodeProtocolState& s, MessageBody body) { return Message{s.tag, std::move(body)}; }

void check_stale(NodeProtocolState& s, const Message& m) {
  bool dead = s.terminated && m.tag <= *s.terminated;
  if (dead || is_stale(m.tag, s.tag)) {
    ++s.stale_discards;
    throw StaleMessage(std::string("stale ") + kind_name(m.kind()));
  }
}

Credit take(std::map<NodeId, Credit>& m, NodeId k) {
  auto it = m.find(k);
  if (it == m.end()) return Credit();
  Credit c = it->second;
  m.erase(it);
  return c;
}

void merge_into(std::map<NodeId, Credit>& dst, const std::map<NodeId, Credit>& src) {
  for (const auto& [k, c] : src) dst[k] += c;
}

std::optional<NodeId> choose(const std::vector<NodeId>& c, ChoicePolicy p) {
  if (c.empty()) return std::nullopt;
  return p == ChoicePolicy::LowestId ? *std::min_element(c.begin(), c.end())
                                     : *std::max_element(c.begin(), c.end());
}

// Returns in-credit of entries already closed by NaP; the caller takes it into hold.
Credit merge_ledger(ChiefLedger& dst, const ChiefLedger& src) {
  if (dst.total_credit.is_zero()) dst.total_credit = src.total_credit;
  dst.settled.insert(src.settled.begin(), src.settled.end());
  dst.adopted.insert(src.adopted.begin(), src.adopted.end());
  for (const auto& [a, ep] : src.cleared) dst.cleared[a] = std::max(dst.cleared[a], ep);
  for (const auto& [a, e] : src.affected) {
    auto it = dst.affected.find(a);
    if (it == dst.affected.end()) {
      dst.affected.emplace(a, e);
      continue;
    }
    PuEntry& d = it->second;
    if (e.epoch > d.epoch) {
      d.epoch = e.epoch;
      d.resident = e.resident;
      d.reporters = e.reporters;
    } else if (e.epoch == d.epoch) {
      d.reporters.insert(e.reporters.begin(), e.reporters.end());
    }
    merge_into(d.moved, e.moved);
  }
  Credit released;
  for (auto it = dst.affected.begin(); it != dst.affected.end();) {
    auto cl = dst.cleared.find(it->first);
    if (cl != dst.cleared.end() && it->second.epoch <= cl->second) {
      released += it->second.moved_total();
      it = dst.affected.erase(it);
    } else {
      ++it;
    }
  }
  return released;
}

void apply_pan(NodeProtocolState& s, NodeId from, const msg::PaN& p, SimTime now,
               const ProtocolConfig& cfg, TransitionOutput& o) {
  auto& led = *s.ledger;
  auto cl = led.cleared.find(p.affected);
  if (p.affected == s.id || (cl != led.cleared.end() && p.epoch <= cl->second)) {
    // Report about the chief itself or about an episode already closed by NaP.
    s.hold += p.in_credit;
    return;
  }
  auto [it, fresh] = led.affected.try_emplace(p.affected);
  PuEntry& e = it->second;
  if (fresh || p.epoch > e.epoch) {
    e.epoch = p.epoch;
    e.resident = p.resident;
    e.reporters = {from};
  } else if (p.epoch == e.epoch) {
    e.reporters.insert(from);
  }
  // In-credit is real credit; it is kept even when the report is old or repeated.
  if (!p.in_credit.is_zero()) e.moved[from] += p.in_credit;
  if (!s.weak_deadline) {
    s.weak_deadline = now + cfg.weak_wait;
    o.timers.push_back({TimerKind::WeakDeadline, {}, *s.weak_deadline});
  }
}

// A chief that inherits ledgered affected nodes needs its own weak deadline.
void arm_weak_deadline(NodeProtocolState& s, SimTime now, const ProtocolConfig& cfg,
                       TransitionOutput& o) {
  if (!s.is_chief() || !s.ledger || s.ledger->affected.empty() || s.weak_deadline) return;
  s.weak_deadline = now + cfg.weak_wait;
  o.timers.push_back({TimerKind::WeakDeadline, {}, *s.weak_deadline});
}

void settle_special(NodeProtocolState& s, const msg::SpecialForward& f, TransitionOutput& o) {
  auto& led = *s.ledger;
  bool in_escrow = std::any_of(s.escrow.begin(), s.escrow.end(),
                               [&](const Escrow& e) { return e.id == f.id; });
  if (led.settled.count(f.id) || in_escrow) {
    o.label = "special-dup";
    return;
  }
  s.hold += f.credit;
  led.settled.insert(f.id);
  // The receiver may have taken the ledger even though the credit never committed.
  if (f.ledger && !led.adopted.count(f.id)) s.hold += merge_ledger(led, *f.ledger);
}

}  // namespace

Credit local_credit(const NodeProtocolState& s) {
  Credit t = s.hold;
  for (const auto& [_, c] : s.in_map) t += c;
  if (s.ledger) t += s.ledger->moved_sum();
  return t;
}

bool needs_surrender(const NodeProtocolState& s) {
  if (s.state != Activity::Passive || s.is_chief()) return false;
  if (!s.hold.is_zero()) return true;
  return std::any_of(s.in_map.begin(), s.in_map.end(),
                     [](const auto& kv) { return !kv.second.is_zero(); });
}

TransitionOutput on_external_start(NodeProtocolState s, const Credit& total,
                                   const FanoutPlan& plan, std::uint64_t session) {
  if (s.state == Activity::Active) throw AlreadyActive("node already active");
  Credit shares;
  for (const auto& [_, c] : plan) {
    if (c.is_zero()) throw InsufficientCredit("zero share in fanout");
    shares += c;
  }
  if (shares >= total) throw InsufficientCredit("initiator must retain credit");
  s.state = Activity::Active;
  s.parent = Parent::self();
  s.tag = SessionTag{session, s.id};
  s.terminated.reset();
  s.hold = credit_sub(total, shares);
  s.in_map.clear();
  s.out_map.clear();
  s.ledger = ChiefLedger{};
  s.ledger->total_credit = total;
  s.settled = false;
  auto o = start(std::move(s), "A1");
  for (const auto& [t, c] : plan) {
    o.state.out_map[t] += c;
    o.sends.push_back({t, mk(o.state, msg::Com{c})});
  }
  if (!plan.empty()) o.label = "A2";
  return o;
}

TransitionOutput on_com(NodeProtocolState s, NodeId from, const Message& m) {
  check_stale(s, m);
  const auto& c = std::get<msg::Com>(m.body);
  if (s.state == Activity::Passive && s.parent.is_unset()) {
    s.state = Activity::Active;
    s.parent = Parent::of(from);
    s.hold += c.credit;
    s.tag = std::max(s.tag, m.tag);
    return start(std::move(s), "A3.1");
  }
  if (s.state == Activity::Passive && s.is_chief()) {
    // Settled chief is reactivated; it keeps the role.
    s.state = Activity::Active;
    s.settled = false;
    s.hold += c.credit;
    return start(std::move(s), "A3.1");
  }
  if (s.state == Activity::Active) {
    s.in_map[from] += c.credit;
    return start(std::move(s), "A3.2");
  }
  throw ProtocolError("COM at passive node with a parent");
}

TransitionOutput distribute(NodeProtocolState s, const FanoutPlan& plan) {
  if (plan.empty()) return start(std::move(s), "A2");
  if (s.state != Activity::Active) throw ProtocolError("distribute while passive");
  Credit shares;
  for (const auto& [_, c] : plan) {
    if (c.is_zero()) throw InsufficientCredit("zero share in fanout");
    shares += c;
  }
  if (shares >= s.hold)
    throw InsufficientCredit("shares " + shares.str() + " >= hold " + s.hold.str());
  s.hold = credit_sub(s.hold, shares);
  auto o = start(std::move(s), "A2");
  for (const auto& [t, c] : plan) {
    o.state.out_map[t] += c;
    o.sends.push_back({t, mk(o.state, msg::Com{c})});
  }
  return o;
}

TransitionOutput on_idle(NodeProtocolState s, const PeerView& view, SimTime now,
                         const ProtocolConfig& cfg) {
  const NodeId me = s.id;
  const bool chief = s.is_chief();
  if (chief && s.state == Activity::Passive) return start(std::move(s), "A4-noop");

  std::vector<NodeId> act_out;
  for (const auto& [k, _] : s.out_map)
    if (k != me && view.is_active(k)) act_out.push_back(k);
  std::vector<NodeId> creditors;
  for (auto it = s.in_map.begin(); it != s.in_map.end();) {
    if (it->first != me && view.is_active(it->first)) {
      creditors.push_back(it->first);
      ++it;
    } else {
      s.hold += it->second;  // creditor already left; nobody else will claim this
      it = s.in_map.erase(it);
    }
  }
  auto is_child = [&](NodeId k) { return view.parent_of(k) == me; };

  enum class Mode { Handover, ToParent, ToPeer, ToAny, Settle } mode;
  std::optional<NodeId> target;
  const char* label = "A4";
  if (chief) {
    std::vector<NodeId> kids;
    for (NodeId k : act_out)
      if (is_child(k)) kids.push_back(k);
    target = choose(kids.empty() ? act_out : kids, cfg.choice);
    // The mutant keeps the role and lets the broken guard below fire.
    if (cfg.mutation == Mutation::FlipStrongGuard) target.reset();
    mode = target ? Mode::Handover : Mode::Settle;
    label = target ? "A4.1" : "A4.1-settle";
  } else if (s.parent.kind == Parent::Kind::Node && view.is_active(s.parent.node)) {
    mode = Mode::ToParent;
    target = s.parent.node;
    label = "A4.2";
  } else {
    std::vector<NodeId> peers = act_out;
    peers.insert(peers.end(), creditors.begin(), creditors.end());
    std::sort(peers.begin(), peers.end());
    peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
    target = choose(peers, cfg.choice);
    if (target) {
      mode = Mode::ToPeer;
      label = "A4.3";
    } else {
      mode = Mode::ToAny;
      label = "A4.4";
      auto ce = view.chief();
      std::vector<NodeId> near;
      for (NodeId n : s.neighbors)
        if (n != me && (!ce || n != *ce) && view.is_active(n)) near.push_back(n);
      target = choose(near, cfg.choice);
      if (!target && ce && *ce != me) target = ce;
      if (!target) {
        // Nobody can take the credit right now (chief role in transit): stop
        // computing and keep it until a later surrender attempt.
        s.state = Activity::Passive;
        s.parent = Parent::unset();
        s.out_map.clear();
        return start(std::move(s), "A4.4-wait");
      }
    }
  }

  TransitionOutput o;
  o.label = label;
  auto new_pending = [&](NodeId to, const Credit& c) {
    PendingSurrender p;
    p.id = SurrenderId{me, s.next_seq++};
    p.target = to;
    p.credit = c;
    p.from_child = s.parent.is(to);
    p.deadline = now + cfg.t_e;
    return p;
  };
  auto emit = [&](const PendingSurrender& p) {
    msg::ImPC im{p.credit, p.b, p.child_map, p.id, p.from_child, p.handover, p.ledger};
    o.sends.push_back({p.target, mk(s, std::move(im))});
    o.timers.push_back({TimerKind::AckWait, p.id, p.deadline});
    s.pending.push_back(p);
  };

  // Returning in-credit to active creditors; the main target's share rides along.
  for (NodeId k : creditors) {
    Credit c = take(s.in_map, k);
    if (target && k == *target) {
      s.hold += c;
      continue;
    }
    emit(new_pending(k, c));
  }

  if (mode == Mode::Settle) {
    s.state = Activity::Passive;
    s.settled = true;
    s.out_map.clear();
    o.state = std::move(s);
    return o;
  }

  PendingSurrender main = new_pending(*target, s.hold);
  std::map<NodeId, Credit> kids_map;
  for (NodeId k : act_out)
    if (k != *target && is_child(k)) kids_map[k] = s.out_map[k];
  main.b = static_cast<std::uint32_t>(kids_map.size());
  main.child_map = std::move(kids_map);
  if (mode == Mode::Handover) {
    main.handover = true;
    main.ledger = std::move(s.ledger);
    s.ledger.reset();
  }
  if (!main.credit.is_zero() || main.handover) emit(main);
  if (mode != Mode::ToAny) {
    for (NodeId k : act_out)
      if (k != *target) o.sends.push_back({k, mk(s, msg::ImP{*target})});
  }

  s.state = Activity::Passive;
  s.parent = Parent::unset();
  s.hold = Credit();
  s.in_map.clear();
  s.out_map.clear();
  s.settled = false;
  if (mode == Mode::Handover) s.weak_deadline.reset();
  o.state = std::move(s);
  return o;
}

TransitionOutput on_impc(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                         const ProtocolConfig& cfg) {
  check_stale(s, m);
  const auto& im = std::get<msg::ImPC>(m.body);
  const char* label;
  auto absorb_in = [&] {
    if (cfg.mutation == Mutation::KeepInMapOnImPC) {
      auto it = s.in_map.find(from);
      if (it != s.in_map.end()) s.hold += it->second;
    } else {
      s.hold += take(s.in_map, from);
    }
  };
  if (im.from_child) {
    absorb_in();
    s.out_map.erase(from);
    if (im.b != 0) merge_into(s.out_map, im.child_map);
    label = im.b == 0 ? "A5.1" : "A5.2";
  } else if (im.handover) {
    absorb_in();
    merge_into(s.out_map, im.child_map);
    s.out_map.erase(from);
    s.parent = Parent::self();
    s.settled = s.state == Activity::Passive;
    s.ledger = im.ledger ? *im.ledger : ChiefLedger{};
    s.ledger->adopted.insert(im.id);
    label = "A5.3";
  } else if (s.parent.is(from)) {
    // Credit from a parent that is not handing over the chief role: become an orphan.
    absorb_in();
    merge_into(s.out_map, im.child_map);
    s.out_map.erase(from);
    s.parent = Parent::unset();
    label = "A5.3";
  } else if (from != s.id) {
    // Unrelated peer; its active children were told to re-parent here.
    s.out_map.erase(from);
    merge_into(s.out_map, im.child_map);
    label = "A5.4";
  } else {
    ++s.unknown_sender;
    throw UnknownSender("ImPC from self");
  }
  auto o = start(std::move(s), label);
  arm_weak_deadline(o.state, now, cfg, o);
  o.state.escrow.push_back(Escrow{im.id, from, im.credit, now + cfg.t_e});
  o.timers.push_back({TimerKind::AAckWait, im.id, now + cfg.t_e});
  o.sends.push_back({from, mk(o.state, msg::AcK{im.id})});
  return o;
}

TransitionOutput on_imp(NodeProtocolState s, NodeId from, const Message& m) {
  check_stale(s, m);
  NodeId p = std::get<msg::ImP>(m.body).p;
  if (s.parent.is(from)) {
    s.parent = p == s.id ? Parent::unset() : Parent::of(p);
    return start(std::move(s), "A6.1");
  }
  s.hold += take(s.in_map, from);
  return start(std::move(s), "A6.2");
}

TransitionOutput on_ack(NodeProtocolState s, NodeId from, const Message& m) {
  const auto& id = std::get<msg::AcK>(m.body).id;
  auto it = std::find_if(s.pending.begin(), s.pending.end(),
                         [&](const PendingSurrender& p) { return p.id == id; });
  if (it == s.pending.end()) throw NoPendingHandshake("AcK without pending surrender");
  s.pending.erase(it);
  auto o = start(std::move(s), "HS-ack");
  o.sends.push_back({from, mk(o.state, msg::AAcK{id})});
  return o;
}

TransitionOutput on_aack(NodeProtocolState s, NodeId, const Message& m) {
  const auto& id = std::get<msg::AAcK>(m.body).id;
  auto it = std::find_if(s.escrow.begin(), s.escrow.end(),
                         [&](const Escrow& e) { return e.id == id; });
  if (it == s.escrow.end()) throw NoPendingHandshake("AAcK without escrow");
  s.hold += it->credit;
  s.escrow.erase(it);
  return start(std::move(s), "HS-aack");
}

TransitionOutput on_handshake_timeout(NodeProtocolState s, const SurrenderId& id,
                                      const ProtocolConfig&) {
  auto it = std::find_if(s.pending.begin(), s.pending.end(),
                         [&](const PendingSurrender& p) { return p.id == id; });
  if (it == s.pending.end()) throw NoPendingHandshake("timeout without pending surrender");
  msg::SpecialForward f{it->credit, s.id, id, false, it->ledger};
  s.pending.erase(it);
  auto o = start(std::move(s), "HS-timeout");
  if (o.state.is_chief())
    settle_special(o.state, f, o);
  else
    o.sends.push_back({kChief, mk(o.state, std::move(f))});
  return o;
}

TransitionOutput on_aack_timeout(NodeProtocolState s, const SurrenderId& id, SimTime,
                                 const ProtocolConfig&) {
  auto it = std::find_if(s.escrow.begin(), s.escrow.end(),
                         [&](const Escrow& e) { return e.id == id; });
  if (it == s.escrow.end()) throw NoPendingHandshake("timeout without escrow");
  msg::SpecialForward f{it->credit, it->from, id, true, std::nullopt};
  s.escrow.erase(it);
  auto o = start(std::move(s), "HS-aack-timeout");
  if (o.state.is_chief())
    settle_special(o.state, f, o);
  else
    o.sends.push_back({kChief, mk(o.state, std::move(f))});
  return o;
}

TransitionOutput on_neighbor_affected(NodeProtocolState s, NodeId affected, std::uint64_t epoch,
                                      const Credit& resident, SimTime now,
                                      const ProtocolConfig& cfg) {
  msg::PaN p{affected, epoch, take(s.in_map, affected), take(s.out_map, affected), resident};
  auto o = start(std::move(s), "B1");
  if (o.state.is_chief())
    apply_pan(o.state, o.state.id, p, now, cfg, o);
  else
    o.sends.push_back({kChief, mk(o.state, std::move(p))});
  return o;
}

TransitionOutput on_pan(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                        const ProtocolConfig& cfg) {
  if (!s.is_chief() || !s.ledger) throw NotChiefExecutive("PaN at non-chief");
  auto o = start(std::move(s), "B2");
  apply_pan(o.state, from, std::get<msg::PaN>(m.body), now, cfg, o);
  return o;
}

TransitionOutput on_recovery(NodeProtocolState s, const PeerView& view, std::uint64_t epoch,
                             SimTime now, const ProtocolConfig& cfg) {
  // A chief that was cut off itself missed NaPs; give them a full wait again.
  if (s.is_chief()) s.weak_deadline.reset();
  auto o = start(std::move(s), "B3");
  arm_weak_deadline(o.state, now, cfg, o);
  const auto& st = o.state;
  auto ce = view.chief();
  if (!st.is_chief()) o.sends.push_back({kChief, mk(st, msg::NaP{st.id, epoch})});
  for (NodeId n : st.neighbors)
    if (n != st.id && (!ce || n != *ce) && view.is_active(n))
      o.sends.push_back({n, mk(st, msg::NaP{st.id, epoch})});
  return o;
}

TransitionOutput on_nap(NodeProtocolState s, NodeId from, const Message& m) {
  const auto& n = std::get<msg::NaP>(m.body);
  if (s.terminated && m.tag <= *s.terminated) {
    auto o = start(std::move(s), "B4-over");
    o.sends.push_back({from, Message{m.tag, msg::TM{TermMode::Strong}}});
    return o;
  }
  if (s.is_chief() && s.ledger) {
    Credit back;
    auto it = s.ledger->affected.find(n.recovered);
    if (it != s.ledger->affected.end() && it->second.epoch <= n.epoch) {
      back = it->second.moved_total();
      s.ledger->affected.erase(it);
    }
    auto& cl = s.ledger->cleared[n.recovered];
    cl = std::max(cl, n.epoch);
    if (s.ledger->affected.empty()) s.weak_deadline.reset();
    auto o = start(std::move(s), "B4.1");
    o.sends.push_back({n.recovered, mk(o.state, msg::Refund{back, n.recovered, false})});
    return o;
  }
  if (s.state == Activity::Active && s.neighbors.count(from)) {
    auto o = start(std::move(s), "B4.2");
    o.sends.push_back({kChief, mk(o.state, msg::SpecialReclaim{n.recovered})});
    return o;
  }
  return start(std::move(s), "B4-ignored");
}

TransitionOutput on_special(NodeProtocolState s, NodeId from, const Message& m, SimTime now,
                            const ProtocolConfig& cfg) {
  if (!s.is_chief() && m.kind() == MsgKind::SpecialForward) {
    const auto& f = std::get<msg::SpecialForward>(m.body);
    if (f.ledger && f.origin == s.id) {
      // Our handover was lost and nobody took the role: take it back.
      s.parent = Parent::self();
      s.ledger = *f.ledger;
      s.ledger->settled.insert(f.id);
      s.hold += f.credit;
      s.settled = s.state == Activity::Passive;
      auto o = start(std::move(s), "HS-reclaim");
      arm_weak_deadline(o.state, now, cfg, o);
      return o;
    }
  }
  if (!s.is_chief() || !s.ledger) throw NotChiefExecutive("special message at non-chief");
  if (m.kind() == MsgKind::SpecialForward) {
    auto o = start(std::move(s), "special-forward");
    settle_special(o.state, std::get<msg::SpecialForward>(m.body), o);
    return o;
  }
  NodeId a = std::get<msg::SpecialReclaim>(m.body).affected;
  Credit back;
  auto it = s.ledger->affected.find(a);
  if (it != s.ledger->affected.end()) back = take(it->second.moved, from);
  auto o = start(std::move(s), "special-reclaim");
  o.sends.push_back({from, mk(o.state, msg::Refund{back, a, true})});
  return o;
}

TransitionOutput on_refund(NodeProtocolState s, NodeId, const Message& m) {
  const auto& r = std::get<msg::Refund>(m.body);
  if (!r.credit.is_zero()) {
    if (r.to_in_map && s.state == Activity::Active)
      s.in_map[r.about] += r.credit;
    else
      s.hold += r.credit;
  }
  return start(std::move(s), "B4-refund");
}

TransitionOutput try_announce(NodeProtocolState s, SimTime now, const ProtocolConfig& cfg,
                              const PeerView* view) {
  if (!s.is_chief() || !s.ledger || s.state != Activity::Passive || s.strong_announced)
    return start(std::move(s), "");
  if (view) {
    for (auto it = s.out_map.begin(); it != s.out_map.end();)
      it = view->is_active(it->first) ? std::next(it) : s.out_map.erase(it);
  }
  const auto& led = *s.ledger;
  const Credit& C = led.total_credit;
  bool maps_empty = s.out_map.empty() && s.in_map.empty() && s.escrow.empty();
  // Moved credit booked for a cut-off node sits at the chief as well. Once the chief
  // physically holds all of C nothing else can be active, whatever the ledger says.
  const Credit held = s.hold + led.moved_sum();
  bool full = held == C;
  if ((maps_empty && full) || cfg.mutation == Mutation::FlipStrongGuard) {
    s.strong_announced = true;
    s.terminated = s.tag;
    auto o = start(std::move(s), "C2");
    o.announcement = TermMode::Strong;
    return o;
  }
  if (!s.weak_announced && maps_empty && !led.affected.empty() && s.weak_deadline &&
      now >= *s.weak_deadline && s.hold + led.c_pu_sum() == C) {
    s.weak_announced = true;
    auto o = start(std::move(s), "C1");
    o.announcement = TermMode::Weak;
    return o;
  }
  return start(std::move(s), "");
}

TransitionOutput on_tm(NodeProtocolState s, const Message& m) {
  const auto& t = std::get<msg::TM>(m.body);
  if (t.mode == TermMode::Strong) {
    if (!s.terminated || *s.terminated < m.tag) s.terminated = m.tag;
  } else {
    s.weak_seen = true;
  }
  return start(std::move(s), "TM");
}

}  // namespace tcran
