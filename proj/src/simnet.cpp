#include "tcran/simnet.hpp"

#include <algorithm>
#include <sstream>

namespace tcran {

ChannelWorld::ChannelWorld(std::set<ChannelId> gcs, std::map<NodeId, std::set<ChannelId>> lcs)
    : gcs_(std::move(gcs)), lcs_(std::move(lcs)) {}

std::set<ChannelId> ChannelWorld::available(NodeId n) const {
  std::set<ChannelId> out;
  auto it = lcs_.find(n);
  if (it == lcs_.end()) return out;
  for (ChannelId c : it->second)
    if (!occupied_.count(c)) out.insert(c);
  return out;
}

std::optional<ChannelId> ChannelWorld::tuned(NodeId n) const {
  auto a = available(n);
  if (a.empty()) return std::nullopt;
  return *a.begin();
}

std::vector<NodeId> ChannelWorld::appear(ChannelId c) {
  if (!gcs_.count(c)) throw UnknownChannel("PU on unknown channel " + std::to_string(c));
  std::vector<NodeId> flipped;
  if (occupied_.count(c)) return flipped;
  for (const auto& [n, _] : lcs_)
    if (!affected(n)) flipped.push_back(n);
  occupied_.insert(c);
  std::erase_if(flipped, [&](NodeId n) { return !affected(n); });
  return flipped;
}

std::vector<NodeId> ChannelWorld::disappear(ChannelId c) {
  if (!gcs_.count(c)) throw UnknownChannel("PU on unknown channel " + std::to_string(c));
  std::vector<NodeId> flipped;
  if (!occupied_.count(c)) return flipped;
  for (const auto& [n, _] : lcs_)
    if (affected(n)) flipped.push_back(n);
  occupied_.erase(c);
  std::erase_if(flipped, [&](NodeId n) { return affected(n); });
  return flipped;
}

SimTime sample_delay(const Params& p, NodeId src, NodeId dst, int cls, std::uint64_t counter) {
  if (p.d_max <= p.d_min) return p.d_min;
  std::uint64_t h = mix64(p.seed);
  h = mix64(h ^ (static_cast<std::uint64_t>(src) << 32 | dst));
  h = mix64(h ^ (static_cast<std::uint64_t>(cls) << 56) ^ counter);
  return p.d_min + static_cast<SimTime>(h % static_cast<std::uint64_t>(p.d_max - p.d_min + 1));
}

std::string TraceEvent::str() const {
  std::ostringstream o;
  o << "t=" << format_time(time) << " node=" << node << " label=" << label << " msg=" << msg
    << " hold=" << hold.str() << " local=" << local.str();
  return o.str();
}

const char* mutation_name(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::FlipStrongGuard: return "flip-strong-guard";
    case Mutation::KeepInMapOnImPC: return "keep-in-map";
  }
  return "none";
}

std::optional<Mutation> parse_mutation(const std::string& s) {
  for (Mutation m : {Mutation::None, Mutation::FlipStrongGuard, Mutation::KeepInMapOnImPC})
    if (s == mutation_name(m)) return m;
  return std::nullopt;
}

std::string format_trace(const Scenario& s, const SimConfig& cfg, const std::vector<TraceEvent>& trace) {
  std::ostringstream o;
  o << "# tcran-trace 1\n# seed " << s.params.seed << "\n# horizon " << format_time(cfg.horizon) << "\n";
  if (cfg.mutation != Mutation::None) o << "# mutant " << mutation_name(cfg.mutation) << "\n";
  std::istringstream sc(render_scenario(s));
  for (std::string line; std::getline(sc, line);) o << "#| " << line << "\n";
  for (const auto& t : trace) o << t.str() << "\n";
  return o.str();
}

void replay_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line, scenario;
  SimConfig cfg;
  std::optional<std::uint64_t> seed;
  bool header = false;
  while (std::getline(in, line)) {
    if (line == "# tcran-trace 1") {
      header = true;
    } else if (line.rfind("#| ", 0) == 0) {
      scenario += line.substr(3) + "\n";
    } else if (line.rfind("# seed ", 0) == 0) {
      seed = std::stoull(line.substr(7));
    } else if (line.rfind("# horizon ", 0) == 0) {
      cfg.horizon = parse_time(line.substr(10));
    } else if (line.rfind("# mutant ", 0) == 0) {
      auto m = parse_mutation(line.substr(9));
      if (!m) throw ReplayDivergence("unknown mutant in trace header: " + line.substr(9));
      cfg.mutation = *m;
    }
  }
  if (!header) throw ReplayDivergence("not a tcran trace (missing header)");
  Scenario s = load_scenario(scenario);
  if (seed) s.params.seed = *seed;
  Simulator sim(s, cfg);
  sim.run();
  std::string again = format_trace(s, cfg, sim.trace());
  if (again == text) return;
  std::istringstream a(text), b(again);
  std::string la, lb;
  for (std::size_t n = 1;; ++n) {
    bool ga = static_cast<bool>(std::getline(a, la)), gb = static_cast<bool>(std::getline(b, lb));
    if (!ga && !gb) break;
    if (!ga || !gb || la != lb)
      throw ReplayDivergence("line " + std::to_string(n) + ": recorded '" + (ga ? la : "<end>") +
                             "' but replay gives '" + (gb ? lb : "<end>") + "'");
  }
  throw ReplayDivergence("trace differs from replay");
}

class Simulator::View : public PeerView {
 public:
  explicit View(const Simulator& s) : s_(s) {}
  bool is_active(NodeId k) const override {
    auto it = s_.nodes_.find(k);
    if (it == s_.nodes_.end() || it->second.cut_off(s_.world_)) return false;
    const auto& p = it->second.proto;
    // A settled chief still takes credit, so routing treats it as active.
    return p.state == Activity::Active || p.is_chief();
  }
  std::optional<NodeId> parent_of(NodeId k) const override {
    auto it = s_.nodes_.find(k);
    if (it == s_.nodes_.end() || it->second.proto.parent.kind != Parent::Kind::Node)
      return std::nullopt;
    return it->second.proto.parent.node;
  }
  std::optional<NodeId> chief() const override { return s_.chief(); }

 private:
  const Simulator& s_;
};

Simulator::Simulator(Scenario s, SimConfig cfg)
    : sc_(std::move(s)),
      cfg_(cfg),
      world_(sc_.gcs, sc_.lcs),
      ack_rng_(mix64(sc_.params.seed ^ 0xac4d7090ULL)) {
  validate_scenario(sc_);
  std::set<NodeId> joiners;
  for (const auto& e : sc_.events)
    if (e.kind == ScenarioEvent::Kind::Join) joiners.insert(e.target);
  for (NodeId n : sc_.nodes) {
    auto& nr = nodes_[n];
    nr.proto.id = n;
    nr.proto.neighbors = sc_.neighbors(n);
    nr.absent = joiners.count(n) > 0;
    if (nr.absent) nr.cut_since = 0;
    out_.counters.delta = std::max<std::uint64_t>(out_.counters.delta, nr.proto.neighbors.size());
  }
  if (sc_.start) push(sc_.start->time, 1, Ev::Start{});
  for (const auto& e : sc_.events) push(e.time, 1, Ev::World{e});
}

void Simulator::push(SimTime t, int cls, decltype(Ev::body) body) {
  queue_.push(Ev{t, cls, seq_++, std::move(body)});
}

ProtocolConfig Simulator::pcfg() const {
  return ProtocolConfig{sc_.params.t_e, sc_.params.weak_wait, sc_.params.choice, cfg_.mutation};
}

std::optional<NodeId> Simulator::chief() const {
  for (const auto& [n, nr] : nodes_)
    if (nr.proto.is_chief()) return n;
  return std::nullopt;
}

bool Simulator::frozen(NodeId n) const {
  const auto& nr = nodes_.at(n);
  return nr.rejoining || nr.cut_off(world_);
}

Credit Simulator::resident(NodeId n) const {
  const auto& nr = nodes_.at(n);
  Credit r = nr.proto.hold + nr.stranded;
  for (const auto& [_, c] : nr.proto.in_map) r += c;
  return r;
}

void Simulator::record(NodeId n, const std::string& label, const std::string& msg) {
  if (!cfg_.record_trace) return;
  const auto& p = nodes_.at(n).proto;
  trace_.push_back({now_, n, label, msg.empty() ? "-" : msg, p.hold, local_credit(p)});
}

void Simulator::send(NodeId src, const Send& s, bool retry) {
  Envelope env{next_env_++, src, s.dest, s.msg, now_};
  MsgKind k = s.msg.kind();
  auto idx = static_cast<std::size_t>(k);
  bool special = k == MsgKind::SpecialForward || k == MsgKind::SpecialReclaim || k == MsgKind::Refund;
  if (retry || special) ++out_.counters.retries[idx];
  if (!retry) ++out_.counters.sent[idx];
  SimTime delay;
  if (is_control(k)) {
    delay = sc_.params.d_ack;
  } else {
    int cls = k == MsgKind::COM ? 0 : 1;
    delay = sample_delay(sc_.params, src, s.dest, cls, delay_counter_[{src, cls}]++);
  }
  in_flight_[env.id] = env;
  push(now_ + delay, is_control(k) ? 0 : 2, Ev::Deliver{std::move(env)});
}

void Simulator::apply(NodeId n, TransitionOutput o, const std::string& msg) {
  auto& nr = nodes_.at(n);
  nr.proto = std::move(o.state);
  if (nr.proto.state == Activity::Active || !local_credit(nr.proto).is_zero()) nr.participated = true;
  if (nr.proto.ledger) resolved_.insert(nr.proto.ledger->settled.begin(), nr.proto.ledger->settled.end());
  if (!o.label.empty()) record(n, o.label, msg);
  for (const auto& t : o.timers) add_local(n, LocalItem{LocalItem::Kind::Timer, t.deadline, 0, t});
  for (const auto& s : o.sends) send(n, s);
  if (o.announcement) {
    Announcement a{*o.announcement, now_, n};
    out_.announcements.push_back(a);
    fresh_ = a;
    for (NodeId m : sc_.nodes)
      if (m != n) send(n, Send{m, Message{nodes_.at(n).proto.tag, msg::TM{a.mode}}});
  }
}

void Simulator::add_local(NodeId n, LocalItem item) {
  std::uint64_t id = next_item_++;
  local_[n][id] = item;
  if (!frozen(n)) schedule_local(n, id, item);
}

void Simulator::schedule_local(NodeId n, std::uint64_t id, const LocalItem& item) {
  push(std::max(item.due, now_), 4, Ev::Local{n, id, gen_[n]});
}

void Simulator::on_activated(NodeId n) {
  auto& nr = nodes_.at(n);
  nr.participated = true;
  auto w = sc_.workload.find(n);
  SimTime dur = w == sc_.workload.end() ? kTicksPerUnit : w->second;
  add_local(n, LocalItem{LocalItem::Kind::Work, now_ + dur, 0, {}});
  if (nr.planned) return;
  nr.planned = true;
  auto p = sc_.plans.find(n);
  if (p == sc_.plans.end()) return;
  bool initiator = sc_.start && sc_.start->node == n;
  for (std::size_t i = 0; i < p->second.size(); ++i) {
    if (initiator && p->second[i].offset == 0) continue;  // applied by the start itself
    add_local(n, LocalItem{LocalItem::Kind::Plan, now_ + p->second[i].offset, i, {}});
  }
}

void Simulator::cut(NodeId n) {
  auto& nr = nodes_.at(n);
  ++nr.epoch;
  ++out_.counters.n_affected;
  if (!nr.rejoining) nr.cut_since = now_;
  nr.rejoining = false;
  ++gen_[n];
  record(n, "B1", "cut-off");
  push(now_ + sc_.params.d_detect, 3, Ev::Detect{n, nr.epoch});
}

void Simulator::uncut(NodeId n) {
  auto& nr = nodes_.at(n);
  if (!nr.stranded.is_zero()) {
    nr.proto.hold += nr.stranded;
    nr.proto.tag = std::max(nr.proto.tag, nr.stranded_tag);
    nr.participated = true;
    nr.stranded = Credit();
  }
  if (nr.epoch > 0) {
    auto o = on_recovery(nr.proto, View(*this), nr.epoch, now_, pcfg());
    nr.rejoining = !nr.proto.is_chief();
    apply(n, std::move(o), "recovered");
  }
  if (!nr.rejoining) resume(n);
}

void Simulator::resume(NodeId n) {
  // Frozen work restarts; deadlines move by the time spent cut off.
  SimTime shift = sc_.params.freeze_affected ? now_ - nodes_.at(n).cut_since : 0;
  ++gen_[n];
  for (auto& [id, item] : local_[n]) {
    item.due += shift;
    schedule_local(n, id, item);
  }
  for (NodeId m : nodes_.at(n).proto.neighbors)
    if (undetected_.erase(m) && nodes_.at(m).cut_off(world_))
      push(now_ + sc_.params.d_detect, 3, Ev::Detect{m, nodes_.at(m).epoch});
}

void Simulator::handle(const Ev::Start&) {
  const auto& st = *sc_.start;
  FanoutPlan plan;
  auto p = sc_.plans.find(st.node);
  if (p != sc_.plans.end())
    for (const auto& e : p->second) {
      if (e.offset != 0) continue;
      for (const auto& [t, c] : e.shares)
        plan.emplace_back(t, e.fraction ? Credit(mpq_class(c.raw() * st.credit.raw())) : c);
    }
  auto& nr = nodes_.at(st.node);
  total_ = st.credit;
  apply(st.node, on_external_start(nr.proto, st.credit, plan, st.session), "start");
  on_activated(st.node);
}

void Simulator::handle(const Ev::World& w) {
  const auto& e = w.e;
  std::set<NodeId> before;
  for (const auto& [n, nr] : nodes_)
    if (nr.cut_off(world_)) before.insert(n);
  switch (e.kind) {
    case ScenarioEvent::Kind::PuAppear: world_.appear(e.target); break;
    case ScenarioEvent::Kind::PuDisappear: world_.disappear(e.target); break;
    case ScenarioEvent::Kind::Fail: nodes_.at(e.target).failed = true; break;
    case ScenarioEvent::Kind::Recover: nodes_.at(e.target).failed = false; break;
    case ScenarioEvent::Kind::Crash: nodes_.at(e.target).crashed = true; break;
    case ScenarioEvent::Kind::Join: nodes_.at(e.target).absent = false; break;
  }
  for (auto& [n, nr] : nodes_) {
    bool now_cut = nr.cut_off(world_);
    if (now_cut && !before.count(n)) cut(n);
    if (!now_cut && before.count(n)) uncut(n);
  }
}

void Simulator::handle(const Ev::Detect& d) {
  const auto& nr = nodes_.at(d.node);
  if (nr.epoch != d.epoch || !nr.cut_off(world_)) return;
  Credit r = resident(d.node);
  bool anyone = std::any_of(nr.proto.neighbors.begin(), nr.proto.neighbors.end(),
                            [&](NodeId k) { return !frozen(k); });
  if (!anyone) {
    // Every neighbor is cut off too; the first one back detects it (see resume).
    undetected_.insert(d.node);
    return;
  }
  for (NodeId k : nr.proto.neighbors) {
    if (frozen(k)) continue;
    const auto& kp = nodes_.at(k).proto;
    if (kp.state != Activity::Active && !kp.is_chief()) continue;
    apply(k, on_neighbor_affected(kp, d.node, d.epoch, r, now_, pcfg()),
          "detect " + std::to_string(d.node));
  }
}

void Simulator::handle(const Ev::Deliver& d) {
  in_flight_.erase(d.env.id);
  NodeId dst = d.env.dst;
  if (dst == kChief) {
    auto c = chief();
    if (!c || nodes_.at(*c).cut_off(world_)) {
      mail_.push_back(d.env);
      return;
    }
    dst = *c;
  }
  MsgKind k = d.env.msg.kind();
  if (is_control(k) && !sc_.params.ack_drop.is_zero()) {
    double p = sc_.params.ack_drop.raw().get_d();
    if (ack_rng_.chance(p)) {
      ++out_.counters.ack_drops;
      out_.drops.push_back({now_, dst, k, "injected"});
      return;
    }
  }
  deliver_to(dst, d.env);
}

void Simulator::deliver_to(NodeId dst, const Envelope& env) {
  auto& nr = nodes_.at(dst);
  const Message& m = env.msg;
  MsgKind k = m.kind();
  if (nr.cut_off(world_)) {
    const char* why = nr.crashed ? "crashed" : nr.failed ? "failed" : nr.absent ? "absent" : "affected";
    ++out_.counters.dropped;
    out_.drops.push_back({now_, dst, k, why});
    // A dropped surrender stays with its sender until the handshake times out.
    if (k != MsgKind::ImPC && !carried_credit(m).is_zero()) {
      nr.stranded += carried_credit(m);
      nr.stranded_tag = std::max(nr.stranded_tag, m.tag);
    }
    record(dst, "drop", summarize(m));
    return;
  }
  const NodeId from = env.src;
  const std::string summary = summarize(m);
  try {
    switch (k) {
      case MsgKind::COM: {
        auto o = on_com(nr.proto, from, m);
        bool activated = o.label == "A3.1";
        apply(dst, std::move(o), summary);
        if (activated) on_activated(dst);
        break;
      }
      case MsgKind::ImPC: apply(dst, on_impc(nr.proto, from, m, now_, pcfg()), summary); break;
      case MsgKind::ImP: apply(dst, on_imp(nr.proto, from, m), summary); break;
      case MsgKind::AcK: apply(dst, on_ack(nr.proto, from, m), summary); break;
      case MsgKind::AAcK:
        apply(dst, on_aack(nr.proto, from, m), summary);
        resolved_.insert(std::get<msg::AAcK>(m.body).id);
        break;
      case MsgKind::TM:
        apply(dst, on_tm(nr.proto, m), summary);
        if (std::get<msg::TM>(m.body).mode == TermMode::Strong && nr.rejoining) {
          nr.rejoining = false;
          resume(dst);
        }
        break;
      case MsgKind::PaN: apply(dst, on_pan(nr.proto, from, m, now_, pcfg()), summary); break;
      case MsgKind::NaP: apply(dst, on_nap(nr.proto, from, m), summary); break;
      case MsgKind::SpecialForward:
      case MsgKind::SpecialReclaim:
        apply(dst, on_special(nr.proto, from, m, now_, pcfg()), summary);
        break;
      case MsgKind::Refund: {
        const auto& r = std::get<msg::Refund>(m.body);
        apply(dst, on_refund(nr.proto, from, m), summary);
        if (!r.to_in_map && r.about == dst && nr.rejoining) {
          // The chief has dropped our ledger entry; local actions may resume.
          nr.rejoining = false;
          resume(dst);
        }
        break;
      }
    }
  } catch (const StaleMessage&) {
    ++out_.stale_discards;
    record(dst, "stale-discard", summary);
  } catch (const UnknownSender&) {
    ++out_.unknown_sender;
    record(dst, "unknown-sender", summary);
  } catch (const NoPendingHandshake&) {
    ++out_.void_handshakes;
  }
}

void Simulator::handle(const Ev::Local& l) {
  if (l.gen != gen_[l.node]) return;
  auto& items = local_[l.node];
  auto it = items.find(l.item);
  if (it == items.end()) return;
  LocalItem item = it->second;
  items.erase(it);
  auto& nr = nodes_.at(l.node);
  switch (item.kind) {
    case LocalItem::Kind::Work:
      if (nr.proto.state != Activity::Active) return;
      idle(l.node, "work-done");
      return;
    case LocalItem::Kind::Plan: {
      if (nr.proto.state != Activity::Active) return;
      const auto& e = sc_.plans.at(l.node)[item.plan];
      FanoutPlan plan;
      for (const auto& [t, c] : e.shares)
        plan.emplace_back(t, e.fraction ? Credit(mpq_class(c.raw() * nr.proto.hold.raw())) : c);
      try {
        apply(l.node, distribute(nr.proto, plan), "plan");
      } catch (const InsufficientCredit&) {
        record(l.node, "plan-skip", "");
      }
      return;
    }
    case LocalItem::Kind::Timer:
      try {
        if (item.timer.kind == TimerKind::AckWait)
          apply(l.node, on_handshake_timeout(nr.proto, item.timer.id, pcfg()), "ack-timeout");
        else if (item.timer.kind == TimerKind::AAckWait)
          apply(l.node, on_aack_timeout(nr.proto, item.timer.id, now_, pcfg()), "aack-timeout");
      } catch (const NoPendingHandshake&) {
        // Handshake completed before the deadline.
      }
      return;
    case LocalItem::Kind::Retry:
      blocked_.erase(l.node);
      return;
  }
}

void Simulator::idle(NodeId n, const char* why) {
  auto o = on_idle(nodes_.at(n).proto, View(*this), now_, pcfg());
  bool wait = o.label == "A4.4-wait";
  if (!wait) ++out_.counters.n_leave;
  apply(n, std::move(o), why);
  if (wait) {
    blocked_.insert(n);
    add_local(n, LocalItem{LocalItem::Kind::Retry, now_ + sc_.params.d_max, 0, {}});
  }
}

bool Simulator::handover_in_motion() const {
  for (const auto& [_, nr] : nodes_)
    for (const auto& p : nr.proto.pending)
      if (p.handover) return true;
  for (const auto& [_, env] : in_flight_)
    if (env.msg.kind() == MsgKind::ImPC && std::get<msg::ImPC>(env.msg.body).handover) return true;
  return false;
}

void Simulator::flush_mail() {
  if (mail_.empty()) return;
  auto c = chief();
  if (c && !nodes_.at(*c).cut_off(world_)) {
    auto mail = std::move(mail_);
    mail_.clear();
    for (auto& env : mail) {
      // Still addressed to the role: it may move again before this lands.
      ++out_.counters.retries[static_cast<std::size_t>(env.msg.kind())];
      in_flight_[env.id] = env;
      push(now_ + sc_.params.d_min, 2, Ev::Deliver{env});
    }
    return;
  }
  if (c || handover_in_motion()) return;
  // Nobody holds the chief role: return a lost handover to the node that sent it.
  for (auto it = mail_.begin(); it != mail_.end(); ++it) {
    if (it->msg.kind() != MsgKind::SpecialForward) continue;
    const auto& f = std::get<msg::SpecialForward>(it->msg.body);
    if (!f.ledger || frozen(f.origin)) continue;
    Envelope env = *it;
    mail_.erase(it);
    env.dst = f.origin;
    ++out_.counters.retries[static_cast<std::size_t>(MsgKind::SpecialForward)];
    in_flight_[env.id] = env;
    push(now_ + sc_.params.d_min, 2, Ev::Deliver{env});
    return;
  }
}

void Simulator::settle() {
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& [n, nr] : nodes_) {
      if (frozen(n) || blocked_.count(n) || !needs_surrender(nr.proto)) continue;
      idle(n, "surrender");
      changed = true;
    }
  }
  flush_mail();
  if (auto c = chief(); c && !frozen(*c)) {
    View view(*this);
    auto o = try_announce(nodes_.at(*c).proto, now_, pcfg(), &view);
    if (o.announcement)
      apply(*c, std::move(o), "");
    else
      nodes_.at(*c).proto = std::move(o.state);
  }
  if (!out_.truth_termination && !total_.is_zero() && truth_terminated())
    out_.truth_termination = now_;
}

bool Simulator::truth_terminated() const {
  for (const auto& [_, nr] : nodes_)
    if (nr.proto.state == Activity::Active) return false;
  for (const auto& [_, env] : in_flight_)
    if (env.msg.kind() == MsgKind::COM) return false;
  return true;
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  if (queue_.top().time > cfg_.horizon) {
    out_.horizon_exceeded = true;
    return false;
  }
  Ev ev = queue_.top();
  queue_.pop();
  now_ = ev.time;
  std::visit([this](const auto& b) { handle(b); }, ev.body);
  ++out_.events;
  settle();
  if (hook_) hook_(*this, fresh_);
  fresh_.reset();
  return true;
}

SimOutcome Simulator::run() {
  while (step()) {
  }
  out_.end_time = now_;
  auto& c = out_.counters;
  c.n_participants = 0;
  c.n_neighbor = 0;
  for (const auto& [n, nr] : nodes_) {
    if (!nr.participated) continue;
    ++c.n_participants;
    std::uint64_t k = 0;
    for (NodeId m : nr.proto.neighbors) k += nodes_.at(m).participated ? 1 : 0;
    c.n_neighbor = std::max(c.n_neighbor, k);
  }
  return out_;
}

Snapshot Simulator::snapshot() const {
  Snapshot s;
  s.time = now_;
  s.total = total_;
  s.nodes = &nodes_;
  for (const auto& [_, env] : in_flight_) s.in_flight.push_back(&env);
  for (const auto& env : mail_) s.in_flight.push_back(&env);
  s.resolved = &resolved_;
  s.world = &world_;
  return s;
}

}  // namespace tcran
