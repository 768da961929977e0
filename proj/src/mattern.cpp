#include "tcran/mattern.hpp"

#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <variant>

#include "tcran/simnet.hpp"

namespace tcran {

namespace {

struct Node {
  bool active = false;
  bool planned = false;
  Credit credit;
  std::uint64_t work = 0;  // id of the outstanding work item; stale items are ignored
};

struct Ev {
  SimTime time;
  int cls;  // same ordering classes as the simulator
  std::uint64_t seq;
  struct Com {
    NodeId src, dst;
    Credit credit;
  };
  struct Return {
    Credit credit;
  };
  struct Work {
    NodeId node;
    std::uint64_t id;
  };
  struct Plan {
    NodeId node;
    std::size_t entry;
  };
  struct Start {};
  std::variant<Com, Return, Work, Plan, Start> body;
};

struct Later {
  bool operator()(const Ev& a, const Ev& b) const {
    return std::tie(a.time, a.cls, a.seq) > std::tie(b.time, b.cls, b.seq);
  }
};

class Run {
 public:
  Run(const Scenario& s, SimTime horizon) : s_(s), horizon_(horizon) {
    for (NodeId n : s.nodes) nodes_[n];
  }

  MatternResult go() {
    if (!s_.start) return r_;
    oracle_ = s_.start->node;
    total_ = s_.start->credit;
    push(s_.start->time, 1, Ev::Start{});
    while (!q_.empty()) {
      Ev e = q_.top();
      if (e.time > horizon_) {
        r_.horizon_exceeded = true;
        break;
      }
      q_.pop();
      now_ = e.time;
      std::visit([&](const auto& b) { handle(b); }, e.body);
      if (!r_.truth_termination && terminated()) r_.truth_termination = now_;
      if (!r_.announcement && returned_ == total_) r_.announcement = now_;
    }
    return r_;
  }

 private:
  void push(SimTime t, int cls, decltype(Ev::body) b) { q_.push(Ev{t, cls, seq_++, std::move(b)}); }

  bool terminated() const {
    if (coms_in_flight_ > 0) return false;
    for (const auto& [_, n] : nodes_)
      if (n.active) return false;
    return true;
  }

  void give_back(NodeId from, const Credit& c) {
    if (from == oracle_) {
      returned_ += c;
      return;
    }
    ++r_.control_msgs;
    push(now_ + sample_delay(s_.params, from, oracle_, 1, counter_[{from, 1}]++), 2, Ev::Return{c});
  }

  void send_com(NodeId src, NodeId dst) {
    // Half of the current credit goes out with every message.
    auto& n = nodes_.at(src);
    Credit half(mpq_class(n.credit.raw() / 2));
    n.credit = credit_sub(n.credit, half);
    ++r_.computation_msgs;
    ++coms_in_flight_;
    push(now_ + sample_delay(s_.params, src, dst, 0, counter_[{src, 0}]++), 2, Ev::Com{src, dst, half});
  }

  void activate(NodeId id) {
    auto& n = nodes_.at(id);
    n.active = true;
    auto w = s_.workload.find(id);
    n.work = ++next_work_;
    push(now_ + (w == s_.workload.end() ? kTicksPerUnit : w->second), 4, Ev::Work{id, n.work});
    if (n.planned) return;
    n.planned = true;
    auto p = s_.plans.find(id);
    if (p == s_.plans.end()) return;
    for (std::size_t i = 0; i < p->second.size(); ++i) {
      if (id == oracle_ && p->second[i].offset == 0) continue;
      push(now_ + p->second[i].offset, 4, Ev::Plan{id, i});
    }
  }

  void fire(NodeId id, const PlanEntry& e) {
    for (const auto& [t, _] : e.shares) send_com(id, t);
  }

  void handle(const Ev::Start&) {
    auto& n = nodes_.at(oracle_);
    n.credit = total_;
    auto p = s_.plans.find(oracle_);
    if (p != s_.plans.end())
      for (const auto& e : p->second)
        if (e.offset == 0) fire(oracle_, e);
    activate(oracle_);
  }

  void handle(const Ev::Com& c) {
    --coms_in_flight_;
    auto& n = nodes_.at(c.dst);
    if (n.active) {
      give_back(c.dst, c.credit);
      return;
    }
    n.credit = c.credit;
    activate(c.dst);
  }

  void handle(const Ev::Return& r) { returned_ += r.credit; }

  void handle(const Ev::Work& w) {
    auto& n = nodes_.at(w.node);
    if (!n.active || n.work != w.id) return;
    n.active = false;
    Credit c = n.credit;
    n.credit = Credit();
    give_back(w.node, c);
  }

  void handle(const Ev::Plan& p) {
    if (!nodes_.at(p.node).active) return;
    fire(p.node, s_.plans.at(p.node)[p.entry]);
  }

  const Scenario& s_;
  SimTime horizon_;
  std::map<NodeId, Node> nodes_;
  std::priority_queue<Ev, std::vector<Ev>, Later> q_;
  std::map<std::pair<NodeId, int>, std::uint64_t> counter_;
  NodeId oracle_ = 0;
  Credit total_, returned_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0, next_work_ = 0, coms_in_flight_ = 0;
  MatternResult r_;
};

}  // namespace

MatternResult mattern_reference_run(const Scenario& s, SimTime horizon) {
  if (!s.events.empty()) throw std::invalid_argument("reference run needs a scenario without events");
  return Run(s, horizon).go();
}

}  // namespace tcran
