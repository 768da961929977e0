#include <gtest/gtest.h>

#include "tcran/protocol.hpp"

using namespace tcran;

namespace {

class FakeView : public PeerView {
 public:
  std::set<NodeId> active;
  std::map<NodeId, NodeId> parents;
  std::optional<NodeId> ce;
  bool is_active(NodeId k) const override { return active.count(k) > 0; }
  std::optional<NodeId> parent_of(NodeId k) const override {
    auto it = parents.find(k);
    if (it == parents.end()) return std::nullopt;
    return it->second;
  }
  std::optional<NodeId> chief() const override { return ce; }
};

const SessionTag kTag{1, 1};
const ProtocolConfig kCfg{};

NodeProtocolState node(NodeId id, std::set<NodeId> nbrs = {}) {
  NodeProtocolState s;
  s.id = id;
  s.tag = kTag;
  s.neighbors = std::move(nbrs);
  return s;
}

NodeProtocolState active_child(NodeId id, NodeId parent, Credit hold) {
  auto s = node(id);
  s.state = Activity::Active;
  s.parent = Parent::of(parent);
  s.hold = hold;
  return s;
}

Message m(MessageBody b) { return Message{kTag, std::move(b)}; }

template <class T>
std::vector<std::pair<NodeId, T>> sent(const TransitionOutput& o) {
  std::vector<std::pair<NodeId, T>> out;
  for (const auto& s : o.sends)
    if (auto p = std::get_if<T>(&s.msg.body)) out.emplace_back(s.dest, *p);
  return out;
}

Credit sent_credit(const TransitionOutput& o) {
  Credit c;
  for (const auto& s : o.sends) c += carried_credit(s.msg);
  return c;
}

Credit escrowed(const NodeProtocolState& s) {
  Credit c;
  for (const auto& e : s.escrow) c += e.credit;
  return c;
}

Credit pending(const NodeProtocolState& s) {
  Credit c;
  for (const auto& p : s.pending) c += p.credit;
  return c;
}

}  // namespace

TEST(ExternalStart, SendsNineTenths) {
  auto o = on_external_start(node(1), Credit(1), {{2, Credit(9, 10)}}, 1);
  EXPECT_EQ(o.state.hold, Credit(1, 10));
  EXPECT_EQ(o.state.out_map.at(2), Credit(9, 10));
  EXPECT_TRUE(o.state.is_chief());
  auto coms = sent<msg::Com>(o);
  ASSERT_EQ(coms.size(), 1u);
  EXPECT_EQ(coms[0].first, 2u);
  EXPECT_EQ(coms[0].second.credit, Credit(9, 10));
}

TEST(ExternalStart, LoneWorkerKeepsEverything) {
  auto o = on_external_start(node(1), Credit(1), {}, 1);
  EXPECT_EQ(o.state.hold, Credit(1));
  EXPECT_TRUE(o.sends.empty());
}

TEST(ExternalStart, ThreeQuarterShares) {
  auto o = on_external_start(node(1), Credit(1), {{2, Credit(1, 4)}, {3, Credit(1, 4)}, {4, Credit(1, 4)}}, 1);
  EXPECT_EQ(o.state.hold, Credit(1, 4));
  EXPECT_EQ(sent<msg::Com>(o).size(), 3u);
  EXPECT_EQ(o.state.hold + sent_credit(o), Credit(1));
}

TEST(ExternalStart, Errors) {
  EXPECT_THROW(on_external_start(node(1), Credit(1), {{2, Credit(1)}}, 1), InsufficientCredit);
  auto s = node(1);
  s.state = Activity::Active;
  EXPECT_THROW(on_external_start(s, Credit(1), {}, 1), AlreadyActive);
}

TEST(Com, ActivatesPassiveNode) {
  auto o = on_com(node(2), 1, m(msg::Com{Credit(9, 10)}));
  EXPECT_EQ(o.state.state, Activity::Active);
  EXPECT_EQ(o.state.parent, Parent::of(1));
  EXPECT_EQ(o.state.hold, Credit(9, 10));
}

TEST(Com, ActiveNodeRecordsCreditor) {
  auto o = on_com(active_child(3, 2, Credit(1, 10)), 5, m(msg::Com{Credit(1, 10)}));
  EXPECT_EQ(o.state.in_map.at(5), Credit(1, 10));
  EXPECT_EQ(o.state.hold, Credit(1, 10));
  EXPECT_EQ(o.label, "A3.2");
}

TEST(Com, StaleIsDiscardedWithoutChange) {
  auto s = node(2);
  s.tag = {2, 1};
  EXPECT_THROW(on_com(s, 1, Message{{1, 1}, msg::Com{Credit(1, 2)}}), StaleMessage);
}

TEST(Distribute, ForwardsShares) {
  auto o = distribute(active_child(2, 1, Credit(9, 10)), {{3, Credit(4, 5)}});
  EXPECT_EQ(o.state.hold, Credit(1, 10));
  EXPECT_EQ(o.state.out_map.at(3), Credit(4, 5));
  EXPECT_EQ(distribute(active_child(2, 1, Credit(9, 10)), {}).sends.size(), 0u);
  EXPECT_THROW(distribute(active_child(2, 1, Credit(1, 10)), {{3, Credit(1, 10)}}), InsufficientCredit);
}

// Property: hold + out_map stays constant under any fanout.
TEST(DistributeProperty, LocalConservation) {
  for (long k = 1; k < 200; ++k) {
    auto s = active_child(2, 1, Credit(k, k + 3));
    FanoutPlan plan;
    for (NodeId t = 3; t < 3 + k % 5; ++t) plan.push_back({t, Credit(1, (k + 3) * 10)});
    auto o = distribute(s, plan);
    Credit out;
    for (const auto& [_, c] : o.state.out_map) out += c;
    EXPECT_EQ(o.state.hold + out, Credit(k, k + 3));
    EXPECT_EQ(sent_credit(o), out);
  }
}

TEST(Idle, LeafSurrendersToParentAndPassesChildrenUp) {
  // Node 5: parent 4, child 6, active peer 3 that it also sent credit to.
  auto s = active_child(5, 4, Credit(1, 10));
  s.out_map = {{6, Credit(2, 5)}, {3, Credit(1, 10)}};
  FakeView v;
  v.active = {1, 2, 3, 4, 6};
  v.parents = {{6, 5}, {3, 2}, {4, 3}};
  auto o = on_idle(s, v, 0, kCfg);
  auto impc = sent<msg::ImPC>(o);
  ASSERT_EQ(impc.size(), 1u);
  EXPECT_EQ(impc[0].first, 4u);
  EXPECT_EQ(impc[0].second.credit, Credit(1, 10));
  EXPECT_EQ(impc[0].second.b, 1u);
  EXPECT_EQ(impc[0].second.child_map, (std::map<NodeId, Credit>{{6, Credit(2, 5)}}));
  auto imp = sent<msg::ImP>(o);
  ASSERT_EQ(imp.size(), 2u);
  EXPECT_EQ(imp[0].first, 3u);
  EXPECT_EQ(imp[1].first, 6u);
  EXPECT_EQ(imp[0].second.p, 4u);
  EXPECT_EQ(o.state.state, Activity::Passive);
  EXPECT_TRUE(o.state.hold.is_zero());
  EXPECT_EQ(pending(o.state), Credit(1, 10));
}

TEST(Idle, ReturnsInCreditAndSurrendersRest) {
  // Node 3: parent 2, hold 1/5, 6 gave it 1/5 and 4 is its child.
  auto s = active_child(3, 2, Credit(1, 5));
  s.in_map = {{6, Credit(1, 5)}};
  s.out_map = {{4, Credit(7, 10)}};
  FakeView v;
  v.active = {1, 2, 4, 6};
  v.parents = {{4, 3}, {6, 4}, {2, 1}};
  auto o = on_idle(s, v, 0, kCfg);
  auto impc = sent<msg::ImPC>(o);
  ASSERT_EQ(impc.size(), 2u);
  EXPECT_EQ(impc[0].first, 6u);
  EXPECT_EQ(impc[0].second.credit, Credit(1, 5));
  EXPECT_EQ(impc[0].second.b, 0u);
  EXPECT_EQ(impc[1].first, 2u);
  EXPECT_EQ(impc[1].second.credit, Credit(1, 5));
  EXPECT_EQ(impc[1].second.b, 1u);
  auto imp = sent<msg::ImP>(o);
  ASSERT_EQ(imp.size(), 1u);
  EXPECT_EQ(imp[0].first, 4u);
  EXPECT_EQ(imp[0].second.p, 2u);
}

TEST(Idle, ChiefHandsOverToActiveChild) {
  auto s = node(1);
  s = on_external_start(s, Credit(1), {{2, Credit(9, 10)}}, 1).state;
  FakeView v;
  v.active = {1, 2};
  v.parents = {{2, 1}};
  v.ce = 1;
  auto o = on_idle(s, v, 0, kCfg);
  auto impc = sent<msg::ImPC>(o);
  ASSERT_EQ(impc.size(), 1u);
  EXPECT_EQ(impc[0].first, 2u);
  EXPECT_TRUE(impc[0].second.handover);
  EXPECT_EQ(impc[0].second.credit, Credit(1, 10));
  EXPECT_TRUE(sent<msg::ImP>(o).empty());
  EXPECT_FALSE(o.state.is_chief());
}

TEST(Idle, NoTargetWaitsWithCredit) {
  auto s = active_child(4, 9, Credit(1, 3));
  FakeView v;  // nobody active, no chief
  auto o = on_idle(s, v, 0, kCfg);
  EXPECT_EQ(o.label, "A4.4-wait");
  EXPECT_EQ(o.state.hold, Credit(1, 3));
  EXPECT_EQ(o.state.state, Activity::Passive);
  EXPECT_TRUE(needs_surrender(o.state));
}

TEST(ImPC, FromChildCommitsOnAAcK) {
  auto s = active_child(4, 3, Credit(1, 10));
  s.out_map = {{5, Credit(3, 5)}};
  msg::ImPC im{Credit(1, 10), 1, {{6, Credit(2, 5)}}, {5, 1}, true, false, std::nullopt};
  auto o = on_impc(s, 5, m(im), 0, kCfg);
  EXPECT_EQ(o.label, "A5.2");
  EXPECT_EQ(o.state.out_map, (std::map<NodeId, Credit>{{6, Credit(2, 5)}}));
  EXPECT_EQ(escrowed(o.state), Credit(1, 10));
  auto acks = sent<msg::AcK>(o);
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].first, 5u);
  auto o2 = on_aack(o.state, 5, m(msg::AAcK{{5, 1}}));
  EXPECT_EQ(o2.state.hold, Credit(1, 5));
  EXPECT_TRUE(o2.state.escrow.empty());
  EXPECT_THROW(on_aack(o2.state, 5, m(msg::AAcK{{5, 1}})), NoPendingHandshake);
}

TEST(ImPC, HandoverMakesReceiverChief) {
  auto s = node(2);
  s.state = Activity::Passive;
  s.parent = Parent::of(1);
  s.hold = Credit(9, 10);
  ChiefLedger led;
  led.total_credit = Credit(1);
  msg::ImPC im{Credit(1, 10), 0, {}, {1, 1}, false, true, led};
  auto o = on_impc(s, 1, m(im), 0, kCfg);
  EXPECT_TRUE(o.state.is_chief());
  o = on_aack(o.state, 1, m(msg::AAcK{{1, 1}}));
  EXPECT_EQ(o.state.hold, Credit(1));
  auto a = try_announce(o.state, 0, kCfg);
  ASSERT_TRUE(a.announcement);
  EXPECT_EQ(*a.announcement, TermMode::Strong);
}

TEST(ImPC, ZeroFromUnrelatedPeerStillAcked) {
  auto s = active_child(7, 1, Credit(1, 4));
  msg::ImPC im{Credit(), 0, {}, {8, 1}, false, false, std::nullopt};
  auto o = on_impc(s, 8, m(im), 0, kCfg);
  EXPECT_EQ(sent<msg::AcK>(o).size(), 1u);
  o = on_aack(o.state, 8, m(msg::AAcK{{8, 1}}));
  EXPECT_EQ(o.state.hold, Credit(1, 4));
}

TEST(ImPC, FromSelfIsUnknownSender) {
  msg::ImPC im{Credit(), 0, {}, {7, 1}, false, false, std::nullopt};
  EXPECT_THROW(on_impc(active_child(7, 1, Credit(1, 4)), 7, m(im), 0, kCfg), UnknownSender);
}

TEST(ImP, ChildAdoptsNewParent) {
  auto o = on_imp(active_child(6, 5, Credit(1, 10)), 5, m(msg::ImP{4}));
  EXPECT_EQ(o.state.parent, Parent::of(4));
}

TEST(ImP, CreditorLeavingReturnsInCredit) {
  auto s = active_child(3, 2, Credit(1, 10));
  s.in_map = {{5, Credit(1, 10)}};
  auto o = on_imp(s, 5, m(msg::ImP{4}));
  EXPECT_EQ(o.state.hold, Credit(1, 5));
  EXPECT_TRUE(o.state.in_map.empty());
  auto o2 = on_imp(active_child(3, 2, Credit(1, 10)), 9, m(msg::ImP{4}));
  EXPECT_EQ(o2.state.hold, Credit(1, 10));
}

TEST(Handshake, AckTimeoutForwardsToChiefOnce) {
  auto s = active_child(5, 4, Credit(1, 10));
  FakeView v;
  v.active = {4};
  v.ce = 1;
  auto o = on_idle(s, v, 0, kCfg);
  ASSERT_EQ(o.state.pending.size(), 1u);
  auto id = o.state.pending[0].id;
  auto t = on_handshake_timeout(o.state, id, kCfg);
  auto fw = sent<msg::SpecialForward>(t);
  ASSERT_EQ(fw.size(), 1u);
  EXPECT_EQ(fw[0].first, kChief);
  EXPECT_EQ(fw[0].second.credit, Credit(1, 10));
  EXPECT_TRUE(t.state.pending.empty());
  EXPECT_THROW(on_handshake_timeout(t.state, id, kCfg), NoPendingHandshake);
}

TEST(Handshake, DuplicateSurrenderCountedOnce) {
  // Receiver j escrows the credit and gives up waiting for AAcK; the sender also
  // timed out. Both forward to the chief; only one copy is added.
  auto chief = on_external_start(node(1), Credit(1), {{5, Credit(1, 10)}}, 1).state;
  chief.state = Activity::Passive;
  chief.settled = true;
  chief.out_map.clear();
  chief.hold = Credit(9, 10);
  SurrenderId id{5, 1};
  msg::SpecialForward from_receiver{Credit(1, 10), 4, id, true, std::nullopt};
  msg::SpecialForward from_sender{Credit(1, 10), 5, id, false, std::nullopt};
  auto o = on_special(chief, 4, m(from_receiver), 0, kCfg);
  o = on_special(o.state, 5, m(from_sender), 0, kCfg);
  EXPECT_EQ(o.label, "special-dup");
  EXPECT_EQ(o.state.hold, Credit(1));
}

TEST(Handshake, UnseenForwardIsAdded) {
  auto chief = on_external_start(node(1), Credit(1), {}, 1).state;
  chief.hold = Credit(1, 2);
  auto o = on_special(chief, 6, m(msg::SpecialForward{Credit(1, 2), 6, {6, 3}, false, std::nullopt}), 0, kCfg);
  EXPECT_EQ(o.state.hold, Credit(1));
  EXPECT_TRUE(o.state.ledger->settled.count({6, 3}));
}

TEST(Affected, NeighborReportsToChief) {
  auto s = active_child(6, 4, Credit(1, 10));
  s.in_map = {{4, Credit(1, 20)}};
  auto o = on_neighbor_affected(s, 4, 1, Credit(3, 10), 0, kCfg);
  auto pans = sent<msg::PaN>(o);
  ASSERT_EQ(pans.size(), 1u);
  EXPECT_EQ(pans[0].first, kChief);
  EXPECT_EQ(pans[0].second.affected, 4u);
  EXPECT_EQ(pans[0].second.in_credit, Credit(1, 20));
  EXPECT_TRUE(o.state.in_map.empty());
  // Nothing recorded for the node: the report still goes out.
  auto o2 = on_neighbor_affected(active_child(2, 1, Credit(1, 10)), 3, 1, Credit(), 0, kCfg);
  ASSERT_EQ(sent<msg::PaN>(o2).size(), 1u);
  EXPECT_TRUE(sent<msg::PaN>(o2)[0].second.in_credit.is_zero());
}

namespace {

NodeProtocolState settled_chief(Credit hold) {
  auto s = on_external_start(node(1), Credit(1), {}, 1).state;
  s.state = Activity::Passive;
  s.settled = true;
  s.hold = hold;
  return s;
}

}  // namespace

TEST(Pan, LedgerCollectsAffectedNodes) {
  auto s = settled_chief(Credit(3, 10));
  auto o = on_pan(s, 2, m(msg::PaN{3, 1, Credit(), Credit(4, 5), Credit(2, 5)}), 0, kCfg);
  o = on_pan(o.state, 6, m(msg::PaN{4, 1, Credit(), Credit(1, 10), Credit(3, 10)}), 0, kCfg);
  const auto& led = *o.state.ledger;
  EXPECT_EQ(led.affected.size(), 2u);
  EXPECT_TRUE(led.affected.count(3) && led.affected.count(4));
  auto again = on_pan(o.state, 2, m(msg::PaN{3, 1, Credit(), Credit(4, 5), Credit(2, 5)}), 0, kCfg);
  EXPECT_EQ(again.state.ledger->affected, led.affected);
  EXPECT_THROW(on_pan(active_child(2, 1, Credit(1, 2)), 3, m(msg::PaN{4, 1, {}, {}, {}}), 0, kCfg),
               NotChiefExecutive);
}

TEST(Pan, InCreditFromTwoReportersAdds) {
  auto s = settled_chief(Credit(1, 2));
  auto o = on_pan(s, 2, m(msg::PaN{3, 1, Credit(1, 8), Credit(), Credit(1, 4)}), 0, kCfg);
  o = on_pan(o.state, 6, m(msg::PaN{3, 1, Credit(1, 8), Credit(), Credit(1, 4)}), 0, kCfg);
  const auto& e = o.state.ledger->affected.at(3);
  EXPECT_EQ(e.moved_total(), Credit(1, 4));
  EXPECT_EQ(e.resident, Credit(1, 4));
  EXPECT_EQ(o.state.hold + o.state.ledger->c_pu_sum(), Credit(1));
}

TEST(Announce, WeakAfterDeadline) {
  auto s = settled_chief(Credit(3, 10));
  auto o = on_pan(s, 2, m(msg::PaN{3, 1, Credit(), Credit(), Credit(2, 5)}), 0, kCfg);
  o = on_pan(o.state, 6, m(msg::PaN{4, 1, Credit(), Credit(), Credit(3, 10)}), 0, kCfg);
  EXPECT_FALSE(try_announce(o.state, kCfg.weak_wait - 1, kCfg).announcement);
  auto a = try_announce(o.state, kCfg.weak_wait, kCfg);
  ASSERT_TRUE(a.announcement);
  EXPECT_EQ(*a.announcement, TermMode::Weak);
}

TEST(Announce, ActiveChiefWithAllCreditWaits) {
  auto s = on_external_start(node(1), Credit(1), {}, 1).state;
  EXPECT_EQ(s.hold, Credit(1));
  EXPECT_FALSE(try_announce(s, 0, kCfg).announcement);
}

TEST(Announce, StrongWhenMovedCreditIsAtChief) {
  // A crashed leaf's only ledger entry is in-credit its neighbour handed in.
  auto s = settled_chief(Credit(143, 144));
  auto o = on_pan(s, 2, m(msg::PaN{8, 1, Credit(1, 144), Credit(), Credit()}), 0, kCfg);
  auto a = try_announce(o.state, 0, kCfg);
  ASSERT_TRUE(a.announcement);
  EXPECT_EQ(*a.announcement, TermMode::Strong);
}

TEST(Recovery, NapGoesToChiefAndActiveNeighbours) {
  auto s = node(3, {1, 2, 4, 5});
  FakeView v;
  v.active = {2};
  v.ce = 1;
  auto o = on_recovery(s, v, 1, 0, kCfg);
  auto naps = sent<msg::NaP>(o);
  ASSERT_EQ(naps.size(), 2u);
  EXPECT_EQ(naps[0].first, kChief);
  EXPECT_EQ(naps[1].first, 2u);
  FakeView quiet;
  quiet.ce = 1;
  EXPECT_EQ(sent<msg::NaP>(on_recovery(s, quiet, 1, 0, kCfg)).size(), 1u);
}

TEST(Nap, ChiefRefundsAndClearsEntry) {
  auto s = settled_chief(Credit(3, 10));
  auto o = on_pan(s, 2, m(msg::PaN{3, 1, Credit(1, 10), Credit(), Credit(2, 5)}), 0, kCfg);
  o = on_nap(o.state, 3, m(msg::NaP{3, 1}));
  EXPECT_FALSE(o.state.ledger->affected.count(3));
  auto r = sent<msg::Refund>(o);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].first, 3u);
  EXPECT_EQ(r[0].second.credit, Credit(1, 10));
  // Chief hold + node 3's resident + refund = C.
  EXPECT_EQ(o.state.hold + Credit(2, 5) + r[0].second.credit + Credit(1, 5), Credit(1));
}

TEST(Nap, NeighbourAsksChiefForCreditBack) {
  auto s = active_child(6, 1, Credit(1, 10));
  s.neighbors = {4};
  auto o = on_nap(s, 4, m(msg::NaP{4, 1}));
  auto rc = sent<msg::SpecialReclaim>(o);
  ASSERT_EQ(rc.size(), 1u);
  EXPECT_EQ(rc[0].first, kChief);
  EXPECT_EQ(rc[0].second.affected, 4u);
}

TEST(Nap, UnknownNodeRefundsNothing) {
  auto o = on_nap(settled_chief(Credit(1)), 9, m(msg::NaP{9, 1}));
  auto r = sent<msg::Refund>(o);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].second.credit.is_zero());
  EXPECT_EQ(o.state.hold, Credit(1));
}

TEST(Nap, AfterStrongTerminationNodeLearnsItIsOver) {
  auto s = settled_chief(Credit(1));
  s = try_announce(s, 0, kCfg).state;
  auto o = on_nap(s, 3, m(msg::NaP{3, 1}));
  auto tm = sent<msg::TM>(o);
  ASSERT_EQ(tm.size(), 1u);
  EXPECT_EQ(tm[0].second.mode, TermMode::Strong);
}

TEST(Reclaim, UnledgeredNodeMovesNoCredit) {
  auto o = on_special(settled_chief(Credit(1)), 6, m(msg::SpecialReclaim{4}), 0, kCfg);
  auto r = sent<msg::Refund>(o);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].second.credit.is_zero());
  EXPECT_EQ(o.state.hold, Credit(1));
}

TEST(Tm, MarksDoneIdempotently) {
  auto s = node(3);
  auto o = on_tm(s, m(msg::TM{TermMode::Strong}));
  EXPECT_EQ(o.state.terminated, kTag);
  auto o2 = on_tm(o.state, m(msg::TM{TermMode::Strong}));
  EXPECT_EQ(o2.state, o.state);
  // Old-session traffic is now stale.
  EXPECT_THROW(on_com(o2.state, 1, m(msg::Com{Credit(1, 2)})), StaleMessage);
}
