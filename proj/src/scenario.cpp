#include "tcran/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

namespace tcran {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next() {
  x_ += 0x9e3779b97f4a7c15ULL;
  return mix64(x_);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t v;
  do v = next();
  while (v >= limit);
  return v % n;
}

std::set<NodeId> Scenario::neighbors(NodeId n) const {
  std::set<NodeId> out;
  for (const auto& [a, b] : edges) {
    if (a == n) out.insert(b);
    if (b == n) out.insert(a);
  }
  return out;
}

SimTime parse_time(const std::string& s) {
  auto dot = s.find('.');
  std::string whole = s.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  auto digits = [](const std::string& d) {
    return std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (whole.empty() || !digits(whole) || !digits(frac) || frac.size() > 3 ||
      (dot != std::string::npos && frac.empty()))
    throw std::invalid_argument("bad time '" + s + "'");
  while (frac.size() < 3) frac += '0';
  return std::stoll(whole) * kTicksPerUnit + std::stoll(frac);
}

std::string format_time(SimTime t) {
  std::string s = std::to_string(t / kTicksPerUnit);
  SimTime r = t % kTicksPerUnit;
  if (r == 0) return s;
  std::string f = std::to_string(r);
  f.insert(0, 3 - f.size(), '0');
  while (f.back() == '0') f.pop_back();
  return s + "." + f;
}

namespace {

const char* kHeader = "tcran-scenario";
constexpr int kVersion = 1;

const char* event_name(ScenarioEvent::Kind k) {
  switch (k) {
    case ScenarioEvent::Kind::PuAppear: return "pu-appear";
    case ScenarioEvent::Kind::PuDisappear: return "pu-disappear";
    case ScenarioEvent::Kind::Fail: return "fail";
    case ScenarioEvent::Kind::Recover: return "recover";
    case ScenarioEvent::Kind::Crash: return "crash";
    case ScenarioEvent::Kind::Join: return "join";
  }
  return "?";
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> w;
  for (std::string t; in >> t;) w.push_back(t);
  return w;
}

struct Reader {
  std::size_t line = 0;
  [[noreturn]] void fail(const std::string& m) const { throw ParseError(line, m); }

  std::uint64_t uint(const std::string& s) const {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
      fail("expected a nonnegative integer, got '" + s + "'");
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail("integer out of range '" + s + "'");
    }
  }
  NodeId id(const std::string& s) const {
    auto v = uint(s);
    if (v >= kChief) fail("id out of range '" + s + "'");
    return static_cast<NodeId>(v);
  }
  SimTime time(const std::string& s) const {
    try {
      return parse_time(s);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  Credit credit(const std::string& s) const {
    try {
      return Credit::parse(s);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  void arity(const std::vector<std::string>& w, std::size_t n) const {
    if (w.size() != n) fail("'" + w[0] + "' expects " + std::to_string(n - 1) + " arguments");
  }
};

}  // namespace

Scenario load_scenario(const std::string& text) {
  Scenario s;
  Reader r;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  bool header = false;
  bool mesh = false;
  std::set<std::string> seen_params;
  while (std::getline(in, raw)) {
    ++r.line;
    auto hash = raw.find('#');
    std::string line = raw.substr(0, hash);
    auto w = words(line);
    if (w.empty()) continue;
    if (!header) {
      if (w.size() != 2 || w[0] != kHeader) r.fail("missing 'tcran-scenario <version>' header");
      if (r.uint(w[1]) != kVersion) r.fail("unsupported format version " + w[1]);
      header = true;
      continue;
    }
    if (w[0].front() == '[') {
      if (w.size() != 1 || w[0].back() != ']') r.fail("bad section header");
      section = w[0].substr(1, w[0].size() - 2);
      static const std::set<std::string> known = {"nodes",    "channels", "topology",
                                                  "workload", "events",   "params"};
      if (!known.count(section)) r.fail("unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) r.fail("content before the first section");

    if (section == "nodes") {
      for (const auto& t : w) s.nodes.push_back(r.id(t));
    } else if (section == "channels") {
      if (w[0] == "gcs") {
        for (std::size_t i = 1; i < w.size(); ++i) s.gcs.insert(r.id(w[i]));
      } else if (w[0] == "lcs") {
        if (w.size() < 2) r.fail("lcs needs a node");
        auto& set = s.lcs[r.id(w[1])];
        for (std::size_t i = 2; i < w.size(); ++i) set.insert(r.id(w[i]));
      } else {
        r.fail("unknown channels directive '" + w[0] + "'");
      }
    } else if (section == "topology") {
      if (w[0] == "mesh") {
        r.arity(w, 1);
        mesh = true;
      } else if (w[0] == "edge") {
        r.arity(w, 3);
        NodeId a = r.id(w[1]), b = r.id(w[2]);
        if (a == b) r.fail("self edge");
        s.edges.insert({std::min(a, b), std::max(a, b)});
      } else {
        r.fail("unknown topology directive '" + w[0] + "'");
      }
    } else if (section == "workload") {
      if (w[0] == "start") {
        // start <node> credit <C> at <t> [session <n>]
        if (!(w.size() == 6 || w.size() == 8) || w[2] != "credit" || w[4] != "at")
          r.fail("expected 'start <node> credit <C> at <t> [session <n>]'");
        if (s.start) r.fail("duplicate start");
        StartSpec st{r.id(w[1]), r.credit(w[3]), r.time(w[5]), 1};
        if (w.size() == 8) {
          if (w[6] != "session") r.fail("expected 'session'");
          st.session = r.uint(w[7]);
        }
        s.start = st;
      } else if (w[0] == "work") {
        r.arity(w, 3);
        s.workload[r.id(w[1])] = r.time(w[2]);
      } else if (w[0] == "plan") {
        // plan <node> at <offset> abs|frac <target>:<share> ...
        if (w.size() < 5 || w[2] != "at" || (w[4] != "abs" && w[4] != "frac"))
          r.fail("expected 'plan <node> at <offset> abs|frac <target>:<share>...'");
        PlanEntry e;
        e.offset = r.time(w[3]);
        e.fraction = w[4] == "frac";
        for (std::size_t i = 5; i < w.size(); ++i) {
          auto colon = w[i].find(':');
          if (colon == std::string::npos) r.fail("share must be <target>:<credit>");
          e.shares.emplace_back(r.id(w[i].substr(0, colon)), r.credit(w[i].substr(colon + 1)));
        }
        s.plans[r.id(w[1])].push_back(std::move(e));
      } else {
        r.fail("unknown workload directive '" + w[0] + "'");
      }
    } else if (section == "events") {
      static const std::map<std::string, ScenarioEvent::Kind> kinds = {
          {"pu-appear", ScenarioEvent::Kind::PuAppear}, {"pu-disappear", ScenarioEvent::Kind::PuDisappear},
          {"fail", ScenarioEvent::Kind::Fail},          {"recover", ScenarioEvent::Kind::Recover},
          {"crash", ScenarioEvent::Kind::Crash},        {"join", ScenarioEvent::Kind::Join}};
      auto k = kinds.find(w[0]);
      if (k == kinds.end()) r.fail("unknown event '" + w[0] + "'");
      r.arity(w, 3);
      s.events.push_back({r.time(w[1]), k->second, r.id(w[2])});
    } else if (section == "params") {
      r.arity(w, 2);
      const auto& key = w[0];
      const auto& v = w[1];
      if (!seen_params.insert(key).second) r.fail("duplicate param '" + key + "'");
      auto& p = s.params;
      if (key == "d_min") p.d_min = r.time(v);
      else if (key == "d_max") p.d_max = r.time(v);
      else if (key == "d_ack") p.d_ack = r.time(v);
      else if (key == "d_detect") p.d_detect = r.time(v);
      else if (key == "t_e") p.t_e = r.time(v);
      else if (key == "weak_wait") p.weak_wait = r.time(v);
      else if (key == "ack_drop") p.ack_drop = r.credit(v);
      else if (key == "freeze_affected") {
        if (v != "true" && v != "false") r.fail("freeze_affected is true|false");
        p.freeze_affected = v == "true";
      } else if (key == "split") {
        if (v != "equal" && v != "halving") r.fail("split is equal|halving");
        p.split = v == "equal" ? SplitStrategy::Equal : SplitStrategy::Halving;
      } else if (key == "choice") {
        if (v != "lowest-id" && v != "highest-id") r.fail("choice is lowest-id|highest-id");
        p.choice = v == "lowest-id" ? ChoicePolicy::LowestId : ChoicePolicy::HighestId;
      } else if (key == "seed") p.seed = r.uint(v);
      else r.fail("unknown param '" + key + "'");
    }
  }
  if (!header) throw ParseError(r.line, "empty document");
  if (mesh) {
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
      for (std::size_t j = i + 1; j < s.nodes.size(); ++j) {
        NodeId a = s.nodes[i], b = s.nodes[j];
        s.edges.insert({std::min(a, b), std::max(a, b)});
      }
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  validate_scenario(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(0, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_scenario(ss.str());
}

void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& m) { throw ValidationError(m); };
  std::set<NodeId> nodes(s.nodes.begin(), s.nodes.end());
  if (nodes.size() != s.nodes.size()) fail("node ids must be unique");
  for (const auto& [n, set] : s.lcs) {
    if (!nodes.count(n)) fail("lcs for unknown node " + std::to_string(n));
    for (ChannelId c : set)
      if (!s.gcs.count(c))
        fail("lcs of node " + std::to_string(n) + " has channel " + std::to_string(c) +
             " outside gcs");
  }
  for (const auto& [a, b] : s.edges) {
    if (!nodes.count(a) || !nodes.count(b)) fail("edge with unknown node");
    auto ia = s.lcs.find(a), ib = s.lcs.find(b);
    bool shared = false;
    if (ia != s.lcs.end() && ib != s.lcs.end())
      for (ChannelId c : ia->second) shared = shared || ib->second.count(c);
    if (!shared)
      fail("edge " + std::to_string(a) + "-" + std::to_string(b) + " without a shared channel");
  }
  for (const auto& [n, t] : s.workload)
    if (!nodes.count(n)) fail("workload for unknown node " + std::to_string(n));
  for (const auto& [n, entries] : s.plans) {
    if (!nodes.count(n)) fail("plan for unknown node " + std::to_string(n));
    auto nb = s.neighbors(n);
    for (const auto& e : entries) {
      Credit sum;
      for (const auto& [t, c] : e.shares) {
        if (!nb.count(t))
          fail("fanout target " + std::to_string(t) + " is not a neighbor of " + std::to_string(n));
        if (c.is_zero()) fail("fanout shares must be positive");
        sum += c;
      }
      if (e.fraction && sum >= Credit(1))
        fail("fractional shares of node " + std::to_string(n) + " must sum below 1");
    }
  }
  if (s.start) {
    if (!nodes.count(s.start->node)) fail("start node unknown");
    if (s.start->credit.is_zero()) fail("initial credit must be positive");
    auto it = s.plans.find(s.start->node);
    if (it != s.plans.end())
      for (const auto& e : it->second) {
        if (e.offset != 0 || e.fraction) continue;
        Credit sum;
        for (const auto& [_, c] : e.shares) sum += c;
        if (sum >= s.start->credit) fail("initiator shares must sum below the initial credit");
      }
  }
  for (const auto& e : s.events) {
    bool pu = e.kind == ScenarioEvent::Kind::PuAppear || e.kind == ScenarioEvent::Kind::PuDisappear;
    if (pu && !s.gcs.count(e.target)) fail("PU event on unknown channel");
    if (!pu && !nodes.count(e.target)) fail("failure event on unknown node");
  }
  const auto& p = s.params;
  if (p.d_min <= 0 || p.d_max < p.d_min) fail("need 0 < d_min <= d_max");
  if (p.d_ack <= 0 || p.d_ack >= p.d_min) fail("need 0 < d_ack < d_min");
  if (p.t_e <= p.d_max + 2 * p.d_ack) fail("t_e must exceed one surrender round trip");
  if (p.ack_drop >= Credit(1)) fail("ack_drop must be below 1");
}

std::string render_scenario(const Scenario& s) {
  std::ostringstream o;
  o << kHeader << " " << kVersion << "\n[nodes]\n";
  for (std::size_t i = 0; i < s.nodes.size(); ++i) o << (i ? " " : "") << s.nodes[i];
  o << "\n[channels]\ngcs";
  for (ChannelId c : s.gcs) o << " " << c;
  o << "\n";
  for (const auto& [n, set] : s.lcs) {
    o << "lcs " << n;
    for (ChannelId c : set) o << " " << c;
    o << "\n";
  }
  o << "[topology]\n";
  for (const auto& [a, b] : s.edges) o << "edge " << a << " " << b << "\n";
  o << "[workload]\n";
  if (s.start) {
    o << "start " << s.start->node << " credit " << s.start->credit.str() << " at "
      << format_time(s.start->time);
    if (s.start->session != 1) o << " session " << s.start->session;
    o << "\n";
  }
  for (const auto& [n, t] : s.workload) o << "work " << n << " " << format_time(t) << "\n";
  for (const auto& [n, entries] : s.plans)
    for (const auto& e : entries) {
      o << "plan " << n << " at " << format_time(e.offset) << (e.fraction ? " frac" : " abs");
      for (const auto& [t, c] : e.shares) o << " " << t << ":" << c.str();
      o << "\n";
    }
  o << "[events]\n";
  for (const auto& e : s.events)
    o << event_name(e.kind) << " " << format_time(e.time) << " " << e.target << "\n";
  const auto& p = s.params;
  o << "[params]\n"
    << "d_min " << format_time(p.d_min) << "\n"
    << "d_max " << format_time(p.d_max) << "\n"
    << "d_ack " << format_time(p.d_ack) << "\n"
    << "d_detect " << format_time(p.d_detect) << "\n"
    << "t_e " << format_time(p.t_e) << "\n"
    << "weak_wait " << format_time(p.weak_wait) << "\n"
    << "ack_drop " << p.ack_drop.str() << "\n"
    << "freeze_affected " << (p.freeze_affected ? "true" : "false") << "\n"
    << "split " << (p.split == SplitStrategy::Equal ? "equal" : "halving") << "\n"
    << "choice " << (p.choice == ChoicePolicy::LowestId ? "lowest-id" : "highest-id") << "\n"
    << "seed " << p.seed << "\n";
  return o.str();
}

Scenario gen_random_scenario(std::uint64_t seed, std::size_t n_nodes, std::size_t g_channels,
                             double pu_rate, double fail_rate) {
  if (n_nodes == 0) throw std::invalid_argument("need at least one node");
  if (g_channels == 0) g_channels = 1;
  Rng rng(mix64(seed));
  Scenario s;
  for (NodeId n = 1; n <= n_nodes; ++n) s.nodes.push_back(n);
  for (ChannelId c = 1; c <= g_channels; ++c) s.gcs.insert(c);

  for (NodeId n : s.nodes) {
    auto k = 1 + rng.below(std::min<std::size_t>(3, g_channels));
    auto& set = s.lcs[n];
    while (set.size() < k) set.insert(static_cast<ChannelId>(1 + rng.below(g_channels)));
  }
  auto shared = [&](NodeId a, NodeId b) {
    for (ChannelId c : s.lcs[a])
      if (s.lcs[b].count(c)) return true;
    return false;
  };
  for (NodeId n = 2; n <= n_nodes; ++n) {
    NodeId j = static_cast<NodeId>(1 + rng.below(n - 1));
    if (!shared(n, j)) {
      auto& lj = s.lcs[j];
      auto it = lj.begin();
      std::advance(it, rng.below(lj.size()));
      s.lcs[n].insert(*it);
    }
    s.edges.insert({j, n});
  }
  double extra = n_nodes > 1 ? 2.0 / static_cast<double>(n_nodes) : 0.0;
  for (NodeId a = 1; a <= n_nodes; ++a)
    for (NodeId b = a + 1; b <= n_nodes; ++b)
      if (shared(a, b) && rng.chance(extra)) s.edges.insert({a, b});

  s.start = StartSpec{1, Credit(1), 0, 1};
  s.params.seed = seed;
  s.params.split = rng.chance(0.5) ? SplitStrategy::Equal : SplitStrategy::Halving;
  s.params.d_min = kTicksPerUnit / 10;
  s.params.d_max = 2 * kTicksPerUnit;
  for (NodeId n : s.nodes) {
    s.workload[n] = rng.range(kTicksPerUnit, 20 * kTicksPerUnit);
    auto nb = s.neighbors(n);
    std::vector<NodeId> cand(nb.begin(), nb.end());
    std::size_t q = std::min<std::size_t>(cand.size(), rng.below(4));
    // Partial Fisher-Yates for q distinct targets.
    for (std::size_t i = 0; i < q; ++i) std::swap(cand[i], cand[i + rng.below(cand.size() - i)]);
    if (q == 0) continue;
    auto parts = split_credit(Credit(1), q, s.params.split);
    if (n == 1) {
      PlanEntry e{0, false, {}};
      for (std::size_t i = 0; i < q; ++i) e.shares.emplace_back(cand[i], parts[i + 1]);
      s.plans[n].push_back(e);
      continue;
    }
    // Split the fanout over one or two instants to mix immediate and later COMs.
    std::size_t first = rng.chance(0.7) ? q : 1 + rng.below(q);
    PlanEntry a{0, true, {}};
    for (std::size_t i = 0; i < first; ++i) a.shares.emplace_back(cand[i], parts[i + 1]);
    s.plans[n].push_back(a);
    if (first < q) {
      PlanEntry b{static_cast<SimTime>(rng.range(1, 5) * kTicksPerUnit), true, {}};
      Credit left = Credit(1);
      for (std::size_t i = 0; i < first; ++i) left = credit_sub(left, parts[i + 1]);
      for (std::size_t i = first; i < q; ++i)
        b.shares.emplace_back(cand[i], Credit(mpq_class(parts[i + 1].raw() / left.raw())));
      s.plans[n].push_back(b);
    }
  }

  const SimTime horizon = 60 * kTicksPerUnit;
  for (ChannelId c : s.gcs) {
    if (!rng.chance(pu_rate)) continue;
    SimTime on = rng.range(0, horizon);
    s.events.push_back({on, ScenarioEvent::Kind::PuAppear, c});
    // One primary user in four stays for good and forces a weak outcome.
    if (rng.chance(0.75))
      s.events.push_back({on + rng.range(kTicksPerUnit, 40 * kTicksPerUnit),
                          ScenarioEvent::Kind::PuDisappear, c});
  }
  for (NodeId n : s.nodes) {
    if (n == 1 || !rng.chance(fail_rate)) continue;
    SimTime at = rng.range(0, horizon);
    if (rng.chance(0.2)) {
      s.events.push_back({at, ScenarioEvent::Kind::Crash, n});
      continue;
    }
    s.events.push_back({at, ScenarioEvent::Kind::Fail, n});
    s.events.push_back({at + rng.range(kTicksPerUnit, 30 * kTicksPerUnit),
                        ScenarioEvent::Kind::Recover, n});
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  if (pu_rate > 0 || fail_rate > 0) s.params.ack_drop = Credit(1, 20);
  validate_scenario(s);
  return s;
}

}  // namespace tcran
