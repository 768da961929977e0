#include "tcran/report.hpp"

#include <sstream>

namespace tcran {

namespace {

const char* mode_name(TermMode m) { return m == TermMode::Strong ? "strong" : "weak"; }

const char* verdict(const std::vector<std::string>& v) { return v.empty() ? "pass" : "fail"; }

}  // namespace

int RunReport::exit_code() const {
  if (!safety.empty()) return 3;
  if (!liveness.empty()) return 4;
  if (!bound_violations.empty()) return 5;
  return 0;
}

RunReport make_report(const Scenario& s, const CheckedRun& run, std::string scenario_path,
                      std::string trace_path) {
  RunReport r;
  const auto& o = run.outcome;
  r.scenario_path = std::move(scenario_path);
  r.trace_path = std::move(trace_path);
  r.seed = s.params.seed;
  r.announcements = o.announcements;
  r.truth_termination = o.truth_termination;
  r.horizon_exceeded = o.horizon_exceeded;
  r.end_time = o.end_time;
  r.events = o.events;
  r.counters = o.counters;
  r.bounds = run.bound_lines;
  r.drops = o.counters.dropped;
  r.stale_discards = o.stale_discards;
  r.void_handshakes = o.void_handshakes;
  r.conservation_checks = run.conservation_checks;
  r.safety = run.safety;
  r.liveness = run.liveness;
  r.bound_violations = run.bounds;
  r.cycle_events = run.cycle_events;
  r.latency_allowance = static_cast<SimTime>(o.counters.height + kLatencySlack) * s.params.d_max;
  for (const auto& a : o.announcements)
    if (a.mode == TermMode::Strong && o.truth_termination) r.latency = a.time - *o.truth_termination;
  return r;
}

std::string render_text(const RunReport& r) {
  std::ostringstream o;
  o << "scenario   " << r.scenario_path << " (seed " << r.seed << ")\n";
  if (!r.trace_path.empty()) o << "trace      " << r.trace_path << "\n";
  if (r.announcements.empty()) o << "announced  none\n";
  for (const auto& a : r.announcements)
    o << "announced  " << mode_name(a.mode) << " at t=" << format_time(a.time) << " by node " << a.announcer
      << "\n";
  o << "terminated " << (r.truth_termination ? "t=" + format_time(*r.truth_termination) : "no") << "\n";
  if (r.latency)
    o << "latency    " << format_time(*r.latency) << " (allowance " << format_time(r.latency_allowance)
      << ", " << (*r.latency <= r.latency_allowance ? "within" : "over") << ")\n";
  o << "run        " << r.events << " events, ended t=" << format_time(r.end_time)
    << (r.horizon_exceeded ? ", horizon exceeded" : "") << "\n";
  o << "structure  N=" << r.counters.n_participants << " delta=" << r.counters.delta
    << " height=" << r.counters.height << " N_leave=" << r.counters.n_leave
    << " N_affected=" << r.counters.n_affected << " N_nb=" << r.counters.n_neighbor << "\n";
  o << "messages\n";
  for (const auto& b : r.bounds)
    o << "  " << kind_name(b.kind) << " " << b.count << " / " << b.bound << (b.pass ? "" : "  EXCEEDED")
      << "\n";
  for (std::size_t k = 0; k < kMsgKinds; ++k) {
    auto kind = static_cast<MsgKind>(k);
    bool bounded = false;
    for (const auto& b : r.bounds) bounded = bounded || b.kind == kind;
    if (!bounded && r.counters.sent[k] > 0) o << "  " << kind_name(kind) << " " << r.counters.sent[k] << "\n";
  }
  o << "retries   ";
  bool any = false;
  for (std::size_t k = 0; k < kMsgKinds; ++k)
    if (r.counters.retries[k] > 0) {
      o << " " << kind_name(static_cast<MsgKind>(k)) << "=" << r.counters.retries[k];
      any = true;
    }
  o << (any ? "" : " none") << "\n";
  o << "drops      " << r.drops << " (" << r.counters.ack_drops << " injected), stale " << r.stale_discards
    << ", cycles " << r.cycle_events << "\n";
  o << "checks     " << r.conservation_checks << " conservation\n";
  o << "safety     " << verdict(r.safety) << "\n";
  for (const auto& v : r.safety) o << "  " << v << "\n";
  o << "liveness   " << verdict(r.liveness) << "\n";
  for (const auto& v : r.liveness) o << "  " << v << "\n";
  o << "bounds     " << verdict(r.bound_violations) << "\n";
  for (const auto& v : r.bound_violations) o << "  " << v << "\n";
  return o.str();
}

std::string render_machine(const RunReport& r) {
  std::ostringstream o;
  o << "report=tcran 1\n";
  o << "scenario=" << r.scenario_path << "\n";
  o << "seed=" << r.seed << "\n";
  o << "trace=" << r.trace_path << "\n";
  o << "announcements=" << r.announcements.size() << "\n";
  for (std::size_t i = 0; i < r.announcements.size(); ++i) {
    const auto& a = r.announcements[i];
    o << "announcement." << i << "=" << mode_name(a.mode) << " " << format_time(a.time) << " " << a.announcer
      << "\n";
  }
  o << "truth_termination=" << (r.truth_termination ? format_time(*r.truth_termination) : "none") << "\n";
  o << "latency=" << (r.latency ? format_time(*r.latency) : "none") << "\n";
  o << "latency_allowance=" << format_time(r.latency_allowance) << "\n";
  o << "horizon_exceeded=" << (r.horizon_exceeded ? "true" : "false") << "\n";
  o << "end_time=" << format_time(r.end_time) << "\n";
  o << "events=" << r.events << "\n";
  o << "n_participants=" << r.counters.n_participants << "\n";
  o << "delta=" << r.counters.delta << "\n";
  o << "height=" << r.counters.height << "\n";
  o << "n_leave=" << r.counters.n_leave << "\n";
  o << "n_affected=" << r.counters.n_affected << "\n";
  o << "n_neighbor=" << r.counters.n_neighbor << "\n";
  for (std::size_t k = 0; k < kMsgKinds; ++k) {
    auto kind = static_cast<MsgKind>(k);
    o << "sent." << kind_name(kind) << "=" << r.counters.sent[k] << "\n";
    o << "retry." << kind_name(kind) << "=" << r.counters.retries[k] << "\n";
  }
  for (const auto& b : r.bounds)
    o << "bound." << kind_name(b.kind) << "=" << b.count << "/" << b.bound << " " << (b.pass ? "pass" : "fail")
      << "\n";
  o << "drops=" << r.drops << "\n";
  o << "ack_drops=" << r.counters.ack_drops << "\n";
  o << "stale_discards=" << r.stale_discards << "\n";
  o << "void_handshakes=" << r.void_handshakes << "\n";
  o << "cycle_events=" << r.cycle_events << "\n";
  o << "conservation_checks=" << r.conservation_checks << "\n";
  auto list = [&](const char* key, const std::vector<std::string>& v) {
    o << "verdict." << key << "=" << verdict(v) << "\n";
    for (std::size_t i = 0; i < v.size(); ++i) o << "violation." << key << "." << i << "=" << v[i] << "\n";
  };
  list("safety", r.safety);
  list("liveness", r.liveness);
  list("bounds", r.bound_violations);
  o << "exit=" << r.exit_code() << "\n";
  return o.str();
}

}  // namespace tcran
