#include "tcran/fuzz.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "tcran/mattern.hpp"

namespace tcran {

Scenario fuzz_scenario(const FuzzConfig& cfg, std::uint64_t i) {
  const std::uint64_t seed = cfg.base_seed + i;
  const std::size_t n = 1 + mix64(seed) % std::max<std::size_t>(cfg.max_nodes, 1);
  // A quarter of the suite runs without PU activity, failures or AcK loss, so the
  // failure-free liveness and baseline checks get their own share.
  const bool calm = (mix64(seed) >> 32) % 4 == 0;
  return gen_random_scenario(seed, n, 2 + seed % 4, calm ? 0 : cfg.pu_rate, calm ? 0 : cfg.fail_rate);
}

namespace {

struct Outcome {
  std::uint64_t seed = 0;
  bool failure_free = false;
  bool strong = false;
  bool weak = false;
  bool early_strong = false;
  bool weak_mismatch = false;
  bool conservation_failed = false;
  bool cycles = false;
  bool baseline_checked = false;
  bool baseline_mismatch = false;
  std::uint64_t conservation_checks = 0;
  std::vector<BoundLine> bounds;
  std::optional<FuzzFailure> failure;
};

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

Outcome run_one(const FuzzConfig& cfg, std::uint64_t i) {
  Outcome out;
  out.seed = cfg.base_seed + i;
  const Scenario s = fuzz_scenario(cfg, i);
  SimConfig sc;
  sc.horizon = cfg.horizon;
  sc.mutation = cfg.mutation;
  sc.record_trace = false;
  CheckedRun r = run_checked(s, sc);

  out.failure_free = s.failure_free();
  for (const auto& a : r.outcome.announcements)
    (a.mode == TermMode::Strong ? out.strong : out.weak) = true;
  for (const auto& v : r.safety) {
    if (v.find("strong termination announced early") != std::string::npos) out.early_strong = true;
    if (v.find("credit balance off") != std::string::npos) out.weak_mismatch = true;
    if (starts_with(v, "conservation")) out.conservation_failed = true;
  }
  out.cycles = r.cycle_events > 0;
  out.conservation_checks = r.conservation_checks;
  out.bounds = r.bound_lines;

  if (s.start && s.events.empty()) {
    out.baseline_checked = true;
    auto m = mattern_reference_run(s, cfg.horizon);
    out.baseline_mismatch = m.truth_termination != r.outcome.truth_termination;
  }

  if (!r.ok() || out.baseline_mismatch) {
    FuzzFailure f;
    f.seed = out.seed;
    for (const auto& v : r.safety) f.violations.push_back("safety: " + v);
    for (const auto& v : r.liveness) f.violations.push_back("liveness: " + v);
    for (const auto& v : r.bounds) f.violations.push_back("bounds: " + v);
    if (out.baseline_mismatch) f.violations.push_back("baseline: termination instant differs");
    f.scenario = render_scenario(s);
    // Re-run with the trace on; the run is deterministic so it fails the same way.
    sc.record_trace = true;
    Simulator sim(s, sc);
    sim.run();
    f.trace = format_trace(s, sc, sim.trace());
    out.failure = std::move(f);
  }
  return out;
}

}  // namespace

FuzzSummary run_fuzz(const FuzzConfig& cfg) {
  std::vector<Outcome> results(cfg.runs);
  std::atomic<std::uint64_t> next{0};
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(cfg.runs, 1)));
  auto worker = [&] {
    for (std::uint64_t i; (i = next.fetch_add(1)) < cfg.runs;) results[i] = run_one(cfg, i);
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  FuzzSummary sum;
  sum.runs = cfg.runs;
  for (auto& o : results) {
    sum.failure_free += o.failure_free;
    sum.strong += o.strong;
    sum.weak += o.weak;
    sum.ff_strong += o.failure_free && o.strong;
    sum.early_strong += o.early_strong;
    sum.weak_mismatch += o.weak_mismatch;
    sum.conservation_failures += o.conservation_failed;
    sum.conservation_checks += o.conservation_checks;
    sum.cycle_runs += o.cycles;
    sum.baseline_checked += o.baseline_checked;
    sum.baseline_mismatch += o.baseline_mismatch;
    for (const auto& b : o.bounds) {
      auto& t = sum.bounds[b.kind];
      t.max_count = std::max(t.max_count, b.count);
      t.exceeded += !b.pass;
    }
    if (o.failure) sum.failures.push_back(std::move(*o.failure));
  }
  return sum;
}

std::string render_summary(const FuzzSummary& s) {
  std::ostringstream os;
  os << "runs " << s.runs << " failure_free " << s.failure_free << "\n"
     << "strong " << s.strong << " weak " << s.weak << " ff_strong " << s.ff_strong << "\n"
     << "early_strong " << s.early_strong << " weak_mismatch " << s.weak_mismatch
     << " conservation_failures " << s.conservation_failures << " conservation_checks "
     << s.conservation_checks << "\n"
     << "cycle_runs " << s.cycle_runs << " baseline " << s.baseline_checked << " baseline_mismatch "
     << s.baseline_mismatch << "\n";
  for (const auto& [k, t] : s.bounds)
    os << "bound " << kind_name(k) << " max " << t.max_count << " exceeded " << t.exceeded << "\n";
  os << "violations " << s.failures.size() << "\n";
  for (const auto& f : s.failures) {
    os << "seed " << f.seed << "\n";
    for (const auto& v : f.violations) os << "  " << v << "\n";
  }
  return os.str();
}

}  // namespace tcran
