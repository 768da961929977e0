#include <gtest/gtest.h>

#include "tcran/scenario.hpp"

using namespace tcran;

namespace {

const std::string kDir = TCRAN_SOURCE_DIR;

const char* kSmall = R"(tcran-scenario 1
[nodes]
1 2 3
[channels]
gcs 1 2
lcs 1 1
lcs 2 1 2
lcs 3 2
[topology]
edge 1 2
edge 2 3
[workload]
start 1 credit 1 at 0
work 1 4
work 2 3
work 3 2
plan 1 at 0 abs 2:1/2
plan 2 at 1 frac 3:1/3
[events]
pu-appear 5 2
fail 6 3
recover 9 3
[params]
seed 5
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST(LoadScenario, WorkedExampleGolden) {
  auto s = load_scenario_file(kDir + "/goldens/sec6.scn");
  EXPECT_EQ(s.nodes.size(), 6u);
  EXPECT_EQ(s.lcs.at(3), (std::set<ChannelId>{5}));
  EXPECT_EQ(s.lcs.at(4), (std::set<ChannelId>{5}));
  EXPECT_EQ(s.start->credit, Credit(1));
  EXPECT_TRUE(s.events.empty());
}

TEST(LoadScenario, SmallDocument) {
  auto s = load_scenario(kSmall);
  EXPECT_EQ(s.edges.size(), 2u);
  EXPECT_EQ(s.neighbors(2), (std::set<NodeId>{1, 3}));
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_EQ(s.events[1].kind, ScenarioEvent::Kind::Fail);
  EXPECT_EQ(s.events[1].time, 6 * kTicksPerUnit);
  EXPECT_TRUE(s.plans.at(2)[0].fraction);
  EXPECT_EQ(s.params.seed, 5u);
  EXPECT_FALSE(s.failure_free());
}

TEST(LoadScenario, EdgeWithoutSharedChannelRejected) {
  EXPECT_THROW(load_scenario(replace(kSmall, "edge 2 3", "edge 1 3")), ValidationError);
}

TEST(LoadScenario, InitiatorMustRetainCredit) {
  EXPECT_THROW(load_scenario(replace(kSmall, "abs 2:1/2", "abs 2:1")), ValidationError);
}

TEST(LoadScenario, FanoutOnlyToNeighbours) {
  EXPECT_THROW(load_scenario(replace(kSmall, "frac 3:1/3", "frac 4:1/3")), ValidationError);
}

TEST(LoadScenario, ParseErrorsCarryLine) {
  try {
    load_scenario(replace(kSmall, "work 3 2", "work 3 two"));
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 16u);
  }
  EXPECT_THROW(load_scenario(replace(kSmall, "[params]", "[knobs]")), ParseError);
  EXPECT_THROW(load_scenario(""), ParseError);
  EXPECT_THROW(load_scenario(replace(kSmall, "seed 5", "seed 5\nseed 6")), ParseError);
}

TEST(Time, ParseAndFormat) {
  EXPECT_EQ(parse_time("12"), 12000);
  EXPECT_EQ(parse_time("0.25"), 250);
  EXPECT_EQ(format_time(93020), "93.02");
  EXPECT_EQ(format_time(31000), "31");
}

TEST(Generator, LoneNode) {
  auto s = gen_random_scenario(1, 1, 1, 0, 0);
  EXPECT_EQ(s.nodes.size(), 1u);
  EXPECT_TRUE(s.edges.empty());
  EXPECT_TRUE(s.failure_free());
  ASSERT_TRUE(s.start);
}

TEST(Generator, OutputValidates) {
  auto s = gen_random_scenario(7, 6, 9, 0.3, 0.1);
  EXPECT_NO_THROW(validate_scenario(s));
  EXPECT_NO_THROW(load_scenario(render_scenario(s)));
}

TEST(Generator, Deterministic) {
  EXPECT_EQ(gen_random_scenario(11, 12, 3, 0.5, 0.5), gen_random_scenario(11, 12, 3, 0.5, 0.5));
  EXPECT_NE(gen_random_scenario(11, 12, 3, 0.5, 0.5), gen_random_scenario(12, 12, 3, 0.5, 0.5));
}

// Property: load(render(s)) == s and generated scenarios always validate.
TEST(GeneratorProperty, RoundTrip) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    auto s = gen_random_scenario(seed, 1 + seed % 30, 1 + seed % 6, (seed % 3) * 0.4, (seed % 4) * 0.3);
    Scenario back;
    ASSERT_NO_THROW(back = load_scenario(render_scenario(s))) << "seed " << seed;
    EXPECT_EQ(back, s) << "seed " << seed;
  }
}

TEST(Rng, PortableStream) {
  // Values pinned with an independent 64-bit reimplementation.
  Rng r(1);
  EXPECT_EQ(r.next(), 0xbeeb8da1658eec67ULL);
  EXPECT_EQ(r.next(), 0xf893a2eefb32555eULL);
  EXPECT_EQ(r.next(), 0x71c18690ee42c90bULL);
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    auto v = u.range(-2, 2);
    EXPECT_GE(v, -2);
    EXPECT_LE(v, 2);
  }
}
