#include "irda/features.hpp"
#include "irda/moralmachine.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

using namespace irda;
using namespace irda::moralmachine;

namespace {

Scenario two_men_vs_woman() {
  Scenario s;
  s.id = "fixture";
  s.stay_outcome.counts[static_cast<std::size_t>(Character::Man)] = 2;
  s.swerve_outcome.counts[static_cast<std::size_t>(Character::Woman)] = 1;
  s.legality = Legality::PedestriansLawful;
  return s;
}

} // namespace

TEST(MoralMachineVector, FrozenLayoutFixture) {
  const auto v = encode_vector(two_men_vs_woman());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double want = i == 0 ? 2.0 : i == 14 ? 1.0 : 0.0;
    EXPECT_EQ(v[i], want) << "position " << i;
  }
  EXPECT_EQ(v, encode_vector(two_men_vs_woman()));
}

TEST(MoralMachineVector, StayBlockSumsToStayTotal) {
  for (const auto& s : generate_scenarios(17, 300)) {
    const auto v = encode_vector(s);
    EXPECT_EQ(std::accumulate(v.begin(), v.begin() + 13, 0.0), s.stay_outcome.total());
    EXPECT_GE(v[25], 0.0);
    EXPECT_LE(v[25], 2.0);
  }
}

TEST(MoralMachineVector, InjectiveOverGeneratedPool) {
  const auto pool = generate_scenarios(5, 800);
  std::set<std::array<double, kVectorSize>> seen;
  for (const auto& s : pool) {
    EXPECT_TRUE(seen.insert(encode_vector(s)).second) << s.id;
  }
}

TEST(MoralMachineVector, InvalidScenarioRejected) {
  Scenario s = two_men_vs_woman();
  s.swerve_outcome = s.stay_outcome;
  EXPECT_THROW(encode_vector(s), ValidationError);
  Scenario big = two_men_vs_woman();
  big.stay_outcome.counts[0] = 6;
  EXPECT_THROW(validate(big), ValidationError);
}

TEST(MoralMachineText, ContainsBothGroupsAndIsStable) {
  Scenario s;
  s.id = "adults-vs-dog";
  s.stay_outcome.counts[static_cast<std::size_t>(Character::Man)] = 1;
  s.stay_outcome.counts[static_cast<std::size_t>(Character::Woman)] = 1;
  s.swerve_outcome.counts[static_cast<std::size_t>(Character::Dog)] = 1;
  const auto text = encode_text(s);
  EXPECT_NE(text.find("1 man"), std::string::npos);
  EXPECT_NE(text.find("1 woman"), std::string::npos);
  EXPECT_NE(text.find("1 dog"), std::string::npos);
  EXPECT_EQ(text, encode_text(s));
}

TEST(MoralMachineText, JaywalkingClause) {
  Scenario s = two_men_vs_woman();
  s.legality = Legality::PedestriansJaywalking;
  EXPECT_NE(encode_text(s).find("red light"), std::string::npos);
}

TEST(MoralMachineText, ParseInvertsEncode) {
  for (const auto& s : generate_scenarios(23, 300)) {
    const auto back = parse_text(encode_text(s));
    EXPECT_EQ(back.id, s.id);
    EXPECT_TRUE(back.same_dilemma(s)) << encode_text(s);
  }
}

TEST(MoralMachinePool, FiftyDistinctAndRepeatable) {
  const auto a = generate_scenarios(3, 50);
  const auto b = generate_scenarios(3, 50);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NO_THROW(validate(a[i]));
    EXPECT_EQ(to_json(a[i]), to_json(b[i]));
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      EXPECT_FALSE(a[i].same_dilemma(a[j]));
    }
  }
}

TEST(MoralMachinePool, ZeroCountIsConfigError) {
  EXPECT_THROW(generate_scenarios(3, 0), ConfigError);
}

TEST(MoralMachinePool, LargePoolHasAnimalOnlySide) {
  const auto pool = generate_scenarios(3, 10000);
  bool found = false;
  for (const auto& s : pool) {
    for (const auto* g : {&s.stay_outcome, &s.swerve_outcome}) {
      found = found || (g->animals() > 0 && g->humans() == 0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(MoralMachinePool, JsonlRoundTrip) {
  const auto pool = generate_scenarios(8, 20);
  std::stringstream buf;
  write_jsonl(buf, pool);
  const auto back = read_jsonl(buf);
  ASSERT_EQ(back.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    EXPECT_EQ(back[i].id, pool[i].id);
    EXPECT_TRUE(back[i].same_dilemma(pool[i]));
  }
}
