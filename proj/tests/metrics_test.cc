/*
 * Copyright 2026 The fairsteer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "fairsteer/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "fairsteer/error.h"
#include "oracles.h"

namespace fairsteer {
namespace {

const LabelSpace kAb({"A", "B"});

std::vector<GroupKey> Genders(std::initializer_list<const char*> values) {
  std::vector<GroupKey> groups;
  for (const char* v : values) groups.emplace_back("gender", v);
  return groups;
}

TEST(LabelSpaceTest, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(LabelSpace(std::vector<std::string>{}), ValidationError);
  EXPECT_THROW(LabelSpace({"A", "A"}), ValidationError);
  EXPECT_EQ(kAb.IndexOf("B"), 1u);
  EXPECT_FALSE(kAb.IndexOf("C").has_value());
}

TEST(GroupKeyTest, RejectsEmptyParts) {
  EXPECT_THROW(GroupKey("", "female"), ValidationError);
  EXPECT_THROW(GroupKey("gender", ""), ValidationError);
  EXPECT_EQ(GroupKey("gender", "female").ToString(), "gender=female");
}

TEST(MacroF1Test, Examples) {
  EXPECT_DOUBLE_EQ(MacroF1(std::vector<size_t>{0, 1}, std::vector<size_t>{0, 1}, kAb), 1.0);
  EXPECT_DOUBLE_EQ(MacroF1(std::vector<size_t>{0, 0, 1, 1},
                           std::vector<size_t>{0, 1, 0, 1}, kAb),
                   0.5);
  EXPECT_DOUBLE_EQ(MacroF1(std::vector<size_t>{0, 0}, std::vector<size_t>{1, 1}, kAb), 0.0);
}

TEST(MacroF1Test, AbsentClassCountsAsZero) {
  const LabelSpace abc({"A", "B", "C"});
  // C never predicted and never gold: F1(C) = 0, so the mean is 2/3.
  EXPECT_DOUBLE_EQ(MacroF1(std::vector<size_t>{0, 1}, std::vector<size_t>{0, 1}, abc),
                   2.0 / 3.0);
}

TEST(MacroF1Test, Errors) {
  EXPECT_THROW(MacroF1(std::vector<size_t>{}, std::vector<size_t>{}, kAb), ValidationError);
  EXPECT_THROW(MacroF1(std::vector<size_t>{0}, std::vector<size_t>{0, 1}, kAb),
               ValidationError);
  EXPECT_THROW(MacroF1(std::vector<size_t>{2}, std::vector<size_t>{0}, kAb), ValidationError);
}

TEST(MacroF1Test, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng() % 30;
    std::vector<size_t> preds(n), golds(n);
    for (size_t i = 0; i < n; ++i) {
      preds[i] = rng() % 2;
      golds[i] = rng() % 2;
    }
    const double f1 = MacroF1(preds, golds, kAb);
    EXPECT_GE(f1, 0.0);
    EXPECT_LE(f1, 1.0);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<size_t> p2(n), g2(n);
    for (size_t i = 0; i < n; ++i) {
      p2[i] = preds[order[i]];
      g2[i] = golds[order[i]];
    }
    EXPECT_DOUBLE_EQ(MacroF1(p2, g2, kAb), f1);
    // An absent class scores 0, so a perfect score needs both classes.
    const bool both = std::count(golds.begin(), golds.end(), 0u) % n != 0;
    EXPECT_EQ(f1 == 1.0, preds == golds && both);
  }
}

TEST(SelectionRatesTest, Examples) {
  const auto groups = Genders({"m", "m", "f", "f"});
  auto rates = SelectionRates(std::vector<size_t>{0, 0, 1, 1}, groups, 0);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "m")), 1.0);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "f")), 0.0);
  rates = SelectionRates(std::vector<size_t>{0, 1, 0, 1}, groups, 0);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "m")), 0.5);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "f")), 0.5);
  rates = SelectionRates(std::vector<size_t>{0, 0, 0, 1}, groups, 0);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "m")), 1.0);
  EXPECT_DOUBLE_EQ(rates.at(GroupKey("gender", "f")), 0.5);
}

TEST(SelectionRatesTest, Errors) {
  EXPECT_THROW(SelectionRates(std::vector<size_t>{}, std::vector<GroupKey>{}, 0),
               ValidationError);
  EXPECT_THROW(SelectionRates(std::vector<size_t>{0}, Genders({"m", "f"}), 0),
               ValidationError);
}

TEST(DprTest, Examples) {
  const GroupKey m("gender", "m"), f("gender", "f");
  EXPECT_EQ(DemographicParityRatio({{m, 0.5}, {f, 0.25}}), DprValue::Finite(0.5));
  EXPECT_EQ(DemographicParityRatio({{m, 0.3}, {f, 0.3}}), DprValue::Finite(1.0));
  const DprValue degenerate = DemographicParityRatio({{m, 0.0}, {f, 0.0}});
  EXPECT_TRUE(degenerate.degenerate());
  EXPECT_EQ(degenerate.ToString(), "inf");
  EXPECT_THROW(degenerate.value(), ValidationError);
}

TEST(DprTest, NeedsTwoGroups) {
  EXPECT_THROW(DemographicParityRatio({{GroupKey("gender", "m"), 0.5}}),
               ValidationError);
  EXPECT_THROW(DprValue::Finite(1.5), ValidationError);
}

TEST(DprTest, InvariantToRelabelingAndScaling) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<GroupKey, double> rates, renamed, scaled;
    const double k = unit(rng);
    const size_t groups = 2 + rng() % 3;
    for (size_t g = 0; g < groups; ++g) {
      const double r = unit(rng);
      rates[GroupKey("race", "g" + std::to_string(g))] = r;
      renamed[GroupKey("race", "z" + std::to_string(groups - g))] = r;
      scaled[GroupKey("race", "g" + std::to_string(g))] = r * k;
    }
    const double base = DemographicParityRatio(rates).value();
    EXPECT_EQ(DemographicParityRatio(renamed).value(), base);
    EXPECT_NEAR(DemographicParityRatio(scaled).value(), base, 1e-12);
  }
}

TEST(ResolutionBiasTest, Examples) {
  std::vector<PronounRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back({"doctor", Gender::kFemale, i < 6});
    records.push_back({"doctor", Gender::kMale, i < 8});
  }
  const auto rb = ResolutionBias(records);
  EXPECT_NEAR(rb.per_occupation.at("doctor"), -0.2, 1e-15);
  EXPECT_NEAR(*rb.average, -0.2, 1e-15);

  std::vector<PronounRecord> perfect = {{"nurse", Gender::kFemale, true},
                                        {"nurse", Gender::kMale, true}};
  EXPECT_EQ(*ResolutionBias(perfect).average, 0.0);
}

TEST(ResolutionBiasTest, AverageIsUnweightedMean) {
  std::vector<PronounRecord> records;
  // teacher: female 5/5, male 3/5 -> +0.4 ; chef: female 4/5, male 5/5 -> -0.2
  for (int i = 0; i < 5; ++i) {
    records.push_back({"teacher", Gender::kFemale, true});
    records.push_back({"teacher", Gender::kMale, i < 3});
    records.push_back({"chef", Gender::kFemale, i < 4});
    records.push_back({"chef", Gender::kMale, true});
  }
  // Extra chef rows must not weight the mean.
  for (int i = 0; i < 20; ++i) records.push_back({"chef", Gender::kMale, true});
  const auto rb = ResolutionBias(records);
  EXPECT_NEAR(rb.per_occupation.at("teacher"), 0.4, 1e-15);
  EXPECT_NEAR(rb.per_occupation.at("chef"), -0.2, 1e-15);
  EXPECT_NEAR(*rb.average, 0.1, 1e-15);
}

TEST(ResolutionBiasTest, SingleGenderOccupationExcluded) {
  std::vector<PronounRecord> records = {{"pilot", Gender::kMale, true},
                                        {"baker", Gender::kFemale, true},
                                        {"baker", Gender::kMale, false}};
  const auto rb = ResolutionBias(records);
  EXPECT_EQ(rb.per_occupation.size(), 1u);
  EXPECT_EQ(rb.excluded, std::vector<std::string>{"pilot"});
  EXPECT_EQ(*rb.average, 1.0);
  EXPECT_FALSE(ResolutionBias(std::vector<PronounRecord>{
                                  {"pilot", Gender::kMale, true}})
                   .average.has_value());
}

TEST(ResolutionBiasTest, FlipsSignWhenGendersSwap) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PronounRecord> records, swapped;
    for (int i = 0; i < 40; ++i) {
      PronounRecord r{"occ" + std::to_string(rng() % 3),
                      rng() % 2 ? Gender::kMale : Gender::kFemale,
                      rng() % 2 == 0};
      records.push_back(r);
      r.subject_gender = OppositeGender(r.subject_gender);
      swapped.push_back(r);
    }
    const auto a = ResolutionBias(records), b = ResolutionBias(swapped);
    ASSERT_EQ(a.average.has_value(), b.average.has_value());
    if (a.average) EXPECT_NEAR(*a.average, -*b.average, 1e-15);
    for (const auto& [occupation, value] : a.per_occupation) {
      EXPECT_EQ(value, -b.per_occupation.at(occupation));
    }
  }
}

TEST(VlbsTest, Examples) {
  using R = StereotypeRole;
  EXPECT_EQ(*Vlbs(std::vector<R>{R::kStereotypical, R::kStereotypical,
                                 R::kAntiStereotypical, R::kStereotypical}),
            75.0);
  EXPECT_EQ(*Vlbs(std::vector<R>{R::kAntiStereotypical, R::kAntiStereotypical}), 0.0);
  EXPECT_FALSE(Vlbs(std::vector<R>{R::kUnrelated, R::kUnrelated}).has_value());
}

TEST(VlbsTest, RoleSwapComplementsTo100) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StereotypeRole> choices, swapped;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) {
      const auto role = static_cast<StereotypeRole>(rng() % 3);
      choices.push_back(role);
      swapped.push_back(role == StereotypeRole::kStereotypical
                            ? StereotypeRole::kAntiStereotypical
                        : role == StereotypeRole::kAntiStereotypical
                            ? StereotypeRole::kStereotypical
                            : role);
    }
    const auto a = Vlbs(choices), b = Vlbs(swapped);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) EXPECT_NEAR(*a + *b, 100.0, 1e-12);
  }
}

TEST(MetricsOracleTest, RandomLogsAgreeWithBruteForce) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t classes = 2 + rng() % 3;
    std::vector<std::string> names;
    for (size_t c = 0; c < classes; ++c) names.push_back(std::string(1, 'A' + c));
    const LabelSpace space(names);
    const size_t n = 1 + rng() % 50;
    const size_t group_count = 1 + rng() % 4;
    std::vector<size_t> preds(n), golds(n);
    std::vector<std::string> raw_groups(n);
    std::vector<GroupKey> groups;
    for (size_t i = 0; i < n; ++i) {
      preds[i] = rng() % classes;
      golds[i] = rng() % classes;
      raw_groups[i] = "g" + std::to_string(rng() % group_count);
      groups.emplace_back("race", raw_groups[i]);
    }
    EXPECT_NEAR(MacroF1(preds, golds, space), oracle::MacroF1(preds, golds, classes),
                1e-12);
    const auto rates = SelectionRates(preds, groups, 0);
    const auto expected = oracle::SelectionRates(preds, raw_groups, 0);
    ASSERT_EQ(rates.size(), expected.size());
    for (const auto& [group, rate] : expected) {
      EXPECT_EQ(rates.at(GroupKey("race", group)), rate);
    }
    if (rates.size() >= 2) {
      const auto dpr = DemographicParityRatio(rates);
      const auto want = oracle::Dpr(expected);
      ASSERT_EQ(dpr.degenerate(), !want.has_value());
      if (want) EXPECT_NEAR(dpr.value(), *want, 1e-12);
    }
  }
}

TEST(LabelFrequenciesTest, SumsToOne) {
  const auto freq = LabelFrequencies(std::vector<size_t>{0, 0, 0, 1}, kAb);
  EXPECT_EQ(freq.at("A"), 0.75);
  EXPECT_EQ(freq.at("B"), 0.25);
}

TEST(GenderTest, ParseAndOpposite) {
  EXPECT_EQ(ParseGender("female"), Gender::kFemale);
  EXPECT_EQ(OppositeGender(Gender::kMale), Gender::kFemale);
  EXPECT_THROW(ParseGender("other"), ValidationError);
}

}  // namespace
}  // namespace fairsteer
