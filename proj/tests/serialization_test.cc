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


#include "fairsteer/serialization.h"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "fairsteer/error.h"

namespace fairsteer {
namespace {

namespace fs = std::filesystem;

fs::path TempPath(const std::string& name) {
  return fs::temp_directory_path() /
         ("fairsteer_serialization_" + std::to_string(::testing::UnitTest::GetInstance()
                                                          ->random_seed()) +
          "_" + name);
}

FairnessReport RandomReport(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FairnessReport r;
  r.manifest = "m";
  r.kind = "toy";
  r.n_samples = rng() % 1000;
  r.accuracy = unit(rng);
  r.macro_f1 = unit(rng) / 3.0;
  r.selection_rates[GroupKey("gender", "male")] = unit(rng);
  r.selection_rates[GroupKey("race", "x,y")] = unit(rng);
  switch (rng() % 3) {
    case 0:
      r.dpr = DprValue::Finite(unit(rng));
      break;
    case 1:
      r.dpr = DprValue::Degenerate();
      break;
    default:
      break;
  }
  r.rb_per_occupation["doctor"] = unit(rng) - 0.5;
  if (rng() % 2) r.rb_average = unit(rng) - 0.5;
  if (rng() % 2) r.vlbs = 100 * unit(rng);
  r.label_frequencies["A"] = unit(rng);
  r.warnings = {"a \"quoted\" warning", "line\nbreak"};
  return r;
}

TEST(ReportJsonTest, RoundTripsLosslessly) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const FairnessReport r = RandomReport(rng);
    const Json json = ReportToJson(r);
    EXPECT_EQ(ReportFromJson(Json::parse(json.dump())), r);
    EXPECT_EQ(ReportToJson(r).dump(), json.dump());
  }
}

TEST(ReportJsonTest, DegenerateDprIsInf) {
  FairnessReport r;
  r.kind = "portrait";
  r.dpr = DprValue::Degenerate();
  EXPECT_EQ(ReportToJson(r)["dpr"], "inf");
  EXPECT_NE(ReportToCsv(r).find("dpr,,inf\n"), std::string::npos);
}

TEST(ReportJsonTest, RejectsMalformed) {
  EXPECT_THROW(ReportFromJson(Json::parse("{\"type\":\"fairness_report\"}")),
               ValidationError);
  Json bad = ReportToJson(FairnessReport{});
  bad["dpr"] = "nan";
  EXPECT_THROW(ReportFromJson(bad), ValidationError);
  bad = ReportToJson(FairnessReport{});
  bad["type"] = "other";
  EXPECT_THROW(ReportFromJson(bad), ValidationError);
}

TEST(ReportCsvTest, StableColumns) {
  FairnessReport r;
  r.n_samples = 2;
  r.accuracy = 0.5;
  r.macro_f1 = 0.25;
  r.selection_rates[GroupKey("gender", "female")] = 0.5;
  r.dpr = DprValue::Finite(0.5);
  r.rb_per_occupation["chef"] = -0.2;
  r.rb_average = -0.2;
  EXPECT_EQ(ReportToCsv(r),
            "metric,key,value\n"
            "n_samples,,2\n"
            "accuracy,,0.5\n"
            "macro_f1,,0.25\n"
            "selection_rate,gender=female,0.5\n"
            "dpr,,0.5\n"
            "rb,chef,-0.2\n"
            "rb_average,,-0.2\n");
}

TEST(VerdictTest, RoundTrip) {
  EffectivenessVerdict v;
  v.manifest = "m";
  v.score = "accuracy";
  v.text_only_score = 0.61;
  v.with_image_score = 0.97;
  v.random_score = 0.5;
  v.image_reliance_delta = 0.36;
  v.leakage_flag = true;
  v.margins.leakage_margin = 0.2;
  EXPECT_EQ(VerdictFromJson(Json::parse(VerdictToJson(v).dump())), v);
  EXPECT_EQ(VerdictToCsv(v),
            "manifest,score,text_only_score,with_image_score,random_score,"
            "image_reliance_delta,leakage_flag,difficulty_flag,leakage_margin,"
            "difficulty_ceiling\n"
            "m,accuracy,0.61,0.97,0.5,0.36,true,false,0.2,0.95\n");
}

TEST(SteeringConfigJsonTest, RoundTripAndValidation) {
  SteeringConfig c;
  c.method = SteeringMethod::kConditionalClamping;
  c.feature = 12;
  c.coefficient = -20;
  c.threshold = 0.5;
  c.layer = 2;
  c.clamp_semantics = ClampSemantics::kAdditive;
  EXPECT_EQ(SteeringConfigFromJson(SteeringConfigToJson(c)), c);
  Json json = SteeringConfigToJson(c);
  json["coefficient"] = 50;
  EXPECT_THROW(SteeringConfigFromJson(json), ValidationError);
  json["unbounded_coefficient"] = true;
  EXPECT_EQ(SteeringConfigFromJson(json).coefficient, 50);
  json.erase("threshold");
  EXPECT_THROW(SteeringConfigFromJson(json), ValidationError);
}

TEST(SweepOutputTest, OneRowPerConfig) {
  std::vector<SweepEntry> entries(2);
  entries[0].index = 1;
  entries[0].config.coefficient = 5;
  FairnessReport r;
  r.accuracy = 0.69;
  r.rb_average = -0.6;
  r.dpr = DprValue::Degenerate();
  entries[0].report = r;
  entries[1].index = 0;
  entries[1].error = "failed, badly";
  const std::string csv = SweepToCsv(entries);
  std::istringstream in(csv);
  std::string header, first, second, extra;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header,
            "rank,index,method,feature,coefficient,threshold,layer,clamp_semantics,"
            "accuracy,rb_average,macro_f1,dpr,vlbs,error");
  EXPECT_TRUE(first.starts_with("1,1,constant,0,5.0,,0,target,0.69,-0.6,"));
  EXPECT_NE(first.find(",inf,"), std::string::npos);
  EXPECT_NE(second.find("\"failed, badly\""), std::string::npos);

  const std::string jsonl = SweepToJsonl(entries);
  std::istringstream lines(jsonl);
  std::string line;
  size_t count = 0;
  while (std::getline(lines, line)) {
    const Json row = Json::parse(line);
    EXPECT_EQ(row["rank"], count + 1);
    ++count;
  }
  EXPECT_EQ(count, 2u);
}

SaeParams RandomSae(uint64_t seed) {
  SaeParams p = InitSaeParams(7, 3, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (auto& x : p.b_enc) x = normal(rng);
  for (auto& x : p.b_dec) x = normal(rng);
  return p;
}

TEST(SaeSerializationTest, BinaryLayout) {
  const SaeParams p = RandomSae(3);
  const std::string bytes = SaeToBinary(p);
  ASSERT_EQ(bytes.size(), 24u + 8u * (2 * 7 * 3 + 7 + 3));
  EXPECT_EQ(bytes.substr(0, 4), "FSAE");
  uint64_t m = 0;
  for (int i = 7; i >= 0; --i) m = (m << 8) | static_cast<unsigned char>(bytes[8 + i]);
  EXPECT_EQ(m, 7u);
  // First payload value is w_enc(0, 0), little-endian.
  uint64_t raw = 0;
  for (int i = 7; i >= 0; --i) raw = (raw << 8) | static_cast<unsigned char>(bytes[24 + i]);
  double first;
  std::memcpy(&first, &raw, sizeof(first));
  EXPECT_EQ(first, p.w_enc(0, 0));
  // Row-major: the second value is w_enc(0, 1).
  raw = 0;
  for (int i = 7; i >= 0; --i) raw = (raw << 8) | static_cast<unsigned char>(bytes[32 + i]);
  std::memcpy(&first, &raw, sizeof(first));
  EXPECT_EQ(first, p.w_enc(0, 1));
  EXPECT_EQ(SaeFromBinary(bytes), p);
}

TEST(SaeSerializationTest, RejectsCorruptInput) {
  const std::string bytes = SaeToBinary(RandomSae(3));
  EXPECT_THROW(SaeFromBinary(bytes.substr(0, bytes.size() - 1)), ValidationError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(SaeFromBinary(magic), ValidationError);
  Json json = SaeToJson(RandomSae(3));
  json["w_dec"][0] = 5.0;
  EXPECT_THROW(SaeFromJson(json), ValidationError);
}

TEST(SaeSerializationTest, FilesInBothFormats) {
  const SaeParams p = RandomSae(4);
  for (const std::string name : {"sae.bin", "sae.json"}) {
    const fs::path path = TempPath(name);
    WriteSae(p, path);
    EXPECT_EQ(ReadSae(path), p);
    fs::remove(path);
  }
  EXPECT_THROW(ReadSae(TempPath("missing.bin")), IoError);
  EXPECT_THROW(WriteSae(p, "/nonexistent-dir/sae.bin"), IoError);
}

TEST(RegistryTest, RoundTrip) {
  FeatureRegistry registry;
  registry.entries.push_back({5, "women in leadership", 12, FeatureLocation::kResidual});
  registry.entries.push_back({9, "gender equity", 3, FeatureLocation::kMlp});
  std::istringstream in(RegistryToJsonl(registry));
  EXPECT_EQ(ParseRegistry(in).entries, registry.entries);
  std::istringstream bad("{\"feature\": 1}\n");
  EXPECT_THROW(ParseRegistry(bad), ValidationError);
}

TEST(ToyModelSerializationTest, RoundTrip) {
  ToyModelDims dims;
  dims.width = 5;
  dims.layers = 2;
  dims.modality_tokens = 2;
  dims.text_dim = 4;
  dims.hook_layer = 0;
  const ToyModel model = InitToyModel(dims, LabelSpace({"A", "B"}), 8);
  EXPECT_EQ(ToyModelFromJson(Json::parse(ToyModelToJson(model).dump())), model);
  const fs::path path = TempPath("model.json");
  WriteToyModel(model, path);
  EXPECT_EQ(ReadToyModel(path), model);
  fs::remove(path);
  Json json = ToyModelToJson(model);
  json["tensors"]["readout_w"]["rows"] = 3;
  EXPECT_THROW(ToyModelFromJson(json), ValidationError);
}

TEST(FormatNumberTest, ShortestRoundTrip) {
  EXPECT_EQ(FormatNumber(0.1), "0.1");
  EXPECT_EQ(FormatNumber(-0.2), "-0.2");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = unit(rng);
    EXPECT_EQ(std::stod(FormatNumber(x)), x);
  }
}

}  // namespace
}  // namespace fairsteer
