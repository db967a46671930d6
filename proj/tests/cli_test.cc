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


#include "fairsteer_cli/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fairsteer/harness.h"
#include "fairsteer/serialization.h"

namespace fairsteer::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fairsteer_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  int Call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::Run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, ToyPipeline) {
  ASSERT_EQ(Call({"gen-task", "--bias-strength", "0.8", "--samples", "200", "--seed", "1",
                  "-o", Path("train.jsonl")}),
            kExitOk)
      << err_.str();
  ASSERT_EQ(Call({"gen-task", "--bias-strength", "0.8", "--samples", "100", "--seed", "2",
                  "--name", "held", "-o", Path("held.jsonl")}),
            kExitOk);
  ASSERT_EQ(Call({"train-toy", "-m", Path("train.jsonl"), "--epochs", "3", "--seed", "1",
                  "-o", Path("model.json")}),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(out_.str().starts_with("epoch,train_loss,train_accuracy\n"));

  ASSERT_EQ(Call({"eval", "-m", Path("held.jsonl"), "--model", Path("model.json"), "-o",
                  Path("image.jsonl")}),
            kExitOk)
      << err_.str();
  ASSERT_EQ(Call({"eval", "-m", Path("held.jsonl"), "--model", Path("model.json"),
                  "--no-image", "-o", Path("text.jsonl")}),
            kExitOk);
  ASSERT_EQ(Call({"report", "-m", Path("held.jsonl"), "-l", Path("image.jsonl")}), kExitOk);
  const FairnessReport report = ReportFromJson(Json::parse(out_.str()));
  EXPECT_EQ(report.n_samples, 100u);
  EXPECT_EQ(report.manifest, "held");

  ASSERT_EQ(Call({"report", "-m", Path("held.jsonl"), "-l", Path("image.jsonl"), "--format",
                  "csv"}),
            kExitOk);
  EXPECT_TRUE(out_.str().starts_with("metric,key,value\n"));

  ASSERT_EQ(Call({"baseline", "-m", Path("held.jsonl"), "--runs", "100", "-o",
                  Path("random.json")}),
            kExitOk);
  ASSERT_EQ(Call({"audit", "-m", Path("held.jsonl"), "--text-only", Path("text.jsonl"),
                  "--with-image", Path("image.jsonl"), "--random", Path("random.json")}),
            kExitOk)
      << err_.str();
  const Json verdict = Json::parse(out_.str());
  EXPECT_EQ(verdict["type"], "effectiveness_verdict");
  EXPECT_EQ(verdict["leakage_margin"], 0.1);

  ASSERT_EQ(Call({"audit", "-m", Path("held.jsonl"), "--text-only", Path("text.jsonl"),
                  "--with-image", Path("image.jsonl"), "--leakage-margin", "0.3",
                  "--difficulty-ceiling", "0.5", "--format", "csv"}),
            kExitOk);
  EXPECT_NE(out_.str().find(",0.3,0.5\n"), std::string::npos) << out_.str();

  ASSERT_EQ(Call({"adversarialize", "-m", Path("held.jsonl"), "-o", Path("adv.jsonl")}),
            kExitOk);
  const DatasetManifest adv = ReadManifest(Path("adv.jsonl"));
  EXPECT_TRUE(adv.samples[0].adversarial);
  EXPECT_TRUE(adv.samples[0].question.ends_with("?"));
  ASSERT_EQ(Call({"eval", "-m", Path("held.jsonl"), "--model", Path("model.json"),
                  "--adversarial"}),
            kExitOk);
  EXPECT_NE(out_.str().find("\"adversarial\":true"), std::string::npos);

  ASSERT_EQ(Call({"train-sae", "-m", Path("train.jsonl"), "--model", Path("model.json"),
                  "--features", "64", "--steps", "50", "-o", Path("sae.bin"), "--registry",
                  Path("registry.jsonl"), "--trace", Path("trace.csv")}),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(fs::exists(Path("registry.jsonl")));
  EXPECT_TRUE(fs::exists(Path("trace.csv")));

  ASSERT_EQ(Call({"sweep", "-m", Path("held.jsonl"), "--model", Path("model.json"), "--sae",
                  Path("sae.bin"), "--grid", "-5,0,5", "--methods", "constant,clamping",
                  "--format", "csv"}),
            kExitOk)
      << err_.str();
  size_t lines = 0;
  for (char c : out_.str()) lines += c == '\n';
  EXPECT_EQ(lines, 7u);

  std::ofstream(Path("steer.json")) << SteeringConfigToJson(SteeringConfig{}).dump();
  ASSERT_EQ(Call({"eval", "-m", Path("held.jsonl"), "--model", Path("model.json"),
                  "--steering", Path("steer.json"), "--sae", Path("sae.bin")}),
            kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("constant:f0:c0:l0"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Call({"report", "-m", Path("missing.jsonl"), "-l", Path("x.jsonl")}), kExitIo);
  EXPECT_NE(err_.str().find("missing.jsonl"), std::string::npos);
  EXPECT_EQ(Call({"frobnicate"}), kExitValidation);
  EXPECT_EQ(Call({}), kExitValidation);
  EXPECT_EQ(Call({"gen-task", "--bias-strength", "2"}), kExitValidation);
  EXPECT_EQ(Call({"gen-task", "--samples", "3"}), kExitValidation);
  EXPECT_EQ(Call({"--help"}), kExitOk);

  std::ofstream(Path("bad.jsonl")) << "{not json\n";
  EXPECT_EQ(Call({"baseline", "-m", Path("bad.jsonl")}), kExitValidation);
  EXPECT_NE(err_.str().find("line 1"), std::string::npos) << err_.str();

  ASSERT_EQ(Call({"gen-task", "--samples", "10", "-o", Path("m.jsonl")}), kExitOk);
  std::ofstream(Path("log.jsonl")) << "{\"manifest\":\"toy-b0.0-s0\",\"model\":\"x\",\"seed\":0}\n"
                                   << "{\"sample_id\":\"toy-0-0\",\"predicted\":\"A\"}\n"
                                   << "{\"sample_id\":\"toy-0-0\",\"predicted\":\"A\"}\n";
  EXPECT_EQ(Call({"report", "-m", Path("m.jsonl"), "-l", Path("log.jsonl")}),
            kExitValidation);
  EXPECT_NE(err_.str().find("line 3"), std::string::npos) << err_.str();
  EXPECT_EQ(Call({"gen-task", "-o", (dir_ / "no" / "such" / "dir.jsonl").string()}),
            kExitIo);
  EXPECT_EQ(Call({"eval", "-m", Path("m.jsonl")}), kExitValidation);
}

}  // namespace
}  // namespace fairsteer::cli
