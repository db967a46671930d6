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

#ifndef FAIRSTEER_HARNESS_H_
#define FAIRSTEER_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairsteer/metrics.h"
#include "fairsteer/prediction.h"
#include "fairsteer/toymodel.h"

namespace fairsteer {

// Which metric battery applies to a dataset.
//   portrait:   Macro-F1 + selection rates + DPR
//   pronoun:    accuracy + resolution bias
//   stereotype: VLBS
//   toy:        all of portrait and pronoun
enum class ManifestKind { kPortrait, kPronoun, kStereotype, kToy };

ManifestKind ParseManifestKind(const std::string& text);
std::string ManifestKindName(ManifestKind kind);

// Age bins used for age-prediction manifests: Child [0, 20), Young [20, 40),
// Middle-Aged [40, 60), Senior [60, inf).
std::string AgeBin(double age);

struct DatasetManifest {
  std::string name;
  ManifestKind kind = ManifestKind::kPortrait;
  QuestionType question_type = QuestionType::kBinary;
  LabelSpace labels;
  // Attributes fairness is measured over. Selection rates cover all of them;
  // the DPR uses the first.
  std::vector<std::string> protected_attributes;
  // Attribute the question asks about, if any ("race" in a race-prediction
  // manifest measured over gender).
  std::optional<std::string> predicted_attribute;
  // Label counted as a positive prediction for selection rates.
  size_t positive_label = 0;
  std::vector<Sample> samples;
  // Generator parameters of a toy manifest.
  std::optional<double> bias_strength;
  std::optional<size_t> content_dim;
  std::optional<uint64_t> seed;

  // Throws ValidationError naming the first offending sample.
  void Validate() const;
  const Sample* Find(const std::string& sample_id) const;

  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest ManifestFromTask(const ToyTask& task, const std::string& name);

DatasetManifest ParseManifest(std::istream& in);
DatasetManifest ReadManifest(const std::filesystem::path& path);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
std::string ManifestToString(const DatasetManifest& manifest);

struct LogHeader {
  std::string manifest;
  std::string model;
  EvalCondition condition;
  uint64_t seed = 0;
  // Samples skipped because they carried no modality payload.
  std::vector<std::string> missing_modality;

  bool operator==(const LogHeader&) const = default;
};

struct PredictionLog {
  LogHeader header;
  std::vector<PredictionRecord> rows;

  bool operator==(const PredictionLog&) const = default;
};

// Parses and validates a log against `manifest`. Errors carry 1-based line
// numbers.
PredictionLog ParsePredictionLog(std::istream& in,
                                 const DatasetManifest& manifest);
PredictionLog IngestExternalLog(const std::filesystem::path& path,
                                const DatasetManifest& manifest);
void WritePredictionLog(const PredictionLog& log,
                        const DatasetManifest& manifest,
                        const std::filesystem::path& path);
std::string PredictionLogToString(const PredictionLog& log,
                                  const DatasetManifest& manifest);

// Source of next-token distributions for samples.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  // Whether the predictor can answer without a modality payload.
  virtual bool NeedsModality() const = 0;
  virtual TokenDistribution Predict(const Sample& sample) const = 0;
};

class ToyModelPredictor : public Predictor {
 public:
  ToyModelPredictor(const ToyModel& model, std::string name,
                    std::optional<ActiveSteering> steering = std::nullopt);

  std::string name() const override { return name_; }
  bool NeedsModality() const override { return true; }
  TokenDistribution Predict(const Sample& sample) const override;

 private:
  const ToyModel& model_;
  std::string name_;
  std::optional<ActiveSteering> steering_;
};

// Replays per-sample token distributions produced elsewhere, e.g. by a real
// model scored outside this toolkit.
class ScoreTablePredictor : public Predictor {
 public:
  ScoreTablePredictor(std::string name,
                      std::map<std::string, TokenDistribution> table);

  std::string name() const override { return name_; }
  bool NeedsModality() const override { return false; }
  TokenDistribution Predict(const Sample& sample) const override;

 private:
  std::string name_;
  std::map<std::string, TokenDistribution> table_;
};

// One prediction per sample. Text-only conditions strip the modality
// payload before the predictor sees the sample; adversarial conditions
// rewrite every sample first. With an image, samples lacking a payload are
// skipped and listed in the header when the predictor needs one.
PredictionLog RunEval(const DatasetManifest& manifest,
                      const Predictor& predictor,
                      const EvalCondition& condition, uint64_t seed);

FairnessReport ComputeReport(const PredictionLog& log,
                             const DatasetManifest& manifest);

// Uniform-guessing report averaged over `runs` runs: scalar metrics,
// selection rates, per-occupation RB and label frequencies are run means;
// the DPR is the mean of the finite per-run values.
FairnessReport RandomBaselineReport(const DatasetManifest& manifest,
                                    size_t runs, uint64_t seed);

// The score a dataset kind is judged by: Macro-F1 for portrait, accuracy
// for pronoun and toy, VLBS / 100 for stereotype.
double PrimaryScore(const FairnessReport& report);
std::string PrimaryScoreName(const std::string& kind);

struct AuditMargins {
  double leakage_margin = 0.10;
  double difficulty_ceiling = 0.95;

  bool operator==(const AuditMargins&) const = default;
};

struct EffectivenessVerdict {
  std::string manifest;
  std::string score;
  double text_only_score = 0.0;
  double with_image_score = 0.0;
  double random_score = 0.0;
  double image_reliance_delta = 0.0;
  // text_only - random > leakage_margin: the prompt gives the answer away.
  bool leakage_flag = false;
  // with_image < difficulty_ceiling: the dataset still challenges the model.
  bool difficulty_flag = false;
  AuditMargins margins;

  bool operator==(const EffectivenessVerdict&) const = default;
};

EffectivenessVerdict AuditEffectiveness(const FairnessReport& text_only,
                                        const FairnessReport& with_image,
                                        const FairnessReport& random,
                                        const AuditMargins& margins = {});

}  // namespace fairsteer

#endif  // FAIRSTEER_HARNESS_H_
