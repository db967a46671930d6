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

#include <algorithm>
#include <limits>
#include <set>

#include "fairsteer/error.h"

namespace fairsteer {

LabelSpace::LabelSpace(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  Require(!labels_.empty(), "label space must not be empty");
  std::set<std::string> seen;
  for (const auto& label : labels_) {
    Require(!label.empty(), "label strings must not be empty");
    Require(seen.insert(label).second, "duplicate label '" + label + "'");
  }
}

std::optional<size_t> LabelSpace::IndexOf(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<size_t>(it - labels_.begin());
}

GroupKey::GroupKey(std::string attribute, std::string value)
    : attribute(std::move(attribute)), value(std::move(value)) {
  Require(!this->attribute.empty() && !this->value.empty(),
          "group attribute and value must be non-empty");
}

DprValue DprValue::Finite(double ratio) {
  Require(ratio >= 0.0 && ratio <= 1.0, "finite DPR must lie in [0, 1]");
  return DprValue(false, ratio);
}

DprValue DprValue::Degenerate() { return DprValue(true, 0.0); }

double DprValue::value() const {
  Require(!degenerate_, "degenerate DPR has no finite value");
  return ratio_;
}

std::string DprValue::ToString() const {
  if (degenerate_) return "inf";
  return std::to_string(ratio_);
}

Gender ParseGender(const std::string& text) {
  if (text == "male") return Gender::kMale;
  if (text == "female") return Gender::kFemale;
  throw ValidationError("unknown gender '" + text +
                        "' (expected male or female)");
}

std::string GenderName(Gender gender) {
  return gender == Gender::kMale ? "male" : "female";
}

Gender OppositeGender(Gender gender) {
  return gender == Gender::kMale ? Gender::kFemale : Gender::kMale;
}

StereotypeRole ParseStereotypeRole(const std::string& text) {
  if (text == "stereotypical") return StereotypeRole::kStereotypical;
  if (text == "anti_stereotypical") return StereotypeRole::kAntiStereotypical;
  if (text == "unrelated") return StereotypeRole::kUnrelated;
  throw ValidationError("unknown stereotype role '" + text + "'");
}

std::string StereotypeRoleName(StereotypeRole role) {
  switch (role) {
    case StereotypeRole::kStereotypical:
      return "stereotypical";
    case StereotypeRole::kAntiStereotypical:
      return "anti_stereotypical";
    case StereotypeRole::kUnrelated:
      return "unrelated";
  }
  return "unrelated";
}

namespace {

void CheckPairedLabels(std::span<const size_t> predictions,
                       std::span<const size_t> golds) {
  Require(predictions.size() == golds.size(),
          "predictions and golds differ in length (" +
              std::to_string(predictions.size()) + " vs " +
              std::to_string(golds.size()) + ")");
  Require(!predictions.empty(), "metric requires at least one sample");
}

}  // namespace

double MacroF1(std::span<const size_t> predictions,
               std::span<const size_t> golds, const LabelSpace& space) {
  CheckPairedLabels(predictions, golds);
  const size_t k = space.size();
  std::vector<size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  for (size_t i = 0; i < predictions.size(); ++i) {
    const size_t p = predictions[i];
    const size_t g = golds[i];
    Require(space.Contains(p) && space.Contains(g),
            "label index out of range at position " + std::to_string(i));
    if (p == g) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  double sum = 0.0;
  for (size_t c = 0; c < k; ++c) {
    const size_t denominator = 2 * tp[c] + fp[c] + fn[c];
    if (denominator == 0) continue;  // absent class scores 0
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denominator);
  }
  return sum / static_cast<double>(k);
}

double Accuracy(std::span<const size_t> predictions,
                std::span<const size_t> golds) {
  CheckPairedLabels(predictions, golds);
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == golds[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::map<GroupKey, double> SelectionRates(std::span<const size_t> predictions,
                                          std::span<const GroupKey> groups,
                                          size_t positive_label) {
  Require(predictions.size() == groups.size(),
          "predictions and groups differ in length");
  Require(!groups.empty(), "selection rates need at least one group");
  std::map<GroupKey, std::pair<size_t, size_t>> counts;  // positives, total
  for (size_t i = 0; i < predictions.size(); ++i) {
    auto& [positives, total] = counts[groups[i]];
    ++total;
    if (predictions[i] == positive_label) ++positives;
  }
  std::map<GroupKey, double> rates;
  for (const auto& [group, count] : counts) {
    rates.emplace(group, static_cast<double>(count.first) /
                             static_cast<double>(count.second));
  }
  return rates;
}

DprValue DemographicParityRatio(const std::map<GroupKey, double>& rates) {
  Require(rates.size() >= 2,
          "demographic parity ratio needs at least two groups");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [group, rate] : rates) {
    Require(rate >= 0.0 && rate <= 1.0,
            "selection rate for " + group.ToString() + " outside [0, 1]");
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }
  if (hi == 0.0) return DprValue::Degenerate();
  return DprValue::Finite(lo / hi);
}

ResolutionBiasResult ResolutionBias(std::span<const PronounRecord> records) {
  struct Tally {
    size_t male_total = 0, male_correct = 0;
    size_t female_total = 0, female_correct = 0;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& record : records) {
    Tally& tally = tallies[record.occupation];
    if (record.subject_gender == Gender::kMale) {
      ++tally.male_total;
      if (record.correct) ++tally.male_correct;
    } else {
      ++tally.female_total;
      if (record.correct) ++tally.female_correct;
    }
  }

  ResolutionBiasResult result;
  double sum = 0.0;
  for (const auto& [occupation, tally] : tallies) {
    if (tally.male_total == 0 || tally.female_total == 0) {
      result.excluded.push_back(occupation);
      continue;
    }
    const double female_accuracy = static_cast<double>(tally.female_correct) /
                                   static_cast<double>(tally.female_total);
    const double male_accuracy = static_cast<double>(tally.male_correct) /
                                 static_cast<double>(tally.male_total);
    const double rb = female_accuracy - male_accuracy;
    result.per_occupation.emplace(occupation, rb);
    sum += rb;
  }
  if (!result.per_occupation.empty()) {
    result.average = sum / static_cast<double>(result.per_occupation.size());
  }
  return result;
}

std::optional<double> Vlbs(std::span<const StereotypeRole> choices) {
  size_t stereotypical = 0;
  size_t anti = 0;
  for (const StereotypeRole role : choices) {
    if (role == StereotypeRole::kStereotypical) ++stereotypical;
    if (role == StereotypeRole::kAntiStereotypical) ++anti;
  }
  if (stereotypical + anti == 0) return std::nullopt;
  return 100.0 * static_cast<double>(stereotypical) /
         static_cast<double>(stereotypical + anti);
}

std::map<std::string, double> LabelFrequencies(
    std::span<const size_t> predictions, const LabelSpace& space) {
  std::map<std::string, double> frequencies;
  for (const auto& label : space.labels()) frequencies[label] = 0.0;
  if (predictions.empty()) return frequencies;
  std::vector<size_t> counts(space.size(), 0);
  for (const size_t p : predictions) {
    Require(space.Contains(p), "label index out of range");
    ++counts[p];
  }
  for (size_t c = 0; c < space.size(); ++c) {
    frequencies[space[c]] = static_cast<double>(counts[c]) /
                            static_cast<double>(predictions.size());
  }
  return frequencies;
}

}  // namespace fairsteer
