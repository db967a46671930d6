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

#ifndef FAIRSTEER_METRICS_H_
#define FAIRSTEER_METRICS_H_

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fairsteer {

// Ordered, non-empty set of unique label strings ("Yes","No" or "A","B",...).
// Predictions and gold labels are indices into this list.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> labels);

  size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::string& operator[](size_t index) const { return labels_[index]; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool Contains(size_t index) const { return index < labels_.size(); }
  std::optional<size_t> IndexOf(const std::string& label) const;

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> labels_;
};

// A (protected attribute, value) pair such as ("gender", "female").
struct GroupKey {
  std::string attribute;
  std::string value;

  GroupKey() = default;
  GroupKey(std::string attribute, std::string value);

  auto operator<=>(const GroupKey&) const = default;
  std::string ToString() const { return attribute + "=" + value; }
};

// Demographic parity ratio. Degenerate when every group has a zero selection
// rate; rendered as "inf" in reports.
class DprValue {
 public:
  static DprValue Finite(double ratio);
  static DprValue Degenerate();

  bool degenerate() const { return degenerate_; }
  // Requires !degenerate().
  double value() const;
  std::string ToString() const;

  bool operator==(const DprValue&) const = default;

 private:
  DprValue(bool degenerate, double ratio)
      : degenerate_(degenerate), ratio_(ratio) {}
  bool degenerate_ = true;
  double ratio_ = 0.0;
};

enum class Gender { kMale, kFemale };

Gender ParseGender(const std::string& text);
std::string GenderName(Gender gender);
Gender OppositeGender(Gender gender);

// One pronoun-resolution outcome.
struct PronounRecord {
  std::string occupation;
  Gender subject_gender;
  bool correct;
};

struct ResolutionBiasResult {
  // accuracy(female) - accuracy(male) for every occupation that has both.
  std::map<std::string, double> per_occupation;
  // Unweighted mean of per_occupation; empty when no occupation qualifies.
  std::optional<double> average;
  // Occupations seen with a single gender only, excluded from the average.
  std::vector<std::string> excluded;
};

enum class StereotypeRole { kStereotypical, kAntiStereotypical, kUnrelated };

StereotypeRole ParseStereotypeRole(const std::string& text);
std::string StereotypeRoleName(StereotypeRole role);

// The metric battery computed over one prediction log.
struct FairnessReport {
  std::string manifest;
  std::string kind;
  size_t n_samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<GroupKey, double> selection_rates;
  std::optional<DprValue> dpr;
  std::map<std::string, double> rb_per_occupation;
  std::optional<double> rb_average;
  // Percentage in [0, 100]; empty when no stereotype/anti-stereotype choice
  // was made.
  std::optional<double> vlbs;
  // Diagnostic: fraction of predictions per label.
  std::map<std::string, double> label_frequencies;
  std::vector<std::string> warnings;

  bool operator==(const FairnessReport&) const = default;
};

// Unweighted mean of per-class F1 over every class of `space`. A class that
// never occurs in either list contributes an F1 of 0.
double MacroF1(std::span<const size_t> predictions,
               std::span<const size_t> golds, const LabelSpace& space);

double Accuracy(std::span<const size_t> predictions,
                std::span<const size_t> golds);

// Fraction of samples predicted `positive_label`, per group.
std::map<GroupKey, double> SelectionRates(std::span<const size_t> predictions,
                                          std::span<const GroupKey> groups,
                                          size_t positive_label);

// min(rate) / max(rate) over at least two groups.
DprValue DemographicParityRatio(const std::map<GroupKey, double>& rates);

ResolutionBiasResult ResolutionBias(std::span<const PronounRecord> records);

// 100 * #stereotypical / (#stereotypical + #anti_stereotypical). Unrelated
// choices do not enter the denominator.
std::optional<double> Vlbs(std::span<const StereotypeRole> choices);

std::map<std::string, double> LabelFrequencies(
    std::span<const size_t> predictions, const LabelSpace& space);

}  // namespace fairsteer

#endif  // FAIRSTEER_METRICS_H_
