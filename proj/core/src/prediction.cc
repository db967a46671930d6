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

#include "fairsteer/prediction.h"

#include <random>

#include "fairsteer/error.h"

namespace fairsteer {

QuestionType ParseQuestionType(const std::string& text) {
  if (text == "binary") return QuestionType::kBinary;
  if (text == "mcq") return QuestionType::kMultipleChoice;
  throw ValidationError("unknown question_type '" + text +
                        "' (expected binary or mcq)");
}

std::string QuestionTypeName(QuestionType type) {
  return type == QuestionType::kBinary ? "binary" : "mcq";
}

void ValidateSample(const Sample& sample) {
  const std::string where = "sample '" + sample.id + "': ";
  Require(!sample.id.empty(), "sample id must not be empty");
  Require(!sample.label_space.empty(), where + "empty label space");
  Require(sample.label_space.Contains(sample.gold),
          where + "gold label index out of range");
  if (sample.question_type == QuestionType::kBinary) {
    Require(sample.label_space.labels() ==
                std::vector<std::string>{"Yes", "No"},
            where + "binary questions use the label space {Yes, No}");
  } else {
    Require(sample.option_texts.size() == sample.label_space.size(),
            where + "option count must match the label space");
  }
  if (sample.stereotype_roles) {
    for (const auto& [index, role] : *sample.stereotype_roles) {
      Require(sample.label_space.Contains(index),
              where + "stereotype role refers to an unknown option");
    }
  }
  for (const auto& [attribute, value] : sample.groups) {
    Require(!attribute.empty() && !value.empty(),
            where + "group attributes and values must be non-empty");
  }
}

std::string RenderPrompt(const Sample& sample) {
  if (sample.question_type == QuestionType::kBinary) {
    return sample.question + " " + std::string(kBinarySuffix);
  }
  Require(!sample.option_texts.empty(),
          "multiple-choice sample '" + sample.id + "' has no options");
  Require(sample.option_texts.size() <= 26,
          "multiple-choice sample '" + sample.id +
              "' has more than 26 options");
  std::string prompt = sample.question;
  for (size_t i = 0; i < sample.option_texts.size(); ++i) {
    prompt += '\n';
    prompt += static_cast<char>('A' + i);
    prompt += ". ";
    prompt += sample.option_texts[i];
  }
  prompt += '\n';
  prompt += kMultipleChoiceSuffix;
  return prompt;
}

std::map<std::string, double> RestrictToLabels(const TokenDistribution& dist,
                                               const LabelSpace& space) {
  std::map<std::string, double> restricted;
  for (const auto& label : space.labels()) {
    const auto it = dist.probabilities.find(label);
    const double p = it == dist.probabilities.end() ? 0.0 : it->second;
    Require(p >= 0.0, "negative probability for token '" + label + "'");
    restricted.emplace(label, p);
  }
  return restricted;
}

size_t ConstrainedArgmax(const TokenDistribution& dist,
                         const LabelSpace& space) {
  Require(!space.empty(), "constrained argmax over an empty label space");
  size_t best = 0;
  double best_p = -1.0;
  for (size_t i = 0; i < space.size(); ++i) {
    const auto it = dist.probabilities.find(space[i]);
    const double p = it == dist.probabilities.end() ? 0.0 : it->second;
    Require(p >= 0.0, "negative probability for token '" + space[i] + "'");
    if (p > best_p) {
      best = i;
      best_p = p;
    }
  }
  return best;
}

std::vector<size_t> RandomPredictions(size_t label_count, size_t count,
                                      uint64_t seed, uint64_t run) {
  Require(label_count >= 1, "random predictions need a label");
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(run), static_cast<uint32_t>(run >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<size_t> pick(0, label_count - 1);
  std::vector<size_t> predictions(count);
  for (auto& p : predictions) p = pick(rng);
  return predictions;
}

double RandomBaseline(const LabelSpace& space, std::span<const size_t> golds,
                      size_t runs, uint64_t seed) {
  Require(runs >= 1, "random baseline needs at least one run");
  Require(!golds.empty(), "random baseline needs gold labels");
  for (const size_t g : golds) {
    Require(space.Contains(g), "gold label index out of range");
  }
  double total = 0.0;
  for (size_t run = 0; run < runs; ++run) {
    const auto predictions =
        RandomPredictions(space.size(), golds.size(), seed, run);
    total += Accuracy(predictions, golds);
  }
  return total / static_cast<double>(runs);
}

std::string GenderNoun(Gender gender) {
  return gender == Gender::kMale ? "man" : "woman";
}

Sample Adversarialize(const Sample& sample) {
  Require(sample.adversarial_meta.has_value(),
          "sample '" + sample.id + "' has no adversarial_meta");
  Require(!sample.adversarial,
          "sample '" + sample.id + "' is already adversarial");
  Require(sample.question_type == QuestionType::kMultipleChoice &&
              sample.question == kCaptionQuestion,
          "sample '" + sample.id +
              "': adversarial rewriting only supports the caption question");
  const AdversarialMeta& meta = *sample.adversarial_meta;

  // Drop the trailing '?' and describe the wrong genders.
  std::string question(kCaptionQuestion.substr(0, kCaptionQuestion.size() - 1));
  question += " of a " + GenderNoun(OppositeGender(meta.subject_gender));
  if (meta.other_gender) {
    question += " helping a " + GenderNoun(OppositeGender(*meta.other_gender));
  }
  question += "?";

  Sample out = sample;
  out.question = std::move(question);
  out.adversarial = true;
  return out;
}

}  // namespace fairsteer
