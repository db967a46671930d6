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

#include "fairsteer/harness.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <exception>
#include <sstream>
#include <thread>

#include "fairsteer/error.h"
#include "fairsteer/serialization.h"

namespace fairsteer {

ManifestKind ParseManifestKind(const std::string& text) {
  if (text == "portrait") return ManifestKind::kPortrait;
  if (text == "pronoun") return ManifestKind::kPronoun;
  if (text == "stereotype") return ManifestKind::kStereotype;
  if (text == "toy") return ManifestKind::kToy;
  throw ValidationError("unknown manifest kind '" + text + "'");
}

std::string ManifestKindName(ManifestKind kind) {
  switch (kind) {
    case ManifestKind::kPortrait:
      return "portrait";
    case ManifestKind::kPronoun:
      return "pronoun";
    case ManifestKind::kStereotype:
      return "stereotype";
    case ManifestKind::kToy:
      return "toy";
  }
  return "portrait";
}

std::string AgeBin(double age) {
  Require(std::isfinite(age) && age >= 0.0, "age must be a non-negative number");
  if (age < 20.0) return "Child";
  if (age < 40.0) return "Young";
  if (age < 60.0) return "Middle-Aged";
  return "Senior";
}

void DatasetManifest::Validate() const {
  Require(!name.empty(), "manifest name must not be empty");
  Require(!labels.empty(), "manifest label space must not be empty");
  Require(labels.Contains(positive_label), "positive label out of range");
  std::set<std::string> ids;
  for (const auto& sample : samples) {
    ValidateSample(sample);
    Require(ids.insert(sample.id).second,
            "duplicate sample id '" + sample.id + "'");
    Require(sample.label_space == labels,
            "sample '" + sample.id + "' does not use the manifest labels");
    Require(sample.question_type == question_type,
            "sample '" + sample.id + "' has the wrong question type");
  }
}

const Sample* DatasetManifest::Find(const std::string& sample_id) const {
  for (const auto& sample : samples) {
    if (sample.id == sample_id) return &sample;
  }
  return nullptr;
}

DatasetManifest ManifestFromTask(const ToyTask& task, const std::string& name) {
  Require(!task.samples.empty(), "toy task has no samples");
  DatasetManifest manifest;
  manifest.name = name;
  manifest.kind = ManifestKind::kToy;
  manifest.question_type = QuestionType::kMultipleChoice;
  manifest.labels = task.samples.front().label_space;
  manifest.protected_attributes = {"gender"};
  manifest.positive_label = 0;
  manifest.samples = task.samples;
  manifest.bias_strength = task.bias_strength;
  manifest.content_dim = task.content_dim;
  manifest.seed = task.seed;
  return manifest;
}

namespace {

std::string AtLine(size_t line) { return "line " + std::to_string(line) + ": "; }

template <typename F>
auto OnLine(size_t line, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(AtLine(line) + e.what());
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw ValidationError(AtLine(line) + what);
  }
}

// Yields (line number, text) for every non-blank line.
std::vector<std::pair<size_t, std::string>> ReadLines(std::istream& in) {
  std::vector<std::pair<size_t, std::string>> lines;
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.emplace_back(number, line);
  }
  return lines;
}

size_t ParseLabel(const Json& value, const LabelSpace& labels,
                  const std::string& what) {
  if (value.is_string()) {
    const auto index = labels.IndexOf(value.get<std::string>());
    Require(index.has_value(),
            what + " '" + value.get<std::string>() + "' is not in the label space");
    return *index;
  }
  Require(value.is_number_unsigned(), what + " must be a label or an index");
  const auto index = value.get<size_t>();
  Require(labels.Contains(index), what + " index out of range");
  return index;
}

Json SampleToJson(const Sample& sample) {
  Json json;
  json["id"] = sample.id;
  json["question"] = sample.question;
  json["gold"] = sample.label_space[sample.gold];
  json["options"] = sample.option_texts;
  json["groups"] = Json::object();
  for (const auto& [attribute, value] : sample.groups) {
    json["groups"][attribute] = value;
  }
  if (sample.occupation) json["occupation"] = *sample.occupation;
  if (sample.stereotype_roles) {
    Json roles = Json::object();
    for (const auto& [index, role] : *sample.stereotype_roles) {
      roles[sample.label_space[index]] = StereotypeRoleName(role);
    }
    json["stereotype_roles"] = roles;
  }
  if (sample.modality) json["modality"] = *sample.modality;
  if (sample.adversarial_meta) {
    Json meta;
    meta["subject_gender"] = GenderName(sample.adversarial_meta->subject_gender);
    if (sample.adversarial_meta->other_gender) {
      meta["other_gender"] = GenderName(*sample.adversarial_meta->other_gender);
    }
    json["adversarial_meta"] = meta;
  }
  if (sample.adversarial) json["adversarial"] = true;
  return json;
}

Sample SampleFromJson(const Json& json, const DatasetManifest& manifest) {
  Sample sample;
  sample.id = json.at("id").get<std::string>();
  sample.question = json.at("question").get<std::string>();
  sample.label_space = manifest.labels;
  sample.question_type = manifest.question_type;
  sample.gold = ParseLabel(json.at("gold"), manifest.labels, "gold");
  sample.option_texts =
      json.value("options", std::vector<std::string>{});
  if (json.contains("groups")) {
    for (const auto& [attribute, value] : json.at("groups").items()) {
      sample.groups[attribute] = value.get<std::string>();
    }
  }
  if (json.contains("occupation") && !json.at("occupation").is_null()) {
    sample.occupation = json.at("occupation").get<std::string>();
  }
  if (json.contains("stereotype_roles") && !json.at("stereotype_roles").is_null()) {
    std::map<size_t, StereotypeRole> roles;
    for (const auto& [label, role] : json.at("stereotype_roles").items()) {
      const auto index = manifest.labels.IndexOf(label);
      Require(index.has_value(),
              "stereotype role for unknown label '" + label + "'");
      roles[*index] = ParseStereotypeRole(role.get<std::string>());
    }
    sample.stereotype_roles = std::move(roles);
  }
  if (json.contains("modality") && !json.at("modality").is_null()) {
    sample.modality = json.at("modality").get<std::vector<double>>();
  }
  if (json.contains("adversarial_meta") && !json.at("adversarial_meta").is_null()) {
    const Json& meta = json.at("adversarial_meta");
    AdversarialMeta parsed;
    parsed.subject_gender = ParseGender(meta.at("subject_gender").get<std::string>());
    if (meta.contains("other_gender") && !meta.at("other_gender").is_null()) {
      parsed.other_gender = ParseGender(meta.at("other_gender").get<std::string>());
    }
    sample.adversarial_meta = parsed;
  }
  sample.adversarial = json.value("adversarial", false);
  ValidateSample(sample);
  return sample;
}

}  // namespace

std::string ManifestToString(const DatasetManifest& manifest) {
  Json header;
  header["name"] = manifest.name;
  header["kind"] = ManifestKindName(manifest.kind);
  header["question_type"] = QuestionTypeName(manifest.question_type);
  header["labels"] = manifest.labels.labels();
  Json attributes;
  attributes["protected"] = manifest.protected_attributes;
  if (manifest.predicted_attribute) {
    attributes["predicted"] = *manifest.predicted_attribute;
  }
  header["attributes"] = attributes;
  header["positive_label"] = manifest.labels[manifest.positive_label];
  if (manifest.bias_strength || manifest.content_dim || manifest.seed) {
    Json toy;
    if (manifest.bias_strength) toy["bias_strength"] = *manifest.bias_strength;
    if (manifest.content_dim) toy["content_dim"] = *manifest.content_dim;
    if (manifest.seed) toy["seed"] = *manifest.seed;
    header["toy"] = toy;
  }
  std::string out = header.dump() + "\n";
  for (const auto& sample : manifest.samples) {
    out += SampleToJson(sample).dump() + "\n";
  }
  return out;
}

DatasetManifest ParseManifest(std::istream& in) {
  const auto lines = ReadLines(in);
  Require(!lines.empty(), "manifest is empty");
  DatasetManifest manifest;
  OnLine(lines.front().first, [&] {
    const Json header = Json::parse(lines.front().second);
    manifest.name = header.at("name").get<std::string>();
    manifest.kind = ParseManifestKind(header.at("kind").get<std::string>());
    manifest.question_type =
        ParseQuestionType(header.at("question_type").get<std::string>());
    manifest.labels =
        LabelSpace(header.at("labels").get<std::vector<std::string>>());
    if (header.contains("attributes")) {
      const Json& attributes = header.at("attributes");
      manifest.protected_attributes =
          attributes.value("protected", std::vector<std::string>{});
      if (attributes.contains("predicted") &&
          !attributes.at("predicted").is_null()) {
        manifest.predicted_attribute =
            attributes.at("predicted").get<std::string>();
      }
    }
    if (header.contains("positive_label")) {
      manifest.positive_label =
          ParseLabel(header.at("positive_label"), manifest.labels,
                     "positive_label");
    }
    if (header.contains("toy")) {
      const Json& toy = header.at("toy");
      if (toy.contains("bias_strength")) {
        manifest.bias_strength = toy.at("bias_strength").get<double>();
      }
      if (toy.contains("content_dim")) {
        manifest.content_dim = toy.at("content_dim").get<size_t>();
      }
      if (toy.contains("seed")) manifest.seed = toy.at("seed").get<uint64_t>();
    }
    return 0;
  });
  std::set<std::string> ids;
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto& [number, text] = lines[i];
    manifest.samples.push_back(OnLine(number, [&] {
      Sample sample = SampleFromJson(Json::parse(text), manifest);
      Require(ids.insert(sample.id).second,
              "duplicate sample id '" + sample.id + "'");
      return sample;
    }));
  }
  manifest.Validate();
  return manifest;
}

DatasetManifest ReadManifest(const std::filesystem::path& path) {
  std::istringstream in(ReadTextFile(path));
  return ParseManifest(in);
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  WriteTextFile(path, ManifestToString(manifest));
}

std::string PredictionLogToString(const PredictionLog& log,
                                  const DatasetManifest& manifest) {
  Json header;
  header["manifest"] = log.header.manifest;
  header["model"] = log.header.model;
  Json condition;
  condition["with_image"] = log.header.condition.with_image;
  condition["adversarial"] = log.header.condition.adversarial;
  condition["steering"] = log.header.condition.steering
                              ? Json(*log.header.condition.steering)
                              : Json(nullptr);
  header["condition"] = condition;
  header["seed"] = log.header.seed;
  if (!log.header.missing_modality.empty()) {
    header["missing_modality"] = log.header.missing_modality;
  }
  std::string out = header.dump() + "\n";
  for (const auto& record : log.rows) {
    Json row;
    row["sample_id"] = record.sample_id;
    row["predicted"] = manifest.labels[record.predicted];
    row["restricted_probs"] = Json::object();
    for (const auto& label : manifest.labels.labels()) {
      const auto it = record.restricted_probs.find(label);
      if (it != record.restricted_probs.end()) {
        row["restricted_probs"][label] = it->second;
      }
    }
    out += row.dump() + "\n";
  }
  return out;
}

void WritePredictionLog(const PredictionLog& log,
                        const DatasetManifest& manifest,
                        const std::filesystem::path& path) {
  WriteTextFile(path, PredictionLogToString(log, manifest));
}

PredictionLog ParsePredictionLog(std::istream& in,
                                 const DatasetManifest& manifest) {
  const auto lines = ReadLines(in);
  Require(!lines.empty(), "prediction log is empty");
  PredictionLog log;
  OnLine(lines.front().first, [&] {
    const Json header = Json::parse(lines.front().second);
    log.header.manifest = header.at("manifest").get<std::string>();
    Require(log.header.manifest == manifest.name,
            "log belongs to manifest '" + log.header.manifest +
                "', not '" + manifest.name + "'");
    log.header.model = header.value("model", "");
    if (header.contains("condition")) {
      const Json& condition = header.at("condition");
      log.header.condition.with_image = condition.value("with_image", true);
      log.header.condition.adversarial = condition.value("adversarial", false);
      if (condition.contains("steering") && !condition.at("steering").is_null()) {
        log.header.condition.steering = condition.at("steering").get<std::string>();
      }
    }
    log.header.seed = header.value("seed", uint64_t{0});
    log.header.missing_modality =
        header.value("missing_modality", std::vector<std::string>{});
    return 0;
  });

  std::map<std::string, size_t> first_seen;
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto& [number, text] = lines[i];
    log.rows.push_back(OnLine(number, [&] {
      const Json row = Json::parse(text);
      Require(row.is_object(), "row must be a JSON object");
      PredictionRecord record;
      record.sample_id = row.at("sample_id").get<std::string>();
      const Sample* sample = manifest.Find(record.sample_id);
      Require(sample != nullptr,
              "unknown sample_id '" + record.sample_id + "'");
      const auto [it, inserted] = first_seen.emplace(record.sample_id, number);
      Require(inserted, "duplicate sample_id '" + record.sample_id +
                            "' (first seen on line " +
                            std::to_string(it->second) + ")");
      TokenDistribution dist;
      if (row.contains("restricted_probs")) {
        for (const auto& [label, p] : row.at("restricted_probs").items()) {
          Require(p.is_number() && p.get<double>() >= 0.0,
                  "probability for '" + label + "' must be a non-negative number");
          dist.probabilities[label] = p.get<double>();
        }
      }
      record.restricted_probs = RestrictToLabels(dist, manifest.labels);
      if (row.contains("predicted") && !row.at("predicted").is_null()) {
        record.predicted = ParseLabel(row.at("predicted"), manifest.labels,
                                      "predicted");
      } else {
        Require(row.contains("restricted_probs"),
                "row needs 'predicted' or 'restricted_probs'");
        record.predicted = ConstrainedArgmax(dist, manifest.labels);
      }
      record.condition = log.header.condition;
      return record;
    }));
  }
  return log;
}

PredictionLog IngestExternalLog(const std::filesystem::path& path,
                                const DatasetManifest& manifest) {
  std::istringstream in(ReadTextFile(path));
  return ParsePredictionLog(in, manifest);
}

ToyModelPredictor::ToyModelPredictor(const ToyModel& model, std::string name,
                                     std::optional<ActiveSteering> steering)
    : model_(model), name_(std::move(name)), steering_(std::move(steering)) {}

TokenDistribution ToyModelPredictor::Predict(const Sample& sample) const {
  return Forward(model_, sample, steering_);
}

ScoreTablePredictor::ScoreTablePredictor(
    std::string name, std::map<std::string, TokenDistribution> table)
    : name_(std::move(name)), table_(std::move(table)) {}

TokenDistribution ScoreTablePredictor::Predict(const Sample& sample) const {
  const auto it = table_.find(sample.id);
  Require(it != table_.end(),
          "no scores recorded for sample '" + sample.id + "'");
  return it->second;
}

PredictionLog RunEval(const DatasetManifest& manifest,
                      const Predictor& predictor,
                      const EvalCondition& condition, uint64_t seed) {
  manifest.Validate();
  PredictionLog log;
  log.header.manifest = manifest.name;
  log.header.model = predictor.name();
  log.header.condition = condition;
  log.header.seed = seed;
  if (!manifest.samples.empty() &&
      std::all_of(manifest.samples.begin(), manifest.samples.end(),
                  [](const Sample& s) { return s.adversarial; })) {
    log.header.condition.adversarial = true;
  }

  std::vector<Sample> prepared;
  prepared.reserve(manifest.samples.size());
  for (const auto& original : manifest.samples) {
    Sample sample = condition.adversarial && !original.adversarial
                        ? Adversarialize(original)
                        : original;
    if (!condition.with_image) {
      sample.modality.reset();
    } else if (!sample.modality && predictor.NeedsModality()) {
      log.header.missing_modality.push_back(sample.id);
      continue;
    }
    prepared.push_back(std::move(sample));
  }

  // Workers fill disjoint slots; rows stay in manifest order.
  std::vector<PredictionRecord> rows(prepared.size());
  std::vector<std::exception_ptr> failures(prepared.size());
  const size_t workers = std::clamp<size_t>(
      std::thread::hardware_concurrency(), 1, std::max<size_t>(1, prepared.size() / 64));
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < prepared.size(); i += workers) {
        try {
          const TokenDistribution dist = predictor.Predict(prepared[i]);
          rows[i].sample_id = prepared[i].id;
          rows[i].condition = log.header.condition;
          rows[i].restricted_probs = RestrictToLabels(dist, manifest.labels);
          rows[i].predicted = ConstrainedArgmax(dist, manifest.labels);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  log.rows = std::move(rows);
  return log;
}

namespace {

bool IsTie(const std::map<std::string, double>& probs) {
  if (probs.size() < 2) return false;
  double best = -1.0;
  size_t count = 0;
  for (const auto& [label, p] : probs) {
    if (p > best) {
      best = p;
      count = 1;
    } else if (p == best) {
      ++count;
    }
  }
  return count > 1;
}

void AddSelectionMetrics(const DatasetManifest& manifest,
                         const std::vector<const Sample*>& samples,
                         const std::vector<size_t>& predictions,
                         FairnessReport& report) {
  if (manifest.protected_attributes.empty()) {
    report.warnings.push_back(
        "no protected attribute declared; selection rates and DPR skipped");
    return;
  }
  for (size_t a = 0; a < manifest.protected_attributes.size(); ++a) {
    const std::string& attribute = manifest.protected_attributes[a];
    std::vector<size_t> preds;
    std::vector<GroupKey> groups;
    for (size_t i = 0; i < samples.size(); ++i) {
      const auto it = samples[i]->groups.find(attribute);
      if (it == samples[i]->groups.end()) continue;
      preds.push_back(predictions[i]);
      groups.emplace_back(attribute, it->second);
    }
    if (groups.empty()) {
      report.warnings.push_back("no sample carries protected attribute '" +
                                attribute + "'");
      continue;
    }
    const auto rates = SelectionRates(preds, groups, manifest.positive_label);
    report.selection_rates.insert(rates.begin(), rates.end());
    if (a == 0) {
      if (rates.size() >= 2) {
        report.dpr = DemographicParityRatio(rates);
      } else {
        report.warnings.push_back("protected attribute '" + attribute +
                                  "' has a single group; DPR skipped");
      }
    }
  }
}

void AddResolutionBias(const std::vector<const Sample*>& samples,
                       const std::vector<size_t>& predictions,
                       FairnessReport& report) {
  std::vector<PronounRecord> records;
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& sample = *samples[i];
    const auto gender = sample.groups.find("gender");
    if (!sample.occupation || gender == sample.groups.end()) continue;
    records.push_back(PronounRecord{*sample.occupation,
                                    ParseGender(gender->second),
                                    predictions[i] == sample.gold});
  }
  if (records.empty()) {
    report.warnings.push_back(
        "no sample has both an occupation and a gender; RB skipped");
    return;
  }
  ResolutionBiasResult rb = ResolutionBias(records);
  report.rb_per_occupation = std::move(rb.per_occupation);
  report.rb_average = rb.average;
  for (const auto& occupation : rb.excluded) {
    report.warnings.push_back("occupation '" + occupation +
                              "' has a single gender; excluded from RB");
  }
}

void AddVlbs(const std::vector<const Sample*>& samples,
             const std::vector<size_t>& predictions, FairnessReport& report) {
  std::vector<StereotypeRole> choices;
  size_t unassigned = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& roles = samples[i]->stereotype_roles;
    if (roles && roles->contains(predictions[i])) {
      choices.push_back(roles->at(predictions[i]));
    } else {
      ++unassigned;
      choices.push_back(StereotypeRole::kUnrelated);
    }
  }
  if (unassigned > 0) {
    report.warnings.push_back(std::to_string(unassigned) +
                              " predictions have no stereotype role; counted "
                              "as unrelated");
  }
  report.vlbs = Vlbs(choices);
  if (!report.vlbs) {
    report.warnings.push_back(
        "no stereotypical or anti-stereotypical choice made; VLBS undefined");
  }
}

}  // namespace

FairnessReport ComputeReport(const PredictionLog& log,
                             const DatasetManifest& manifest) {
  Require(log.header.manifest == manifest.name,
          "log belongs to manifest '" + log.header.manifest + "', not '" +
              manifest.name + "'");
  Require(!log.rows.empty(), "prediction log has no rows");

  FairnessReport report;
  report.manifest = manifest.name;
  report.kind = ManifestKindName(manifest.kind);
  report.n_samples = log.rows.size();

  std::vector<const Sample*> samples;
  std::vector<size_t> predictions, golds;
  std::set<std::string> seen;
  size_t ties = 0;
  for (const auto& record : log.rows) {
    const Sample* sample = manifest.Find(record.sample_id);
    Require(sample != nullptr,
            "log row refers to unknown sample '" + record.sample_id + "'");
    Require(seen.insert(record.sample_id).second,
            "log has two rows for sample '" + record.sample_id + "'");
    Require(manifest.labels.Contains(record.predicted),
            "prediction out of range for sample '" + record.sample_id + "'");
    samples.push_back(sample);
    predictions.push_back(record.predicted);
    golds.push_back(sample->gold);
    if (IsTie(record.restricted_probs)) ++ties;
  }

  report.accuracy = Accuracy(predictions, golds);
  report.macro_f1 = MacroF1(predictions, golds, manifest.labels);
  report.label_frequencies = LabelFrequencies(predictions, manifest.labels);

  if (ties > 0) {
    report.warnings.push_back(std::to_string(ties) +
                              " predictions were ties broken by lowest label "
                              "index");
  }
  if (!log.header.missing_modality.empty()) {
    report.warnings.push_back(std::to_string(log.header.missing_modality.size()) +
                              " samples excluded: no modality payload");
  }
  const size_t skipped = seen.size() + log.header.missing_modality.size();
  const size_t unanswered =
      manifest.samples.size() > skipped ? manifest.samples.size() - skipped : 0;
  if (unanswered > 0) {
    report.warnings.push_back(std::to_string(unanswered) +
                              " manifest samples have no prediction");
  }

  switch (manifest.kind) {
    case ManifestKind::kPortrait:
      AddSelectionMetrics(manifest, samples, predictions, report);
      break;
    case ManifestKind::kPronoun:
      AddResolutionBias(samples, predictions, report);
      break;
    case ManifestKind::kStereotype:
      AddVlbs(samples, predictions, report);
      break;
    case ManifestKind::kToy:
      AddSelectionMetrics(manifest, samples, predictions, report);
      AddResolutionBias(samples, predictions, report);
      break;
  }
  return report;
}

FairnessReport RandomBaselineReport(const DatasetManifest& manifest,
                                    size_t runs, uint64_t seed) {
  Require(runs >= 1, "random baseline needs at least one run");
  Require(!manifest.samples.empty(), "manifest has no samples");

  FairnessReport mean;
  double dpr_sum = 0.0, rb_sum = 0.0, vlbs_sum = 0.0;
  size_t dpr_runs = 0, dpr_seen = 0, rb_runs = 0, vlbs_runs = 0;
  const double inv_runs = 1.0 / static_cast<double>(runs);

  for (size_t run = 0; run < runs; ++run) {
    const auto predictions = RandomPredictions(
        manifest.labels.size(), manifest.samples.size(), seed, run);
    PredictionLog log;
    log.header.manifest = manifest.name;
    log.header.model = "random";
    log.header.seed = seed;
    for (size_t i = 0; i < manifest.samples.size(); ++i) {
      PredictionRecord record;
      record.sample_id = manifest.samples[i].id;
      record.predicted = predictions[i];
      for (size_t c = 0; c < manifest.labels.size(); ++c) {
        record.restricted_probs[manifest.labels[c]] = c == predictions[i] ? 1.0 : 0.0;
      }
      log.rows.push_back(std::move(record));
    }
    const FairnessReport report = ComputeReport(log, manifest);
    if (run == 0) {
      mean.manifest = report.manifest;
      mean.kind = report.kind;
      mean.n_samples = report.n_samples;
      mean.warnings = report.warnings;
    }
    mean.accuracy += report.accuracy;
    mean.macro_f1 += report.macro_f1;
    for (const auto& [group, rate] : report.selection_rates) {
      mean.selection_rates[group] += rate * inv_runs;
    }
    if (report.dpr) {
      ++dpr_seen;
      if (!report.dpr->degenerate()) {
        dpr_sum += report.dpr->value();
        ++dpr_runs;
      }
    }
    for (const auto& [occupation, rb] : report.rb_per_occupation) {
      mean.rb_per_occupation[occupation] += rb * inv_runs;
    }
    if (report.rb_average) {
      rb_sum += *report.rb_average;
      ++rb_runs;
    }
    if (report.vlbs) {
      vlbs_sum += *report.vlbs;
      ++vlbs_runs;
    }
    for (const auto& [label, frequency] : report.label_frequencies) {
      mean.label_frequencies[label] += frequency * inv_runs;
    }
  }
  mean.accuracy /= static_cast<double>(runs);
  mean.macro_f1 /= static_cast<double>(runs);
  if (dpr_seen > 0) {
    mean.dpr = dpr_runs > 0
                   ? DprValue::Finite(std::clamp(
                         dpr_sum / static_cast<double>(dpr_runs), 0.0, 1.0))
                   : DprValue::Degenerate();
  }
  if (rb_runs > 0) mean.rb_average = rb_sum / static_cast<double>(rb_runs);
  if (vlbs_runs > 0) mean.vlbs = vlbs_sum / static_cast<double>(vlbs_runs);
  mean.warnings.push_back("uniform random baseline averaged over " +
                          std::to_string(runs) + " runs");
  return mean;
}

double PrimaryScore(const FairnessReport& report) {
  const ManifestKind kind = ParseManifestKind(report.kind);
  switch (kind) {
    case ManifestKind::kPortrait:
      return report.macro_f1;
    case ManifestKind::kStereotype:
      Require(report.vlbs.has_value(),
              "stereotype report for '" + report.manifest +
                  "' has no VLBS to audit");
      return *report.vlbs / 100.0;
    case ManifestKind::kPronoun:
    case ManifestKind::kToy:
      return report.accuracy;
  }
  return report.accuracy;
}

std::string PrimaryScoreName(const std::string& kind) {
  switch (ParseManifestKind(kind)) {
    case ManifestKind::kPortrait:
      return "macro_f1";
    case ManifestKind::kStereotype:
      return "vlbs_fraction";
    case ManifestKind::kPronoun:
    case ManifestKind::kToy:
      return "accuracy";
  }
  return "accuracy";
}

EffectivenessVerdict AuditEffectiveness(const FairnessReport& text_only,
                                        const FairnessReport& with_image,
                                        const FairnessReport& random,
                                        const AuditMargins& margins) {
  Require(text_only.manifest == with_image.manifest &&
              text_only.manifest == random.manifest,
          "audit reports come from different manifests");
  Require(text_only.kind == with_image.kind && text_only.kind == random.kind,
          "audit reports disagree on the manifest kind");
  EffectivenessVerdict verdict;
  verdict.manifest = text_only.manifest;
  verdict.score = PrimaryScoreName(text_only.kind);
  verdict.text_only_score = PrimaryScore(text_only);
  verdict.with_image_score = PrimaryScore(with_image);
  verdict.random_score = PrimaryScore(random);
  verdict.image_reliance_delta =
      verdict.with_image_score - verdict.text_only_score;
  verdict.leakage_flag =
      verdict.text_only_score - verdict.random_score > margins.leakage_margin;
  verdict.difficulty_flag = verdict.with_image_score < margins.difficulty_ceiling;
  verdict.margins = margins;
  return verdict;
}

}  // namespace fairsteer
