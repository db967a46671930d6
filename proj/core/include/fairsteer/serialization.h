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

#ifndef FAIRSTEER_SERIALIZATION_H_
#define FAIRSTEER_SERIALIZATION_H_

#include <filesystem>
#include <istream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "fairsteer/harness.h"
#include "fairsteer/metrics.h"
#include "fairsteer/sae.h"
#include "fairsteer/steering.h"
#include "fairsteer/toymodel.h"

namespace fairsteer {

// Keys keep insertion order so serialized output is byte-stable.
using Json = nlohmann::ordered_json;

// Shortest decimal form that parses back to the same double.
std::string FormatNumber(double value);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path,
                   const std::string& content);

// FairnessReport. A degenerate DPR is the string "inf"; metrics that were
// not computed are null.
Json ReportToJson(const FairnessReport& report);
FairnessReport ReportFromJson(const Json& json);
// Columns: metric,key,value. One row per scalar metric and per
// (metric, group/occupation/label) pair.
std::string ReportToCsv(const FairnessReport& report);

Json VerdictToJson(const EffectivenessVerdict& verdict);
EffectivenessVerdict VerdictFromJson(const Json& json);
std::string VerdictToCsv(const EffectivenessVerdict& verdict);

// {method, feature, coefficient, threshold, layer, clamp_semantics}.
Json SteeringConfigToJson(const SteeringConfig& config);
SteeringConfig SteeringConfigFromJson(const Json& json);

// One JSON row per ranked entry: {rank, index, config, report | error}.
std::string SweepToJsonl(std::span<const SweepEntry> entries);
// Columns: rank,index,method,feature,coefficient,threshold,layer,
// clamp_semantics,accuracy,rb_average,macro_f1,dpr,vlbs,error.
std::string SweepToCsv(std::span<const SweepEntry> entries);

// Binary layout, little-endian: "FSAE", u32 version (1), u64 m, u64 n, then
// f64 w_enc (m x n, row-major), b_enc (m), w_dec (n x m, row-major),
// b_dec (n).
std::string SaeToBinary(const SaeParams& params);
SaeParams SaeFromBinary(const std::string& bytes);
// {format, m, n, w_enc, b_enc, w_dec, b_dec}; matrices flattened row-major.
Json SaeToJson(const SaeParams& params);
SaeParams SaeFromJson(const Json& json);
// ".json" paths use JSON, anything else the binary layout.
void WriteSae(const SaeParams& params, const std::filesystem::path& path);
// Detects the format from the content.
SaeParams ReadSae(const std::filesystem::path& path);

// JSONL rows {feature, description, layer, location}.
std::string RegistryToJsonl(const FeatureRegistry& registry);
FeatureRegistry ParseRegistry(std::istream& in);

// {format, dims, labels, tensors: {name: {rows, cols, data}}}.
Json ToyModelToJson(const ToyModel& model);
ToyModel ToyModelFromJson(const Json& json);
void WriteToyModel(const ToyModel& model, const std::filesystem::path& path);
ToyModel ReadToyModel(const std::filesystem::path& path);

}  // namespace fairsteer

#endif  // FAIRSTEER_SERIALIZATION_H_
