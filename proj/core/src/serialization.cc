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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fairsteer/error.h"

namespace fairsteer {

namespace {

template <typename F>
auto Guard(const std::string& what, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

Json OptionalNumber(const std::optional<double>& value) {
  return value ? Json(*value) : Json(nullptr);
}

std::optional<double> ReadOptionalNumber(const Json& json, const char* key) {
  if (!json.contains(key) || json.at(key).is_null()) return std::nullopt;
  return json.at(key).get<double>();
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (const char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

Json FlattenRowMajor(const Matrix& matrix) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) data.push_back(matrix(i, j));
  }
  return data;
}

Matrix UnflattenRowMajor(const Json& data, Eigen::Index rows,
                         Eigen::Index cols, const std::string& name) {
  Require(data.is_array() &&
              data.size() == static_cast<size_t>(rows * cols),
          "tensor '" + name + "' has " + std::to_string(data.size()) +
              " entries, expected " + std::to_string(rows * cols));
  Matrix matrix(rows, cols);
  size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) matrix(i, j) = data[k++].get<double>();
  }
  return matrix;
}

}  // namespace

std::string FormatNumber(double value) { return Json(value).dump(); }

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return buffer.str();
}

void WriteTextFile(const std::filesystem::path& path,
                   const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Json ReportToJson(const FairnessReport& report) {
  Json json;
  json["type"] = "fairness_report";
  json["manifest"] = report.manifest;
  json["kind"] = report.kind;
  json["n_samples"] = report.n_samples;
  json["accuracy"] = report.accuracy;
  json["macro_f1"] = report.macro_f1;
  Json rates = Json::object();
  for (const auto& [group, rate] : report.selection_rates) {
    rates[group.attribute][group.value] = rate;
  }
  json["selection_rates"] = rates;
  if (!report.dpr) {
    json["dpr"] = nullptr;
  } else if (report.dpr->degenerate()) {
    json["dpr"] = "inf";
  } else {
    json["dpr"] = report.dpr->value();
  }
  json["rb_per_occupation"] = Json::object();
  for (const auto& [occupation, rb] : report.rb_per_occupation) {
    json["rb_per_occupation"][occupation] = rb;
  }
  json["rb_average"] = OptionalNumber(report.rb_average);
  json["vlbs"] = OptionalNumber(report.vlbs);
  json["label_frequencies"] = Json::object();
  for (const auto& [label, frequency] : report.label_frequencies) {
    json["label_frequencies"][label] = frequency;
  }
  json["warnings"] = report.warnings;
  return json;
}

FairnessReport ReportFromJson(const Json& json) {
  return Guard("malformed fairness report", [&] {
    Require(json.value("type", "") == "fairness_report",
            "not a fairness report (missing type)");
    FairnessReport report;
    report.manifest = json.at("manifest").get<std::string>();
    report.kind = json.at("kind").get<std::string>();
    report.n_samples = json.at("n_samples").get<size_t>();
    report.accuracy = json.at("accuracy").get<double>();
    report.macro_f1 = json.at("macro_f1").get<double>();
    for (const auto& [attribute, values] : json.at("selection_rates").items()) {
      for (const auto& [value, rate] : values.items()) {
        report.selection_rates.emplace(GroupKey(attribute, value),
                                       rate.get<double>());
      }
    }
    const Json& dpr = json.at("dpr");
    if (dpr.is_string()) {
      Require(dpr.get<std::string>() == "inf", "dpr string must be \"inf\"");
      report.dpr = DprValue::Degenerate();
    } else if (!dpr.is_null()) {
      report.dpr = DprValue::Finite(dpr.get<double>());
    }
    for (const auto& [occupation, rb] : json.at("rb_per_occupation").items()) {
      report.rb_per_occupation.emplace(occupation, rb.get<double>());
    }
    report.rb_average = ReadOptionalNumber(json, "rb_average");
    report.vlbs = ReadOptionalNumber(json, "vlbs");
    for (const auto& [label, frequency] : json.at("label_frequencies").items()) {
      report.label_frequencies.emplace(label, frequency.get<double>());
    }
    report.warnings = json.at("warnings").get<std::vector<std::string>>();
    return report;
  });
}

std::string ReportToCsv(const FairnessReport& report) {
  std::string csv = "metric,key,value\n";
  auto row = [&csv](const std::string& metric, const std::string& key,
                    const std::string& value) {
    csv += CsvField(metric) + "," + CsvField(key) + "," + CsvField(value) + "\n";
  };
  row("n_samples", "", std::to_string(report.n_samples));
  row("accuracy", "", FormatNumber(report.accuracy));
  row("macro_f1", "", FormatNumber(report.macro_f1));
  for (const auto& [group, rate] : report.selection_rates) {
    row("selection_rate", group.ToString(), FormatNumber(rate));
  }
  if (report.dpr) {
    row("dpr", "",
        report.dpr->degenerate() ? "inf" : FormatNumber(report.dpr->value()));
  }
  for (const auto& [occupation, rb] : report.rb_per_occupation) {
    row("rb", occupation, FormatNumber(rb));
  }
  if (report.rb_average) row("rb_average", "", FormatNumber(*report.rb_average));
  if (report.vlbs) row("vlbs", "", FormatNumber(*report.vlbs));
  for (const auto& [label, frequency] : report.label_frequencies) {
    row("label_frequency", label, FormatNumber(frequency));
  }
  for (const auto& warning : report.warnings) row("warning", "", warning);
  return csv;
}

Json VerdictToJson(const EffectivenessVerdict& verdict) {
  Json json;
  json["type"] = "effectiveness_verdict";
  json["manifest"] = verdict.manifest;
  json["score"] = verdict.score;
  json["text_only_score"] = verdict.text_only_score;
  json["with_image_score"] = verdict.with_image_score;
  json["random_score"] = verdict.random_score;
  json["image_reliance_delta"] = verdict.image_reliance_delta;
  json["leakage_flag"] = verdict.leakage_flag;
  json["difficulty_flag"] = verdict.difficulty_flag;
  json["leakage_margin"] = verdict.margins.leakage_margin;
  json["difficulty_ceiling"] = verdict.margins.difficulty_ceiling;
  return json;
}

EffectivenessVerdict VerdictFromJson(const Json& json) {
  return Guard("malformed effectiveness verdict", [&] {
    EffectivenessVerdict verdict;
    verdict.manifest = json.at("manifest").get<std::string>();
    verdict.score = json.at("score").get<std::string>();
    verdict.text_only_score = json.at("text_only_score").get<double>();
    verdict.with_image_score = json.at("with_image_score").get<double>();
    verdict.random_score = json.at("random_score").get<double>();
    verdict.image_reliance_delta = json.at("image_reliance_delta").get<double>();
    verdict.leakage_flag = json.at("leakage_flag").get<bool>();
    verdict.difficulty_flag = json.at("difficulty_flag").get<bool>();
    verdict.margins.leakage_margin = json.at("leakage_margin").get<double>();
    verdict.margins.difficulty_ceiling =
        json.at("difficulty_ceiling").get<double>();
    return verdict;
  });
}

std::string VerdictToCsv(const EffectivenessVerdict& verdict) {
  std::string csv =
      "manifest,score,text_only_score,with_image_score,random_score,"
      "image_reliance_delta,leakage_flag,difficulty_flag,leakage_margin,"
      "difficulty_ceiling\n";
  csv += CsvField(verdict.manifest) + "," + CsvField(verdict.score) + "," +
         FormatNumber(verdict.text_only_score) + "," +
         FormatNumber(verdict.with_image_score) + "," +
         FormatNumber(verdict.random_score) + "," +
         FormatNumber(verdict.image_reliance_delta) + "," +
         (verdict.leakage_flag ? "true" : "false") + "," +
         (verdict.difficulty_flag ? "true" : "false") + "," +
         FormatNumber(verdict.margins.leakage_margin) + "," +
         FormatNumber(verdict.margins.difficulty_ceiling) + "\n";
  return csv;
}

Json SteeringConfigToJson(const SteeringConfig& config) {
  Json json;
  json["method"] = SteeringMethodName(config.method);
  json["feature"] = config.feature;
  json["coefficient"] = config.coefficient;
  json["threshold"] = OptionalNumber(config.threshold);
  json["layer"] = config.layer;
  json["clamp_semantics"] = ClampSemanticsName(config.clamp_semantics);
  if (config.unbounded_coefficient) json["unbounded_coefficient"] = true;
  return json;
}

SteeringConfig SteeringConfigFromJson(const Json& json) {
  return Guard("malformed steering config", [&] {
    SteeringConfig config;
    config.method = ParseSteeringMethod(json.at("method").get<std::string>());
    config.feature = json.at("feature").get<size_t>();
    config.coefficient = json.at("coefficient").get<double>();
    config.threshold = ReadOptionalNumber(json, "threshold");
    config.layer = json.value("layer", size_t{0});
    config.clamp_semantics =
        ParseClampSemantics(json.value("clamp_semantics", "target"));
    config.unbounded_coefficient = json.value("unbounded_coefficient", false);
    config.Validate();
    return config;
  });
}

std::string SweepToJsonl(std::span<const SweepEntry> entries) {
  std::string out;
  for (size_t rank = 0; rank < entries.size(); ++rank) {
    const SweepEntry& entry = entries[rank];
    Json row;
    row["rank"] = rank + 1;
    row["index"] = entry.index;
    row["config"] = SteeringConfigToJson(entry.config);
    if (entry.report) {
      row["report"] = ReportToJson(*entry.report);
    } else {
      row["error"] = entry.error.value_or("unknown error");
    }
    out += row.dump() + "\n";
  }
  return out;
}

std::string SweepToCsv(std::span<const SweepEntry> entries) {
  std::string csv =
      "rank,index,method,feature,coefficient,threshold,layer,"
      "clamp_semantics,accuracy,rb_average,macro_f1,dpr,vlbs,error\n";
  for (size_t rank = 0; rank < entries.size(); ++rank) {
    const SweepEntry& e = entries[rank];
    const SteeringConfig& c = e.config;
    csv += std::to_string(rank + 1) + "," + std::to_string(e.index) + "," +
           SteeringMethodName(c.method) + "," + std::to_string(c.feature) +
           "," + FormatNumber(c.coefficient) + "," +
           (c.threshold ? FormatNumber(*c.threshold) : "") + "," +
           std::to_string(c.layer) + "," +
           ClampSemanticsName(c.clamp_semantics) + ",";
    if (e.report) {
      const FairnessReport& r = *e.report;
      csv += FormatNumber(r.accuracy) + "," +
             (r.rb_average ? FormatNumber(*r.rb_average) : "") + "," +
             FormatNumber(r.macro_f1) + "," +
             (r.dpr ? (r.dpr->degenerate() ? "inf" : FormatNumber(r.dpr->value()))
                    : "") +
             "," + (r.vlbs ? FormatNumber(*r.vlbs) : "") + ",";
    } else {
      csv += ",,,,," + CsvField(e.error.value_or("unknown error"));
    }
    csv += "\n";
  }
  return csv;
}

namespace {

constexpr char kSaeMagic[4] = {'F', 'S', 'A', 'E'};
constexpr uint32_t kSaeVersion = 1;

void PutLittleEndian(std::string& out, uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  uint64_t Unsigned(int width) {
    Require(pos_ + static_cast<size_t>(width) <= bytes_.size(),
            "SAE binary is truncated");
    uint64_t value = 0;
    for (int i = 0; i < width; ++i) {
      value |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_++]))
               << (8 * i);
    }
    return value;
  }
  double Double() { return std::bit_cast<double>(Unsigned(8)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

void PutMatrix(std::string& out, const Matrix& matrix) {
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      PutLittleEndian(out, std::bit_cast<uint64_t>(matrix(i, j)), 8);
    }
  }
}

Matrix GetMatrix(ByteReader& reader, Eigen::Index rows, Eigen::Index cols) {
  Matrix matrix(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) matrix(i, j) = reader.Double();
  }
  return matrix;
}

}  // namespace

std::string SaeToBinary(const SaeParams& params) {
  std::string out(kSaeMagic, sizeof(kSaeMagic));
  PutLittleEndian(out, kSaeVersion, 4);
  PutLittleEndian(out, params.features(), 8);
  PutLittleEndian(out, params.width(), 8);
  PutMatrix(out, params.w_enc);
  PutMatrix(out, params.b_enc);
  PutMatrix(out, params.w_dec);
  PutMatrix(out, params.b_dec);
  return out;
}

SaeParams SaeFromBinary(const std::string& bytes) {
  Require(bytes.size() >= sizeof(kSaeMagic) &&
              std::memcmp(bytes.data(), kSaeMagic, sizeof(kSaeMagic)) == 0,
          "not an SAE binary (bad magic)");
  ByteReader reader(bytes);
  reader.Unsigned(4);
  Require(reader.Unsigned(4) == kSaeVersion, "unsupported SAE binary version");
  const auto m = static_cast<Eigen::Index>(reader.Unsigned(8));
  const auto n = static_cast<Eigen::Index>(reader.Unsigned(8));
  Require(m > 0 && n > 0 && m < (1 << 24) && n < (1 << 24),
          "implausible SAE dimensions");
  Require(bytes.size() == 24 + 8 * static_cast<size_t>(2 * m * n + m + n),
          "SAE binary size does not match its dims header");
  SaeParams params;
  params.w_enc = GetMatrix(reader, m, n);
  params.b_enc = GetMatrix(reader, m, 1);
  params.w_dec = GetMatrix(reader, n, m);
  params.b_dec = GetMatrix(reader, n, 1);
  params.Validate();
  return params;
}

Json SaeToJson(const SaeParams& params) {
  Json json;
  json["format"] = "fairsteer.sae";
  json["m"] = params.features();
  json["n"] = params.width();
  json["w_enc"] = FlattenRowMajor(params.w_enc);
  json["b_enc"] = FlattenRowMajor(params.b_enc);
  json["w_dec"] = FlattenRowMajor(params.w_dec);
  json["b_dec"] = FlattenRowMajor(params.b_dec);
  return json;
}

SaeParams SaeFromJson(const Json& json) {
  return Guard("malformed SAE JSON", [&] {
    Require(json.value("format", "") == "fairsteer.sae",
            "not an SAE JSON document");
    const auto m = static_cast<Eigen::Index>(json.at("m").get<size_t>());
    const auto n = static_cast<Eigen::Index>(json.at("n").get<size_t>());
    SaeParams params;
    params.w_enc = UnflattenRowMajor(json.at("w_enc"), m, n, "w_enc");
    params.b_enc = UnflattenRowMajor(json.at("b_enc"), m, 1, "b_enc");
    params.w_dec = UnflattenRowMajor(json.at("w_dec"), n, m, "w_dec");
    params.b_dec = UnflattenRowMajor(json.at("b_dec"), n, 1, "b_dec");
    params.Validate();
    return params;
  });
}

void WriteSae(const SaeParams& params, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    WriteTextFile(path, SaeToJson(params).dump() + "\n");
  } else {
    WriteTextFile(path, SaeToBinary(params));
  }
}

SaeParams ReadSae(const std::filesystem::path& path) {
  const std::string bytes = ReadTextFile(path);
  if (bytes.size() >= 4 &&
      std::memcmp(bytes.data(), kSaeMagic, sizeof(kSaeMagic)) == 0) {
    return SaeFromBinary(bytes);
  }
  return Guard("malformed SAE file '" + path.string() + "'",
               [&] { return SaeFromJson(Json::parse(bytes)); });
}

std::string RegistryToJsonl(const FeatureRegistry& registry) {
  std::string out;
  for (const auto& entry : registry.entries) {
    Json row;
    row["feature"] = entry.feature;
    row["description"] = entry.description;
    row["layer"] = entry.layer;
    row["location"] = FeatureLocationName(entry.location);
    out += row.dump() + "\n";
  }
  return out;
}

FeatureRegistry ParseRegistry(std::istream& in) {
  FeatureRegistry registry;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    registry.entries.push_back(
        Guard("registry line " + std::to_string(line_number), [&] {
          const Json row = Json::parse(line);
          FeatureRegistryEntry entry;
          entry.feature = row.at("feature").get<size_t>();
          entry.description = row.at("description").get<std::string>();
          entry.layer = row.at("layer").get<size_t>();
          entry.location =
              ParseFeatureLocation(row.at("location").get<std::string>());
          return entry;
        }));
  }
  return registry;
}

Json ToyModelToJson(const ToyModel& model) {
  Json json;
  json["format"] = "fairsteer.toymodel";
  json["dims"] = {{"width", model.dims.width},
                  {"layers", model.dims.layers},
                  {"chunk_width", model.dims.chunk_width},
                  {"modality_tokens", model.dims.modality_tokens},
                  {"text_dim", model.dims.text_dim},
                  {"hook_layer", model.dims.hook_layer}};
  json["labels"] = model.labels.labels();
  Json tensors = Json::object();
  for (const auto& [name, tensor] : model.Tensors()) {
    tensors[name] = {{"rows", tensor->rows()},
                     {"cols", tensor->cols()},
                     {"data", FlattenRowMajor(*tensor)}};
  }
  json["tensors"] = std::move(tensors);
  return json;
}

ToyModel ToyModelFromJson(const Json& json) {
  return Guard("malformed toy model JSON", [&] {
    Require(json.value("format", "") == "fairsteer.toymodel",
            "not a toy model document");
    const Json& dims = json.at("dims");
    ToyModelDims d;
    d.width = dims.at("width").get<size_t>();
    d.layers = dims.at("layers").get<size_t>();
    d.chunk_width = dims.at("chunk_width").get<size_t>();
    d.modality_tokens = dims.at("modality_tokens").get<size_t>();
    d.text_dim = dims.at("text_dim").get<size_t>();
    d.hook_layer = dims.at("hook_layer").get<size_t>();
    const LabelSpace labels(json.at("labels").get<std::vector<std::string>>());
    ToyModel model = InitToyModel(d, labels, 0);
    const Json& tensors = json.at("tensors");
    for (auto& [name, tensor] : model.Tensors()) {
      Require(tensors.contains(name), "missing tensor '" + name + "'");
      const Json& t = tensors.at(name);
      Require(t.at("rows").get<Eigen::Index>() == tensor->rows() &&
                  t.at("cols").get<Eigen::Index>() == tensor->cols(),
              "tensor '" + name + "' has the wrong shape");
      *tensor = UnflattenRowMajor(t.at("data"), tensor->rows(), tensor->cols(),
                                  name);
    }
    model.Validate();
    return model;
  });
}

void WriteToyModel(const ToyModel& model, const std::filesystem::path& path) {
  WriteTextFile(path, ToyModelToJson(model).dump() + "\n");
}

ToyModel ReadToyModel(const std::filesystem::path& path) {
  const std::string text = ReadTextFile(path);
  return Guard("malformed toy model file '" + path.string() + "'",
               [&] { return ToyModelFromJson(Json::parse(text)); });
}

}  // namespace fairsteer
