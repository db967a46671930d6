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

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include "fairsteer/error.h"
#include "fairsteer/harness.h"
#include "fairsteer/prediction.h"
#include "fairsteer/sae.h"
#include "fairsteer/serialization.h"
#include "fairsteer/steering.h"
#include "fairsteer/toymodel.h"

namespace fairsteer::cli {
namespace {

namespace fs = std::filesystem;

void Emit(const std::string& text, const std::string& output,
          std::ostream& out) {
  if (output.empty() || output == "-") {
    out << text;
  } else {
    WriteTextFile(output, text);
  }
}

std::vector<std::string> SplitCommas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    const auto first = part.find_first_not_of(' ');
    const auto last = part.find_last_not_of(' ');
    Require(first != std::string::npos, "empty entry in list '" + text + "'");
    parts.push_back(part.substr(first, last - first + 1));
  }
  Require(!parts.empty(), "empty list");
  return parts;
}

double ParseDouble(const std::string& text) {
  size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  Require(used == text.size() && used > 0, "not a number: '" + text + "'");
  return value;
}

std::pair<std::string, std::string> ParseGroup(const std::string& text) {
  const auto eq = text.find('=');
  Require(eq != std::string::npos && eq > 0 && eq + 1 < text.size(),
          "group must look like attribute=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// A toy task view over a toy manifest, for training.
ToyTask TaskFromManifest(const DatasetManifest& manifest) {
  Require(!manifest.samples.empty(), "manifest has no samples");
  ToyTask task;
  task.samples = manifest.samples;
  task.bias_strength = manifest.bias_strength.value_or(0.0);
  task.seed = manifest.seed.value_or(0);
  if (manifest.content_dim) {
    task.content_dim = *manifest.content_dim;
  } else {
    const auto& modality = manifest.samples.front().modality;
    Require(modality && modality->size() > kSpuriousDim,
            "manifest has no toy content dimension");
    task.content_dim = modality->size() - kSpuriousDim;
  }
  return task;
}

FairnessReport ReportFromInput(const std::string& path,
                               const std::optional<DatasetManifest>& manifest) {
  const std::string text = ReadTextFile(path);
  const auto newline = text.find('\n');
  Json first;
  try {
    first = Json::parse(text.substr(0, newline));
  } catch (const Json::exception&) {
    try {
      first = Json::parse(text);
    } catch (const Json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  if (first.is_object() && first.value("type", "") == "fairness_report") {
    return ReportFromJson(Json::parse(text));
  }
  Require(manifest.has_value(),
          path + " is a prediction log; pass --manifest to score it");
  std::istringstream in(text);
  return ComputeReport(ParsePredictionLog(in, *manifest), *manifest);
}

struct Options {
  std::string output;
  std::string format = "json";
  std::string manifest;
  std::string model;
  std::string scores;
  std::string sae;
  std::string steering;
  std::string log;
  std::string text_only;
  std::string with_image;
  std::string random;
  std::string name;
  std::string trace;
  std::string registry;
  std::string select_by = "gender=male";
  std::string grid;
  std::string methods;
  std::string clamp = "target";
  std::optional<size_t> feature;
  std::optional<size_t> layer;
  bool no_image = false;
  bool adversarial = false;
  bool text_leak = false;
  uint64_t seed = 0;
  size_t runs = 100;
  size_t samples = 2000;
  size_t content_dim = 12;
  size_t epochs = 30;
  size_t features = 128;
  size_t steps = 2000;
  size_t batch = 64;
  double bias_strength = 0.0;
  double threshold = 0.0;
  double sparsity = 1e-2;
  double learning_rate = 1e-2;
  double leakage_margin = AuditMargins{}.leakage_margin;
  double difficulty_ceiling = AuditMargins{}.difficulty_ceiling;
};

std::string FormatReport(const FairnessReport& report,
                         const std::string& format) {
  if (format == "csv") return ReportToCsv(report);
  return ReportToJson(report).dump(2) + "\n";
}

// Loads the scoring model: a toy model file or a score table of
// {"sample_id", "probs"} rows.
struct LoadedPredictor {
  std::optional<ToyModel> toy;
  std::optional<SaeParams> sae;
  std::unique_ptr<Predictor> predictor;
};

LoadedPredictor LoadPredictor(const Options& opt) {
  LoadedPredictor loaded;
  Require(opt.model.empty() != opt.scores.empty(),
          "pass exactly one of --model or --scores");
  if (!opt.scores.empty()) {
    Require(opt.steering.empty(), "--steering needs a --model");
    std::map<std::string, TokenDistribution> table;
    std::istringstream in(ReadTextFile(opt.scores));
    std::string line;
    size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const Json row = Json::parse(line);
        TokenDistribution dist;
        for (const auto& [token, p] : row.at("probs").items()) {
          dist.probabilities[token] = p.get<double>();
        }
        table[row.at("sample_id").get<std::string>()] = std::move(dist);
      } catch (const Json::exception& e) {
        throw ValidationError(opt.scores + ": line " + std::to_string(number) +
                              ": " + e.what());
      }
    }
    loaded.predictor = std::make_unique<ScoreTablePredictor>(
        fs::path(opt.scores).stem().string(), std::move(table));
    return loaded;
  }
  loaded.toy = ReadToyModel(opt.model);
  std::optional<ActiveSteering> steering;
  if (!opt.steering.empty()) {
    Require(!opt.sae.empty(), "--steering needs --sae");
    loaded.sae = ReadSae(opt.sae);
    SteeringConfig config;
    try {
      config = SteeringConfigFromJson(Json::parse(ReadTextFile(opt.steering)));
    } catch (const Json::exception& e) {
      throw ValidationError(opt.steering + ": " + e.what());
    }
    steering = ActiveSteering{config, &*loaded.sae};
  }
  loaded.predictor = std::make_unique<ToyModelPredictor>(
      *loaded.toy, fs::path(opt.model).stem().string(), steering);
  return loaded;
}

int Dispatch(const std::string& command, const Options& opt,
             std::ostream& out, std::ostream& err) {
  if (command == "gen-task") {
    ToyTaskOptions task_options;
    task_options.text_leak = opt.text_leak;
    const ToyTask task = GenerateTask(opt.bias_strength, opt.samples,
                                      opt.content_dim, opt.seed, task_options);
    const std::string name =
        opt.name.empty() ? "toy-b" + FormatNumber(opt.bias_strength) + "-s" +
                               std::to_string(opt.seed)
                         : opt.name;
    Emit(ManifestToString(ManifestFromTask(task, name)), opt.output, out);
    return kExitOk;
  }

  const DatasetManifest manifest = ReadManifest(opt.manifest);

  if (command == "adversarialize") {
    DatasetManifest rewritten = manifest;
    rewritten.name = opt.name.empty() ? manifest.name + "-adversarial" : opt.name;
    for (auto& sample : rewritten.samples) sample = Adversarialize(sample);
    Emit(ManifestToString(rewritten), opt.output, out);
    return kExitOk;
  }
  if (command == "baseline") {
    Emit(FormatReport(RandomBaselineReport(manifest, opt.runs, opt.seed),
                      opt.format),
         opt.output, out);
    return kExitOk;
  }
  if (command == "report") {
    const PredictionLog log = IngestExternalLog(opt.log, manifest);
    Emit(FormatReport(ComputeReport(log, manifest), opt.format), opt.output,
         out);
    return kExitOk;
  }
  if (command == "eval") {
    LoadedPredictor loaded = LoadPredictor(opt);
    EvalCondition condition;
    condition.with_image = !opt.no_image;
    condition.adversarial = opt.adversarial;
    if (!opt.steering.empty()) {
      const Json config = Json::parse(ReadTextFile(opt.steering));
      condition.steering = SteeringConfigFromJson(config).Id();
    }
    const PredictionLog log =
        RunEval(manifest, *loaded.predictor, condition, opt.seed);
    if (!log.header.missing_modality.empty()) {
      err << "warning: " << log.header.missing_modality.size()
          << " samples skipped for lack of a modality payload\n";
    }
    Emit(PredictionLogToString(log, manifest), opt.output, out);
    return kExitOk;
  }
  if (command == "train-toy") {
    ToyTrainOptions train_options;
    const ToyTask task = TaskFromManifest(manifest);
    const ToyTrainResult result = TrainToy(task, opt.epochs, opt.seed,
                                           train_options);
    Require(!opt.output.empty(), "train-toy needs -o <model.json>");
    WriteToyModel(result.model, opt.output);
    out << "epoch,train_loss,train_accuracy\n";
    for (size_t e = 0; e < result.train_loss.size(); ++e) {
      out << e + 1 << "," << FormatNumber(result.train_loss[e]) << ","
          << FormatNumber(result.train_accuracy[e]) << "\n";
    }
    return kExitOk;
  }
  if (command == "train-sae") {
    Require(!opt.output.empty(), "train-sae needs -o <sae.bin|sae.json>");
    const ToyModel model = ReadToyModel(opt.model);
    const std::vector<Vector> corpus =
        CollectHiddenStates(model, manifest.samples);
    SaeTrainConfig config;
    config.sparsity_weight = opt.sparsity;
    config.learning_rate = opt.learning_rate;
    config.steps = opt.steps;
    config.batch_size = opt.batch;
    config.seed = opt.seed;
    const SaeTrainResult result = TrainSae(corpus, config, opt.features);
    WriteSae(result.params, opt.output);
    std::ostringstream trace;
    trace << "step,loss,reconstruction,mean_l0\n";
    for (const auto& point : result.trace) {
      trace << point.step << "," << FormatNumber(point.loss) << ","
            << FormatNumber(point.reconstruction) << ","
            << FormatNumber(point.mean_l0) << "\n";
    }
    if (!opt.trace.empty()) {
      WriteTextFile(opt.trace, trace.str());
    } else {
      out << trace.str();
    }
    if (!opt.registry.empty()) {
      const auto [attribute, value] = ParseGroup(opt.select_by);
      const FeatureSelection selection = SelectGroupFeature(
          model, manifest.samples, result.params, attribute, value);
      FeatureRegistry registry;
      registry.entries.push_back(FeatureRegistryEntry{
          selection.feature,
          attribute + "=" + value + " (r=" +
              FormatNumber(selection.correlation) + ")",
          model.dims.hook_layer, FeatureLocation::kResidual});
      WriteTextFile(opt.registry, RegistryToJsonl(registry));
    }
    return kExitOk;
  }
  if (command == "sweep") {
    const ToyModel model = ReadToyModel(opt.model);
    const SaeParams sae = ReadSae(opt.sae);
    size_t feature = 0;
    if (opt.feature) {
      feature = *opt.feature;
    } else {
      const auto [attribute, value] = ParseGroup(opt.select_by);
      feature =
          SelectGroupFeature(model, manifest.samples, sae, attribute, value)
              .feature;
    }
    std::vector<double> coefficients = DefaultCoefficientGrid();
    if (!opt.grid.empty()) {
      coefficients.clear();
      for (const auto& c : SplitCommas(opt.grid)) {
        coefficients.push_back(ParseDouble(c));
      }
    }
    std::vector<SteeringMethod> methods = AllSteeringMethods();
    if (!opt.methods.empty()) {
      methods.clear();
      for (const auto& m : SplitCommas(opt.methods)) {
        methods.push_back(ParseSteeringMethod(m));
      }
    }
    const std::vector<SteeringConfig> configs = BuildSweepGrid(
        methods, coefficients, feature, opt.layer.value_or(model.dims.hook_layer),
        opt.threshold, ParseClampSemantics(opt.clamp));
    const auto entries = Sweep(configs, [&](const SteeringConfig& config) {
      const ToyModelPredictor predictor(model, fs::path(opt.model).stem().string(),
                                        ActiveSteering{config, &sae});
      EvalCondition condition;
      condition.steering = config.Id();
      return ComputeReport(RunEval(manifest, predictor, condition, opt.seed),
                           manifest);
    });
    Emit(opt.format == "csv" ? SweepToCsv(entries) : SweepToJsonl(entries),
         opt.output, out);
    return kExitOk;
  }
  throw ValidationError("unknown command '" + command + "'");
}

int Audit(const Options& opt, std::ostream& out) {
  std::optional<DatasetManifest> manifest;
  if (!opt.manifest.empty()) manifest = ReadManifest(opt.manifest);
  const FairnessReport text_only = ReportFromInput(opt.text_only, manifest);
  const FairnessReport with_image = ReportFromInput(opt.with_image, manifest);
  const FairnessReport random =
      opt.random.empty()
          ? RandomBaselineReport(
                [&] {
                  Require(manifest.has_value(),
                          "audit without --random needs --manifest");
                  return *manifest;
                }(),
                opt.runs, opt.seed)
          : ReportFromInput(opt.random, manifest);
  const EffectivenessVerdict verdict = AuditEffectiveness(
      text_only, with_image, random,
      AuditMargins{opt.leakage_margin, opt.difficulty_ceiling});
  Emit(opt.format == "csv" ? VerdictToCsv(verdict)
                           : VerdictToJson(verdict).dump(2) + "\n",
       opt.output, out);
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"fairsteer: bias metrics, SAE steering and toy-model experiments"};
  app.require_subcommand(1);
  Options opt;

  auto add_output = [&](CLI::App* sub) {
    sub->add_option("-o,--output", opt.output, "Output file (default stdout)");
  };
  auto add_format = [&](CLI::App* sub, std::vector<std::string> formats) {
    sub->add_option("--format", opt.format, "Output format")
        ->check(CLI::IsMember(formats));
  };
  auto add_manifest = [&](CLI::App* sub, bool required) {
    sub->add_option("-m,--manifest", opt.manifest, "Manifest JSONL")
        ->required(required);
  };

  auto* eval = app.add_subcommand("eval", "Run a model over a manifest");
  add_manifest(eval, true);
  eval->add_option("--model", opt.model, "Toy model JSON");
  eval->add_option("--scores", opt.scores,
                   "Score table JSONL of {sample_id, probs}");
  eval->add_flag("--no-image", opt.no_image, "Drop the modality payload");
  eval->add_flag("--adversarial", opt.adversarial,
                 "Rewrite questions adversarially first");
  eval->add_option("--steering", opt.steering, "Steering config JSON");
  eval->add_option("--sae", opt.sae, "SAE file used by --steering");
  eval->add_option("--seed", opt.seed, "Root seed recorded in the log");
  add_output(eval);

  auto* report = app.add_subcommand("report", "Score a prediction log");
  add_manifest(report, true);
  report->add_option("-l,--log", opt.log, "Prediction log JSONL")->required();
  add_format(report, {"json", "csv"});
  add_output(report);

  auto* audit = app.add_subcommand("audit", "Dataset effectiveness audit");
  add_manifest(audit, false);
  audit->add_option("--text-only", opt.text_only, "Text-only log or report")
      ->required();
  audit->add_option("--with-image", opt.with_image, "With-image log or report")
      ->required();
  audit->add_option("--random", opt.random,
                    "Random-baseline log or report (default: computed)");
  audit->add_option("--runs", opt.runs, "Random runs when computing");
  audit->add_option("--seed", opt.seed, "Random seed when computing");
  audit->add_option("--leakage-margin", opt.leakage_margin)
      ->check(CLI::Range(0.0, 1.0));
  audit->add_option("--difficulty-ceiling", opt.difficulty_ceiling)
      ->check(CLI::Range(0.0, 1.0));
  add_format(audit, {"json", "csv"});
  add_output(audit);

  auto* adversarialize =
      app.add_subcommand("adversarialize", "Rewrite a caption manifest");
  add_manifest(adversarialize, true);
  adversarialize->add_option("--name", opt.name, "Name of the new manifest");
  add_output(adversarialize);

  auto* train_sae = app.add_subcommand(
      "train-sae", "Train an SAE on a toy model's hook-layer states");
  add_manifest(train_sae, true);
  train_sae->add_option("--model", opt.model, "Toy model JSON")->required();
  train_sae->add_option("--features", opt.features, "Dictionary size");
  train_sae->add_option("--steps", opt.steps, "Optimizer steps");
  train_sae->add_option("--batch", opt.batch, "Batch size");
  train_sae->add_option("--sparsity", opt.sparsity, "L1 weight");
  train_sae->add_option("--lr", opt.learning_rate, "Learning rate");
  train_sae->add_option("--seed", opt.seed);
  train_sae->add_option("--trace", opt.trace, "Checkpoint CSV");
  train_sae->add_option("--registry", opt.registry,
                        "Write the selected group feature as a registry");
  train_sae->add_option("--select-by", opt.select_by,
                        "Group used for feature selection");
  add_output(train_sae);

  auto* train_toy = app.add_subcommand("train-toy", "Train the toy model");
  add_manifest(train_toy, true);
  train_toy->add_option("--epochs", opt.epochs);
  train_toy->add_option("--seed", opt.seed);
  add_output(train_toy);

  auto* gen_task = app.add_subcommand("gen-task", "Generate a toy manifest");
  gen_task->add_option("--bias-strength", opt.bias_strength)
      ->check(CLI::Range(-1.0, 1.0));
  gen_task->add_option("--samples", opt.samples);
  gen_task->add_option("--content-dim", opt.content_dim);
  gen_task->add_option("--seed", opt.seed);
  gen_task->add_flag("--text-leak", opt.text_leak,
                     "Mark the gold option in its text");
  gen_task->add_option("--name", opt.name);
  add_output(gen_task);

  auto* sweep = app.add_subcommand("sweep", "Steering sweep over a grid");
  add_manifest(sweep, true);
  sweep->add_option("--model", opt.model, "Toy model JSON")->required();
  sweep->add_option("--sae", opt.sae, "SAE file")->required();
  sweep->add_option("--feature", opt.feature,
                    "Feature to steer (default: selected by --select-by)");
  sweep->add_option("--select-by", opt.select_by);
  sweep->add_option("--grid", opt.grid, "Comma-separated coefficients");
  sweep->add_option("--methods", opt.methods, "Comma-separated methods");
  sweep->add_option("--threshold", opt.threshold);
  sweep->add_option("--layer", opt.layer);
  sweep->add_option("--clamp-semantics", opt.clamp)
      ->check(CLI::IsMember({"target", "additive"}));
  sweep->add_option("--seed", opt.seed);
  add_format(sweep, {"jsonl", "csv"});
  add_output(sweep);

  auto* baseline = app.add_subcommand("baseline", "Uniform random baseline");
  add_manifest(baseline, true);
  baseline->add_option("--runs", opt.runs);
  baseline->add_option("--seed", opt.seed);
  add_format(baseline, {"json", "csv"});
  add_output(baseline);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "sweep" && opt.format == "json") opt.format = "jsonl";
  try {
    if (command == "audit") return Audit(opt, out);
    return Dispatch(command, opt, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace fairsteer::cli
