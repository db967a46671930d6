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

#include "fairsteer/steering.h"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <exception>

#include "fairsteer/error.h"

namespace fairsteer {

SteeringMethod ParseSteeringMethod(const std::string& text) {
  if (text == "constant") return SteeringMethod::kConstant;
  if (text == "conditional_per_token") {
    return SteeringMethod::kConditionalPerToken;
  }
  if (text == "conditional_per_input") {
    return SteeringMethod::kConditionalPerInput;
  }
  if (text == "clamping") return SteeringMethod::kClamping;
  if (text == "conditional_clamping") {
    return SteeringMethod::kConditionalClamping;
  }
  throw ValidationError("unknown steering method '" + text + "'");
}

std::string SteeringMethodName(SteeringMethod method) {
  switch (method) {
    case SteeringMethod::kConstant:
      return "constant";
    case SteeringMethod::kConditionalPerToken:
      return "conditional_per_token";
    case SteeringMethod::kConditionalPerInput:
      return "conditional_per_input";
    case SteeringMethod::kClamping:
      return "clamping";
    case SteeringMethod::kConditionalClamping:
      return "conditional_clamping";
  }
  return "constant";
}

ClampSemantics ParseClampSemantics(const std::string& text) {
  if (text == "target") return ClampSemantics::kTarget;
  if (text == "additive") return ClampSemantics::kAdditive;
  throw ValidationError("unknown clamp semantics '" + text +
                        "' (expected target or additive)");
}

std::string ClampSemanticsName(ClampSemantics semantics) {
  return semantics == ClampSemantics::kTarget ? "target" : "additive";
}

bool IsConditional(SteeringMethod method) {
  return method == SteeringMethod::kConditionalPerToken ||
         method == SteeringMethod::kConditionalPerInput ||
         method == SteeringMethod::kConditionalClamping;
}

void SteeringConfig::Validate() const {
  Require(std::isfinite(coefficient), "steering coefficient must be finite");
  Require(unbounded_coefficient ||
              std::abs(coefficient) <= kMaxSteeringCoefficient,
          "steering coefficient outside [-40, 40]");
  if (IsConditional(method)) {
    Require(threshold.has_value(),
            SteeringMethodName(method) + " steering requires a threshold");
    Require(*threshold >= 0.0 && !std::isnan(*threshold),
            "steering threshold must be non-negative");
  }
}

namespace {

std::string ShortestText(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace

std::string SteeringConfig::Id() const {
  std::string id = SteeringMethodName(method) + ":f" +
                   std::to_string(feature) + ":c" + ShortestText(coefficient) +
                   ":l" + std::to_string(layer);
  if (threshold) id += ":t" + ShortestText(*threshold);
  if (method == SteeringMethod::kClamping ||
      method == SteeringMethod::kConditionalClamping) {
    id += ":" + ClampSemanticsName(clamp_semantics);
  }
  return id;
}

namespace {

void CheckDims(const HiddenSequence& hidden, const SaeParams& params,
               const SteeringConfig& config) {
  Require(static_cast<size_t>(hidden.rows()) == params.width(),
          "hidden width " + std::to_string(hidden.rows()) +
              " does not match SAE width " + std::to_string(params.width()));
  Require(config.feature < params.features(),
          "steering feature " + std::to_string(config.feature) +
              " out of range");
  config.Validate();
}

double RequireThreshold(const SteeringConfig& config) {
  Require(config.threshold.has_value(),
          SteeringMethodName(config.method) + " steering requires a threshold");
  return *config.threshold;
}

// Per-token feature activations of the steered feature.
Vector TokenActivations(const HiddenSequence& hidden, const SaeParams& params,
                        size_t feature) {
  Vector activations(hidden.cols());
  for (Eigen::Index t = 0; t < hidden.cols(); ++t) {
    activations(t) = FeatureActivation(hidden.col(t), feature, params);
  }
  return activations;
}

double ClampScale(double activation, const SteeringConfig& config) {
  return config.clamp_semantics == ClampSemantics::kTarget
             ? config.coefficient - activation
             : activation + config.coefficient;
}

}  // namespace

HiddenSequence SteerConstant(const HiddenSequence& hidden,
                             const SteeringConfig& config,
                             const SaeParams& params) {
  CheckDims(hidden, params, config);
  const Vector shift = config.coefficient * params.DecoderDirection(config.feature);
  return hidden.colwise() + shift;
}

HiddenSequence SteerConditionalPerToken(const HiddenSequence& hidden,
                                        const SteeringConfig& config,
                                        const SaeParams& params) {
  CheckDims(hidden, params, config);
  const double threshold = RequireThreshold(config);
  const Vector shift = config.coefficient * params.DecoderDirection(config.feature);
  const Vector activations = TokenActivations(hidden, params, config.feature);
  HiddenSequence out = hidden;
  for (Eigen::Index t = 0; t < hidden.cols(); ++t) {
    if (activations(t) > threshold) out.col(t) += shift;
  }
  return out;
}

HiddenSequence SteerConditionalPerInput(const HiddenSequence& hidden,
                                        const SteeringConfig& config,
                                        const SaeParams& params) {
  CheckDims(hidden, params, config);
  const double threshold = RequireThreshold(config);
  const Vector activations = TokenActivations(hidden, params, config.feature);
  const bool fires = (activations.array() > threshold).any();
  if (!fires) return hidden;
  const Vector shift = config.coefficient * params.DecoderDirection(config.feature);
  return hidden.colwise() + shift;
}

HiddenSequence SteerClamp(const HiddenSequence& hidden,
                          const SteeringConfig& config,
                          const SaeParams& params) {
  CheckDims(hidden, params, config);
  const Vector direction = params.DecoderDirection(config.feature);
  const Vector activations = TokenActivations(hidden, params, config.feature);
  HiddenSequence out = hidden;
  for (Eigen::Index t = 0; t < hidden.cols(); ++t) {
    out.col(t) += ClampScale(activations(t), config) * direction;
  }
  return out;
}

HiddenSequence SteerConditionalClamp(const HiddenSequence& hidden,
                                     const SteeringConfig& config,
                                     const SaeParams& params) {
  CheckDims(hidden, params, config);
  const double threshold = RequireThreshold(config);
  const Vector direction = params.DecoderDirection(config.feature);
  const Vector activations = TokenActivations(hidden, params, config.feature);
  HiddenSequence out = hidden;
  for (Eigen::Index t = 0; t < hidden.cols(); ++t) {
    if (activations(t) > threshold) {
      out.col(t) += ClampScale(activations(t), config) * direction;
    }
  }
  return out;
}

HiddenSequence Steer(const HiddenSequence& hidden, const SteeringConfig& config,
                     const SaeParams& params) {
  switch (config.method) {
    case SteeringMethod::kConstant:
      return SteerConstant(hidden, config, params);
    case SteeringMethod::kConditionalPerToken:
      return SteerConditionalPerToken(hidden, config, params);
    case SteeringMethod::kConditionalPerInput:
      return SteerConditionalPerInput(hidden, config, params);
    case SteeringMethod::kClamping:
      return SteerClamp(hidden, config, params);
    case SteeringMethod::kConditionalClamping:
      return SteerConditionalClamp(hidden, config, params);
  }
  throw ValidationError("unknown steering method");
}

std::vector<double> DefaultCoefficientGrid() {
  return {-40, -30, -20, -10, -5, 0, 5, 10, 20, 30, 40};
}

std::vector<SteeringMethod> AllSteeringMethods() {
  return {SteeringMethod::kConstant, SteeringMethod::kConditionalPerToken,
          SteeringMethod::kConditionalPerInput, SteeringMethod::kClamping,
          SteeringMethod::kConditionalClamping};
}

std::vector<SteeringConfig> BuildSweepGrid(
    std::span<const SteeringMethod> methods,
    std::span<const double> coefficients, size_t feature, size_t layer,
    double threshold, ClampSemantics clamp_semantics) {
  std::vector<SteeringConfig> grid;
  grid.reserve(methods.size() * coefficients.size());
  for (const SteeringMethod method : methods) {
    for (const double c : coefficients) {
      SteeringConfig config;
      config.method = method;
      config.feature = feature;
      config.coefficient = c;
      config.layer = layer;
      config.clamp_semantics = clamp_semantics;
      if (IsConditional(method)) config.threshold = threshold;
      grid.push_back(config);
    }
  }
  return grid;
}

std::vector<SweepEntry> Sweep(
    std::span<const SteeringConfig> configs,
    const std::function<FairnessReport(const SteeringConfig&)>& evaluate) {
  Require(!configs.empty(), "sweep needs at least one config");
  std::vector<SweepEntry> entries;
  entries.reserve(configs.size());
  for (size_t i = 0; i < configs.size(); ++i) {
    SweepEntry entry;
    entry.index = i;
    entry.config = configs[i];
    try {
      entry.report = evaluate(configs[i]);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const SweepEntry& a, const SweepEntry& b) {
                     if (a.report.has_value() != b.report.has_value()) {
                       return a.report.has_value();
                     }
                     if (!a.report) return false;
                     if (a.report->accuracy != b.report->accuracy) {
                       return a.report->accuracy > b.report->accuracy;
                     }
                     const auto& ra = a.report->rb_average;
                     const auto& rb = b.report->rb_average;
                     if (ra.has_value() != rb.has_value()) {
                       return ra.has_value();
                     }
                     if (ra && std::abs(*ra) != std::abs(*rb)) {
                       return std::abs(*ra) < std::abs(*rb);
                     }
                     return false;
                   });
  return entries;
}

}  // namespace fairsteer
