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

#ifndef FAIRSTEER_STEERING_H_
#define FAIRSTEER_STEERING_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsteer/metrics.h"
#include "fairsteer/sae.h"

namespace fairsteer {

// Hidden states of one layer: n x T, one column per token.
using HiddenSequence = Matrix;

enum class SteeringMethod {
  kConstant,
  kConditionalPerToken,
  kConditionalPerInput,
  kClamping,
  kConditionalClamping,
};

// How clamping scales the decoder direction:
//   kTarget:   h + (c - a_f(h)) d_f   (drives the feature to c)
//   kAdditive: h + (a_f(h) + c) d_f   (activation plus coefficient)
enum class ClampSemantics { kTarget, kAdditive };

SteeringMethod ParseSteeringMethod(const std::string& text);
std::string SteeringMethodName(SteeringMethod method);
ClampSemantics ParseClampSemantics(const std::string& text);
std::string ClampSemanticsName(ClampSemantics semantics);
bool IsConditional(SteeringMethod method);

inline constexpr double kMaxSteeringCoefficient = 40.0;

struct SteeringConfig {
  SteeringMethod method = SteeringMethod::kConstant;
  size_t feature = 0;
  double coefficient = 0.0;
  // Required by the conditional methods. A token "fires" when its feature
  // activation is strictly greater than the threshold.
  std::optional<double> threshold;
  size_t layer = 0;
  ClampSemantics clamp_semantics = ClampSemantics::kTarget;
  // Permits |coefficient| > 40.
  bool unbounded_coefficient = false;

  // Checks coefficient bounds and threshold presence.
  void Validate() const;
  // Stable identifier recorded in prediction logs.
  std::string Id() const;

  bool operator==(const SteeringConfig&) const = default;
};

HiddenSequence SteerConstant(const HiddenSequence& hidden,
                             const SteeringConfig& config,
                             const SaeParams& params);
HiddenSequence SteerConditionalPerToken(const HiddenSequence& hidden,
                                        const SteeringConfig& config,
                                        const SaeParams& params);
HiddenSequence SteerConditionalPerInput(const HiddenSequence& hidden,
                                        const SteeringConfig& config,
                                        const SaeParams& params);
HiddenSequence SteerClamp(const HiddenSequence& hidden,
                          const SteeringConfig& config,
                          const SaeParams& params);
HiddenSequence SteerConditionalClamp(const HiddenSequence& hidden,
                                     const SteeringConfig& config,
                                     const SaeParams& params);

// Dispatches on config.method.
HiddenSequence Steer(const HiddenSequence& hidden, const SteeringConfig& config,
                     const SaeParams& params);

// {-40, -30, -20, -10, -5, 0, 5, 10, 20, 30, 40}.
std::vector<double> DefaultCoefficientGrid();
std::vector<SteeringMethod> AllSteeringMethods();

// Cartesian product of methods and coefficients for one feature and layer.
std::vector<SteeringConfig> BuildSweepGrid(
    std::span<const SteeringMethod> methods,
    std::span<const double> coefficients, size_t feature, size_t layer,
    double threshold = 0.0,
    ClampSemantics clamp_semantics = ClampSemantics::kTarget);

struct SweepEntry {
  size_t index = 0;  // position in the input grid
  SteeringConfig config;
  std::optional<FairnessReport> report;
  std::optional<std::string> error;
};

// Evaluates every config and ranks them by accuracy (descending), then
// |rb_average| (ascending, missing last), then grid index. Failed
// evaluations are kept, ranked after all successes.
std::vector<SweepEntry> Sweep(
    std::span<const SteeringConfig> configs,
    const std::function<FairnessReport(const SteeringConfig&)>& evaluate);

}  // namespace fairsteer

#endif  // FAIRSTEER_STEERING_H_
