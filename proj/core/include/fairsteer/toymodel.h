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

#ifndef FAIRSTEER_TOYMODEL_H_
#define FAIRSTEER_TOYMODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairsteer/prediction.h"
#include "fairsteer/sae.h"
#include "fairsteer/steering.h"

namespace fairsteer {

// Knobs of the synthetic task that are not part of its identity.
struct ToyTaskOptions {
  // Std-dev of the noise added to the label-determining content features.
  double content_noise = 0.12;
  // Magnitude of the gender-coded spurious chunk.
  double spurious_scale = 1.0;
  // Std-dev of the noise on the spurious chunk.
  double spurious_noise = 0.1;
  // When set, the gold option's caption carries a cue word, so the answer is
  // recoverable from the prompt text alone.
  bool text_leak = false;
};

inline constexpr size_t kSpuriousDim = 2;

// Binary caption-choice task ({A, B}) whose gold label is the sign of the sum
// of latent content features. Gender is balanced 50/50 and agrees with the
// label-associated gender (A: male, B: female) with probability
// (1 + bias_strength) / 2. The modality vector is the noisy content followed
// by a gender-coded chunk.
struct ToyTask {
  std::vector<Sample> samples;
  double bias_strength = 0.0;
  size_t content_dim = 0;
  uint64_t seed = 0;
  ToyTaskOptions options;

  size_t modality_dim() const { return content_dim + kSpuriousDim; }
};

ToyTask GenerateTask(double bias_strength, size_t n_samples,
                     size_t content_dim, uint64_t seed,
                     const ToyTaskOptions& options = {});

// Pearson correlation between the gender code (male +1) and the gold code
// (A +1) over the task.
double SpuriousLabelCorrelation(const ToyTask& task);

struct ToyModelDims {
  size_t width = 32;
  size_t layers = 4;
  size_t chunk_width = 2;
  size_t modality_tokens = 7;
  size_t text_dim = 64;
  size_t hook_layer = 1;

  size_t sequence_length() const { return modality_tokens + 1; }
  size_t modality_dim() const { return modality_tokens * chunk_width; }
  bool operator==(const ToyModelDims&) const = default;
};

// Feed-forward sequence classifier. Token 0 embeds hashed prompt-text
// features; tokens 1.. embed consecutive chunks of the modality vector. Each
// layer updates every token independently:
//   h <- h + phi(W h + b),  phi(x) = x / sqrt(1 + x^2),
// and the readout maps the mean token state to label logits. Layer outputs
// are numbered 0..layers-1; the hook exposes output `hook_layer`.
struct ToyModel {
  ToyModelDims dims;
  LabelSpace labels;
  std::vector<Matrix> chunk_embed;  // per modality token: width x chunk
  Matrix text_embed;                // width x text_dim
  Matrix position;                  // width x sequence_length
  std::vector<Matrix> layer_w;      // width x width
  std::vector<Matrix> layer_b;      // width x 1
  Matrix readout_w;                 // labels x width
  Matrix readout_b;                 // labels x 1

  // Every parameter tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> Tensors();
  std::vector<std::pair<std::string, const Matrix*>> Tensors() const;

  // Throws ValidationError on inconsistent shapes.
  void Validate() const;

  bool operator==(const ToyModel& other) const;
};

ToyModel InitToyModel(const ToyModelDims& dims, const LabelSpace& labels,
                      uint64_t seed);

// Model inputs for one sample. `chunks` is chunk_width x modality_tokens.
struct ToyInput {
  Matrix chunks;
  Vector text;
};

// Bag of hashed words of the rendered prompt; words on option lines are
// prefixed with their letter. L1-normalized.
Vector PromptFeatures(const Sample& sample, size_t text_dim);

// Zero chunks when the sample has no modality payload.
ToyInput MakeInput(const ToyModel& model, const Sample& sample);

struct ActiveSteering {
  SteeringConfig config;
  const SaeParams* params = nullptr;
};

// Hidden states after the embedding (index 0) and after every layer
// (index l + 1), with the steering transform applied to the output of
// config.layer when given.
std::vector<HiddenSequence> ForwardHidden(
    const ToyModel& model, const ToyInput& input,
    const std::optional<ActiveSteering>& steering = std::nullopt);

Vector Logits(const ToyModel& model, const HiddenSequence& last);

// Softmax over the model's labels, keyed by label string.
TokenDistribution Forward(
    const ToyModel& model, const Sample& sample,
    const std::optional<ActiveSteering>& steering = std::nullopt);

// Mean cross-entropy over `samples` with gradients written into `grads`
// (same layout as the model) when non-null.
double ToyLoss(const ToyModel& model, std::span<const Sample> samples,
               ToyModel* grads = nullptr);

struct ToyTrainOptions {
  size_t batch_size = 32;
  double learning_rate = 5e-3;
  ToyModelDims dims;
};

struct ToyTrainResult {
  ToyModel model;
  std::vector<double> train_accuracy;  // after each epoch
  std::vector<double> train_loss;      // after each epoch
};

// Minibatch Adam on cross-entropy.
ToyTrainResult TrainToy(const ToyTask& task, size_t epochs, uint64_t seed,
                        const ToyTrainOptions& options = {});

// Dims that fit the task's modality width with the default chunking.
ToyModelDims DimsForTask(const ToyTask& task, ToyModelDims base = {});

// Hook-layer hidden state of every token of every sample, sample-major.
std::vector<Vector> CollectHiddenStates(const ToyModel& model,
                                        std::span<const Sample> samples);

struct FeatureSelection {
  size_t feature = 0;
  // Point-biserial correlation between the feature activation and the
  // indicator attribute == `positive_value`.
  double correlation = 0.0;
};

// The SAE feature whose hook-layer activation best separates the two values
// of `attribute` (largest |point-biserial correlation| over all tokens,
// lowest index on ties).
FeatureSelection SelectGroupFeature(const ToyModel& model,
                                    std::span<const Sample> samples,
                                    const SaeParams& sae,
                                    const std::string& attribute,
                                    const std::string& positive_value);

}  // namespace fairsteer

#endif  // FAIRSTEER_TOYMODEL_H_
