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

#ifndef FAIRSTEER_SAE_H_
#define FAIRSTEER_SAE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairsteer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Sparse autoencoder over hidden states of width n with m >= n features:
//   a = ReLU(w_enc * h + b_enc),  h_hat = w_dec * a + b_dec.
// Column f of w_dec is the decoder direction of feature f and has unit norm.
struct SaeParams {
  Matrix w_enc;  // m x n
  Vector b_enc;  // m
  Matrix w_dec;  // n x m
  Vector b_dec;  // n

  size_t features() const { return static_cast<size_t>(w_enc.rows()); }
  size_t width() const { return static_cast<size_t>(w_enc.cols()); }

  // Unit-norm decoder column of feature f.
  Vector DecoderDirection(size_t feature) const;

  // Checks shapes, m >= n, finiteness and unit decoder columns (within
  // `norm_tolerance`). Throws ValidationError.
  void Validate(double norm_tolerance = 1e-6) const;

  bool operator==(const SaeParams& other) const;
};

// Decoder columns uniform on the unit sphere, encoder = decoder transpose,
// zero biases.
SaeParams InitSaeParams(size_t features, size_t width, uint64_t seed);

// Square SAE with an orthogonal decoder, w_enc = w_dec^T and zero biases. A
// Target clamp then sets an active feature to exactly the requested value.
SaeParams TiedOrthonormalSae(size_t width, uint64_t seed);

Vector Encode(const Vector& hidden, const SaeParams& params);
Vector Decode(const Vector& activations, const SaeParams& params);
double FeatureActivation(const Vector& hidden, size_t feature,
                         const SaeParams& params);

// Rescales every decoder column to unit Euclidean norm.
void NormalizeDecoderColumns(SaeParams& params);

struct SaeGradients {
  Matrix w_enc;
  Vector b_enc;
  Matrix w_dec;
  Vector b_dec;
};

// Mean over the columns of `batch` (n x B) of
//   ||h - decode(encode(h))||^2 + sparsity_weight * ||encode(h)||_1.
// Fills `gradients` when non-null.
double SaeLoss(const SaeParams& params, const Matrix& batch,
               double sparsity_weight, SaeGradients* gradients = nullptr);

struct SaeTrainConfig {
  double sparsity_weight = 1e-2;
  double learning_rate = 1e-2;
  size_t steps = 1000;
  size_t batch_size = 64;
  uint64_t seed = 0;
};

struct SaeCheckpoint {
  size_t step = 0;
  double loss = 0.0;
  // Mean over vectors of ||h - h_hat||^2.
  double reconstruction = 0.0;
  // Mean number of non-zero feature activations.
  double mean_l0 = 0.0;
};

struct SaeTrainResult {
  SaeParams params;
  // Full-corpus evaluation after each tenth of the steps.
  std::vector<SaeCheckpoint> trace;
};

inline constexpr size_t kSaeCheckpoints = 10;

// Minibatch Adam on SaeLoss with the learning rate decayed linearly to zero;
// decoder columns are renormalized after every step.
SaeTrainResult TrainSae(std::span<const Vector> corpus,
                        const SaeTrainConfig& config, size_t features);

// Full-corpus statistics of `params`.
SaeCheckpoint EvaluateSae(const Matrix& corpus, const SaeParams& params,
                          double sparsity_weight);

// Packs equal-width vectors as the columns of a matrix.
Matrix StackColumns(std::span<const Vector> vectors);

enum class FeatureLocation { kResidual, kMlp };

FeatureLocation ParseFeatureLocation(const std::string& text);
std::string FeatureLocationName(FeatureLocation location);

struct FeatureRegistryEntry {
  size_t feature = 0;
  std::string description;
  size_t layer = 0;
  FeatureLocation location = FeatureLocation::kResidual;

  bool operator==(const FeatureRegistryEntry&) const = default;
};

// Hand-annotated features. Descriptions are opaque strings.
struct FeatureRegistry {
  std::vector<FeatureRegistryEntry> entries;

  // Every entry must index a feature of an SAE with `features` features.
  void Validate(size_t features) const;
};

}  // namespace fairsteer

#endif  // FAIRSTEER_SAE_H_
