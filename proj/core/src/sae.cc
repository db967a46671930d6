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

#include "fairsteer/sae.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fairsteer/error.h"

namespace fairsteer {

Vector SaeParams::DecoderDirection(size_t feature) const {
  Require(feature < features(), "feature index " + std::to_string(feature) +
                                    " out of range for an SAE with " +
                                    std::to_string(features()) + " features");
  return w_dec.col(static_cast<Eigen::Index>(feature));
}

void SaeParams::Validate(double norm_tolerance) const {
  const Eigen::Index m = w_enc.rows();
  const Eigen::Index n = w_enc.cols();
  Require(m > 0 && n > 0, "SAE dimensions must be positive");
  Require(m >= n, "SAE must be overcomplete (m >= n)");
  Require(b_enc.size() == m, "b_enc must have m entries");
  Require(w_dec.rows() == n && w_dec.cols() == m, "w_dec must be n x m");
  Require(b_dec.size() == n, "b_dec must have n entries");
  Require(w_enc.allFinite() && b_enc.allFinite() && w_dec.allFinite() &&
              b_dec.allFinite(),
          "SAE parameters must be finite");
  for (Eigen::Index f = 0; f < m; ++f) {
    Require(std::abs(w_dec.col(f).norm() - 1.0) <= norm_tolerance,
            "decoder column " + std::to_string(f) + " is not unit norm");
  }
}

bool SaeParams::operator==(const SaeParams& other) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(w_enc, other.w_enc) && same(b_enc, other.b_enc) &&
         same(w_dec, other.w_dec) && same(b_dec, other.b_dec);
}

SaeParams InitSaeParams(size_t features, size_t width, uint64_t seed) {
  Require(width >= 1 && features >= width,
          "SAE needs width >= 1 and features >= width");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(features);
  const auto n = static_cast<Eigen::Index>(width);
  SaeParams params;
  params.w_dec = Matrix(n, m);
  for (Eigen::Index f = 0; f < m; ++f) {
    for (Eigen::Index i = 0; i < n; ++i) params.w_dec(i, f) = normal(rng);
  }
  NormalizeDecoderColumns(params);
  params.w_enc = params.w_dec.transpose();
  params.b_enc = Vector::Zero(m);
  params.b_dec = Vector::Zero(n);
  return params;
}

SaeParams TiedOrthonormalSae(size_t width, uint64_t seed) {
  Require(width >= 1, "SAE width must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(width);
  Matrix gaussian(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) gaussian(i, j) = normal(rng);
  }
  SaeParams params;
  params.w_dec = Eigen::HouseholderQR<Matrix>(gaussian).householderQ();
  params.w_enc = params.w_dec.transpose();
  params.b_enc = Vector::Zero(n);
  params.b_dec = Vector::Zero(n);
  return params;
}

Vector Encode(const Vector& hidden, const SaeParams& params) {
  Require(static_cast<size_t>(hidden.size()) == params.width(),
          "hidden vector has width " + std::to_string(hidden.size()) +
              ", SAE expects " + std::to_string(params.width()));
  return (params.w_enc * hidden + params.b_enc).cwiseMax(0.0);
}

Vector Decode(const Vector& activations, const SaeParams& params) {
  Require(static_cast<size_t>(activations.size()) == params.features(),
          "activation vector has length " +
              std::to_string(activations.size()) + ", SAE has " +
              std::to_string(params.features()) + " features");
  return params.w_dec * activations + params.b_dec;
}

double FeatureActivation(const Vector& hidden, size_t feature,
                         const SaeParams& params) {
  Require(feature < params.features(),
          "feature index " + std::to_string(feature) + " out of range");
  Require(static_cast<size_t>(hidden.size()) == params.width(),
          "hidden vector width does not match the SAE");
  const auto f = static_cast<Eigen::Index>(feature);
  const double pre = params.w_enc.row(f).dot(hidden) + params.b_enc(f);
  return std::max(pre, 0.0);
}

void NormalizeDecoderColumns(SaeParams& params) {
  for (Eigen::Index f = 0; f < params.w_dec.cols(); ++f) {
    const double norm = params.w_dec.col(f).norm();
    Require(norm > 0.0 && std::isfinite(norm),
            "decoder column " + std::to_string(f) + " collapsed");
    params.w_dec.col(f) /= norm;
  }
}

double SaeLoss(const SaeParams& params, const Matrix& batch,
               double sparsity_weight, SaeGradients* gradients) {
  Require(static_cast<size_t>(batch.rows()) == params.width(),
          "batch width does not match the SAE");
  Require(batch.cols() > 0, "empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.cols());

  const Matrix pre = (params.w_enc * batch).colwise() + params.b_enc;
  const Matrix act = pre.cwiseMax(0.0);
  const Matrix residual =
      ((params.w_dec * act).colwise() + params.b_dec) - batch;
  const double loss =
      inv_b * (residual.squaredNorm() + sparsity_weight * act.sum());

  if (gradients != nullptr) {
    const Matrix d_out = (2.0 * inv_b) * residual;
    gradients->b_dec = d_out.rowwise().sum();
    gradients->w_dec = d_out * act.transpose();
    Matrix d_pre = params.w_dec.transpose() * d_out;
    d_pre.array() += sparsity_weight * inv_b;
    d_pre = d_pre.cwiseProduct(
        (pre.array() > 0.0).cast<double>().matrix());
    gradients->w_enc = d_pre * batch.transpose();
    gradients->b_enc = d_pre.rowwise().sum();
  }
  return loss;
}

Matrix StackColumns(std::span<const Vector> vectors) {
  Require(!vectors.empty(), "cannot stack an empty list of vectors");
  const Eigen::Index n = vectors.front().size();
  Matrix out(n, static_cast<Eigen::Index>(vectors.size()));
  for (size_t i = 0; i < vectors.size(); ++i) {
    Require(vectors[i].size() == n, "vectors differ in width (index " +
                                        std::to_string(i) + ")");
    out.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  return out;
}

SaeCheckpoint EvaluateSae(const Matrix& corpus, const SaeParams& params,
                          double sparsity_weight) {
  const Matrix pre = (params.w_enc * corpus).colwise() + params.b_enc;
  const Matrix act = pre.cwiseMax(0.0);
  const Matrix residual = ((params.w_dec * act).colwise() + params.b_dec) -
                          corpus;
  const double inv_n = 1.0 / static_cast<double>(corpus.cols());
  SaeCheckpoint checkpoint;
  checkpoint.reconstruction = residual.squaredNorm() * inv_n;
  checkpoint.loss = checkpoint.reconstruction + sparsity_weight * act.sum() * inv_n;
  checkpoint.mean_l0 =
      static_cast<double>((act.array() > 0.0).count()) * inv_n;
  return checkpoint;
}

namespace {

// Adam moment estimates for one parameter block.
template <typename T>
struct AdamSlot {
  T first;
  T second;

  explicit AdamSlot(const T& like)
      : first(T::Zero(like.rows(), like.cols())),
        second(T::Zero(like.rows(), like.cols())) {}

  void Step(T& param, const T& grad, double lr, double bias1, double bias2) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    first = kBeta1 * first + (1.0 - kBeta1) * grad;
    second = kBeta2 * second + (1.0 - kBeta2) * grad.cwiseAbs2();
    param.array() -= lr * (first.array() / bias1) /
                     ((second.array() / bias2).sqrt() + kEps);
  }
};

}  // namespace

SaeTrainResult TrainSae(std::span<const Vector> corpus,
                        const SaeTrainConfig& config, size_t features) {
  Require(!corpus.empty(), "SAE training corpus is empty");
  Require(config.steps >= 1, "SAE training needs at least one step");
  Require(config.batch_size >= 1, "SAE batch size must be at least one");
  Require(config.sparsity_weight >= 0.0, "sparsity weight must be >= 0");
  Require(config.learning_rate > 0.0, "learning rate must be positive");

  const Matrix data = StackColumns(corpus);
  const auto width = static_cast<size_t>(data.rows());
  const auto count = static_cast<size_t>(data.cols());

  SaeTrainResult result;
  result.params = InitSaeParams(features, width, config.seed);
  SaeParams& p = result.params;

  AdamSlot<Matrix> w_enc_slot(p.w_enc), w_dec_slot(p.w_dec);
  AdamSlot<Vector> b_enc_slot(p.b_enc), b_dec_slot(p.b_dec);

  std::mt19937_64 rng(config.seed ^ 0x5ae5ae5ae5ae5ae5ULL);
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  size_t cursor = 0;

  const size_t batch_size = std::min(config.batch_size, count);
  Matrix batch(static_cast<Eigen::Index>(width),
               static_cast<Eigen::Index>(batch_size));
  SaeGradients grads;
  size_t next_checkpoint = 1;

  for (size_t step = 1; step <= config.steps; ++step) {
    for (size_t j = 0; j < batch_size; ++j) {
      if (cursor == count) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.col(static_cast<Eigen::Index>(j)) =
          data.col(static_cast<Eigen::Index>(order[cursor++]));
    }
    const double loss = SaeLoss(p, batch, config.sparsity_weight, &grads);
    if (!std::isfinite(loss)) {
      throw ValidationError("SAE training diverged at step " +
                            std::to_string(step));
    }

    // Only the part of each decoder gradient tangent to the unit sphere.
    for (Eigen::Index f = 0; f < p.w_dec.cols(); ++f) {
      grads.w_dec.col(f) -= grads.w_dec.col(f).dot(p.w_dec.col(f)) * p.w_dec.col(f);
    }
    const double lr = config.learning_rate *
                      (1.0 - static_cast<double>(step - 1) /
                                 static_cast<double>(config.steps));
    const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(step));
    w_enc_slot.Step(p.w_enc, grads.w_enc, lr, bias1, bias2);
    b_enc_slot.Step(p.b_enc, grads.b_enc, lr, bias1, bias2);
    w_dec_slot.Step(p.w_dec, grads.w_dec, lr, bias1, bias2);
    b_dec_slot.Step(p.b_dec, grads.b_dec, lr, bias1, bias2);
    NormalizeDecoderColumns(p);

    // Checkpoint k of 10 lands on step ceil(k * steps / 10).
    while (next_checkpoint <= kSaeCheckpoints &&
           step * kSaeCheckpoints >= next_checkpoint * config.steps) {
      SaeCheckpoint checkpoint = EvaluateSae(data, p, config.sparsity_weight);
      checkpoint.step = step;
      if (!std::isfinite(checkpoint.loss)) {
        throw ValidationError("SAE loss became non-finite at step " +
                              std::to_string(step));
      }
      result.trace.push_back(checkpoint);
      ++next_checkpoint;
    }
  }
  return result;
}

FeatureLocation ParseFeatureLocation(const std::string& text) {
  if (text == "residual") return FeatureLocation::kResidual;
  if (text == "mlp") return FeatureLocation::kMlp;
  throw ValidationError("unknown feature location '" + text +
                        "' (expected residual or mlp)");
}

std::string FeatureLocationName(FeatureLocation location) {
  return location == FeatureLocation::kResidual ? "residual" : "mlp";
}

void FeatureRegistry::Validate(size_t features) const {
  for (const auto& entry : entries) {
    Require(entry.feature < features,
            "registry feature " + std::to_string(entry.feature) +
                " out of range for an SAE with " + std::to_string(features) +
                " features");
  }
}

}  // namespace fairsteer
