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

#include "fairsteer/toymodel.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fairsteer/error.h"

namespace fairsteer {

namespace {

constexpr const char* kOccupations[] = {"doctor", "engineer", "nurse",
                                        "teacher", "chef", "lawyer"};

double Phi(double x) { return x / std::sqrt(1.0 + x * x); }

double PhiPrime(double x) {
  const double s = 1.0 + x * x;
  return 1.0 / (s * std::sqrt(s));
}

Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

uint64_t Fnv1a(const std::string& text) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

ToyTask GenerateTask(double bias_strength, size_t n_samples,
                     size_t content_dim, uint64_t seed,
                     const ToyTaskOptions& options) {
  Require(std::isfinite(bias_strength) && bias_strength >= 0.0 &&
              bias_strength <= 1.0,
          "bias strength must lie in [0, 1]");
  Require(n_samples >= 2 && n_samples % 2 == 0,
          "toy tasks need an even, non-zero sample count");
  Require(content_dim >= 1, "content dimension must be positive");
  Require(options.content_noise >= 0.0 && options.spurious_noise >= 0.0,
          "noise levels must be non-negative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick_occupation(
      0, std::size(kOccupations) - 1);
  std::bernoulli_distribution coin(0.5);

  const LabelSpace labels({"A", "B"});
  const size_t half = n_samples / 2;
  const auto aligned = static_cast<size_t>(
      std::llround(static_cast<double>(half) * (1.0 + bias_strength) / 2.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  std::vector<Sample> samples;
  samples.reserve(n_samples);
  for (size_t gold = 0; gold < 2; ++gold) {
    // A pairs with male, B with female.
    const Gender associated = gold == 0 ? Gender::kMale : Gender::kFemale;
    std::vector<Gender> genders(half, OppositeGender(associated));
    std::fill_n(genders.begin(), aligned, associated);
    std::shuffle(genders.begin(), genders.end(), rng);

    for (size_t i = 0; i < half; ++i) {
      Vector latent(static_cast<Eigen::Index>(content_dim));
      double sum = 0.0;
      do {
        for (auto& v : latent) v = normal(rng);
        sum = latent.sum();
      } while (sum == 0.0);
      // The latent law is symmetric, so flipping conditions on the label.
      if ((gold == 0) != (sum > 0.0)) latent = -latent;

      std::vector<double> modality;
      modality.reserve(content_dim + kSpuriousDim);
      for (const double v : latent) {
        modality.push_back(v + options.content_noise * normal(rng));
      }
      const double code = genders[i] == Gender::kMale ? 1.0 : -1.0;
      for (size_t k = 0; k < kSpuriousDim; ++k) {
        modality.push_back(code * options.spurious_scale * inv_sqrt2 +
                           options.spurious_noise * normal(rng));
      }

      const std::string occupation = kOccupations[pick_occupation(rng)];
      Sample sample;
      sample.question = std::string(kCaptionQuestion);
      sample.label_space = labels;
      sample.gold = gold;
      sample.question_type = QuestionType::kMultipleChoice;
      sample.option_texts = {"the " + occupation + " in the first scene",
                             "the " + occupation + " in the second scene"};
      if (options.text_leak) sample.option_texts[gold] += ", as described";
      sample.groups["gender"] = GenderName(genders[i]);
      sample.occupation = occupation;
      sample.modality = std::move(modality);
      sample.adversarial_meta = AdversarialMeta{
          genders[i], coin(rng) ? Gender::kMale : Gender::kFemale};
      samples.push_back(std::move(sample));
    }
  }
  std::shuffle(samples.begin(), samples.end(), rng);
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i].id = "toy-" + std::to_string(seed) + "-" + std::to_string(i);
  }

  ToyTask task;
  task.samples = std::move(samples);
  task.bias_strength = bias_strength;
  task.content_dim = content_dim;
  task.seed = seed;
  task.options = options;
  return task;
}

double SpuriousLabelCorrelation(const ToyTask& task) {
  Require(!task.samples.empty(), "empty task");
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& sample : task.samples) {
    const double x =
        ParseGender(sample.groups.at("gender")) == Gender::kMale ? 1.0 : -1.0;
    const double y = sample.gold == 0 ? 1.0 : -1.0;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double n = static_cast<double>(task.samples.size());
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  Require(vx > 0 && vy > 0, "correlation undefined for a constant column");
  return cov / std::sqrt(vx * vy);
}

std::vector<std::pair<std::string, Matrix*>> ToyModel::Tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (size_t j = 0; j < chunk_embed.size(); ++j) {
    out.emplace_back("chunk_embed." + std::to_string(j), &chunk_embed[j]);
  }
  out.emplace_back("text_embed", &text_embed);
  out.emplace_back("position", &position);
  for (size_t l = 0; l < layer_w.size(); ++l) {
    out.emplace_back("layer_w." + std::to_string(l), &layer_w[l]);
    out.emplace_back("layer_b." + std::to_string(l), &layer_b[l]);
  }
  out.emplace_back("readout_w", &readout_w);
  out.emplace_back("readout_b", &readout_b);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ToyModel::Tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, tensor] : const_cast<ToyModel*>(this)->Tensors()) {
    out.emplace_back(name, tensor);
  }
  return out;
}

void ToyModel::Validate() const {
  const auto n = static_cast<Eigen::Index>(dims.width);
  const auto k = static_cast<Eigen::Index>(labels.size());
  Require(dims.width >= 1 && dims.layers >= 1 && dims.chunk_width >= 1 &&
              dims.modality_tokens >= 1 && dims.text_dim >= 1,
          "toy model dimensions must be positive");
  Require(dims.hook_layer < dims.layers, "hook layer out of range");
  Require(labels.size() >= 2, "toy model needs at least two labels");
  Require(chunk_embed.size() == dims.modality_tokens,
          "one chunk embedding per modality token expected");
  for (const auto& e : chunk_embed) {
    Require(e.rows() == n &&
                e.cols() == static_cast<Eigen::Index>(dims.chunk_width),
            "chunk embedding has the wrong shape");
  }
  Require(text_embed.rows() == n &&
              text_embed.cols() == static_cast<Eigen::Index>(dims.text_dim),
          "text embedding has the wrong shape");
  Require(position.rows() == n &&
              position.cols() ==
                  static_cast<Eigen::Index>(dims.sequence_length()),
          "position embedding has the wrong shape");
  Require(layer_w.size() == dims.layers && layer_b.size() == dims.layers,
          "one weight and bias per layer expected");
  for (size_t l = 0; l < dims.layers; ++l) {
    Require(layer_w[l].rows() == n && layer_w[l].cols() == n,
            "layer weight has the wrong shape");
    Require(layer_b[l].rows() == n && layer_b[l].cols() == 1,
            "layer bias has the wrong shape");
  }
  Require(readout_w.rows() == k && readout_w.cols() == n,
          "readout weight has the wrong shape");
  Require(readout_b.rows() == k && readout_b.cols() == 1,
          "readout bias has the wrong shape");
  for (const auto& [name, tensor] : Tensors()) {
    Require(tensor->allFinite(), "tensor " + name + " has non-finite entries");
  }
}

bool ToyModel::operator==(const ToyModel& other) const {
  if (dims != other.dims || labels != other.labels) return false;
  const auto a = Tensors();
  const auto b = other.Tensors();
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const Matrix& x = *a[i].second;
    const Matrix& y = *b[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
  }
  return true;
}

ToyModel InitToyModel(const ToyModelDims& dims, const LabelSpace& labels,
                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(dims.width);
  const auto chunk = static_cast<Eigen::Index>(dims.chunk_width);
  ToyModel model;
  model.dims = dims;
  model.labels = labels;
  for (size_t j = 0; j < dims.modality_tokens; ++j) {
    model.chunk_embed.push_back(
        RandomMatrix(n, chunk, 1.0 / std::sqrt(static_cast<double>(chunk)), rng));
  }
  model.text_embed =
      RandomMatrix(n, static_cast<Eigen::Index>(dims.text_dim), 1.0, rng);
  model.position = RandomMatrix(
      n, static_cast<Eigen::Index>(dims.sequence_length()), 0.5, rng);
  const double layer_scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (size_t l = 0; l < dims.layers; ++l) {
    model.layer_w.push_back(RandomMatrix(n, n, layer_scale, rng));
    model.layer_b.push_back(Matrix::Zero(n, 1));
  }
  model.readout_w = RandomMatrix(static_cast<Eigen::Index>(labels.size()), n,
                                 layer_scale, rng);
  model.readout_b = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), 1);
  model.Validate();
  return model;
}

Vector PromptFeatures(const Sample& sample, size_t text_dim) {
  Require(text_dim >= 1, "text feature dimension must be positive");
  Vector features = Vector::Zero(static_cast<Eigen::Index>(text_dim));
  std::istringstream lines(RenderPrompt(sample));
  std::string line;
  size_t words = 0;
  while (std::getline(lines, line)) {
    std::string prefix;
    size_t start = 0;
    if (line.size() >= 3 && std::isupper(static_cast<unsigned char>(line[0])) &&
        line[1] == '.' && line[2] == ' ') {
      prefix = std::string(1, line[0]) + ":";
      start = 3;
    }
    std::string word;
    auto flush = [&]() {
      if (word.empty()) return;
      const uint64_t bucket = Fnv1a(prefix + word) % text_dim;
      features(static_cast<Eigen::Index>(bucket)) += 1.0;
      ++words;
      word.clear();
    };
    for (size_t i = start; i < line.size(); ++i) {
      const auto c = static_cast<unsigned char>(line[i]);
      if (std::isalnum(c) || c == '\'') {
        word += static_cast<char>(std::tolower(c));
      } else {
        flush();
      }
    }
    flush();
  }
  if (words > 0) features /= static_cast<double>(words);
  return features;
}

ToyInput MakeInput(const ToyModel& model, const Sample& sample) {
  const auto chunk = static_cast<Eigen::Index>(model.dims.chunk_width);
  const auto tokens = static_cast<Eigen::Index>(model.dims.modality_tokens);
  ToyInput input;
  input.chunks = Matrix::Zero(chunk, tokens);
  if (sample.modality) {
    const auto& modality = *sample.modality;
    const size_t expected_tokens =
        (modality.size() + model.dims.chunk_width - 1) / model.dims.chunk_width;
    Require(expected_tokens == model.dims.modality_tokens,
            "sample '" + sample.id + "' has a modality vector of length " +
                std::to_string(modality.size()) +
                ", the model expects " +
                std::to_string(model.dims.modality_dim()));
    for (size_t i = 0; i < modality.size(); ++i) {
      Require(std::isfinite(modality[i]),
              "sample '" + sample.id + "' has a non-finite modality value");
      input.chunks(static_cast<Eigen::Index>(i % model.dims.chunk_width),
                   static_cast<Eigen::Index>(i / model.dims.chunk_width)) =
          modality[i];
    }
  }
  input.text = PromptFeatures(sample, model.dims.text_dim);
  return input;
}

namespace {

// The residual stream is carried at sqrt(width) times the parameter scale:
// embeddings are multiplied by it and layer inputs and the readout divide
// it back out.
double ResidualScale(const ToyModel& model) {
  return std::sqrt(static_cast<double>(model.dims.width));
}

HiddenSequence Embed(const ToyModel& model, const ToyInput& input) {
  const auto T = static_cast<Eigen::Index>(model.dims.sequence_length());
  const double scale = ResidualScale(model);
  HiddenSequence h(static_cast<Eigen::Index>(model.dims.width), T);
  h.col(0) = scale * (model.text_embed * input.text + model.position.col(0));
  for (Eigen::Index j = 0; j + 1 < T; ++j) {
    h.col(j + 1) =
        scale * (model.chunk_embed[static_cast<size_t>(j)] * input.chunks.col(j) +
                 model.position.col(j + 1));
  }
  return h;
}

void ApplyLayer(const ToyModel& model, size_t layer, HiddenSequence& h) {
  const double scale = ResidualScale(model);
  const Matrix pre = (model.layer_w[layer] * h / scale).colwise() +
                     model.layer_b[layer].col(0);
  h += scale * pre.unaryExpr(&Phi);
}

void CheckSteering(const ToyModel& model, const ActiveSteering& steering) {
  Require(steering.params != nullptr, "steering requires SAE parameters");
  Require(steering.params->width() == model.dims.width,
          "SAE width " + std::to_string(steering.params->width()) +
              " does not match model width " +
              std::to_string(model.dims.width));
  Require(steering.config.layer < model.dims.layers,
          "steering layer " + std::to_string(steering.config.layer) +
              " out of range");
}

}  // namespace

std::vector<HiddenSequence> ForwardHidden(
    const ToyModel& model, const ToyInput& input,
    const std::optional<ActiveSteering>& steering) {
  if (steering) CheckSteering(model, *steering);
  std::vector<HiddenSequence> states;
  states.reserve(model.dims.layers + 1);
  HiddenSequence h = Embed(model, input);
  states.push_back(h);
  for (size_t l = 0; l < model.dims.layers; ++l) {
    ApplyLayer(model, l, h);
    if (steering && steering->config.layer == l) {
      h = Steer(h, steering->config, *steering->params);
    }
    states.push_back(h);
  }
  return states;
}

Vector Logits(const ToyModel& model, const HiddenSequence& last) {
  return model.readout_w * last.rowwise().mean() / ResidualScale(model) +
         model.readout_b.col(0);
}

TokenDistribution Forward(const ToyModel& model, const Sample& sample,
                          const std::optional<ActiveSteering>& steering) {
  if (steering) CheckSteering(model, *steering);
  const ToyInput input = MakeInput(model, sample);
  HiddenSequence h = Embed(model, input);
  for (size_t l = 0; l < model.dims.layers; ++l) {
    ApplyLayer(model, l, h);
    if (steering && steering->config.layer == l) {
      h = Steer(h, steering->config, *steering->params);
    }
  }
  const Vector logits = Logits(model, h);
  const double top = logits.maxCoeff();
  const Vector weights = (logits.array() - top).exp().matrix();
  const double total = weights.sum();
  TokenDistribution dist;
  for (size_t i = 0; i < model.labels.size(); ++i) {
    dist.probabilities.emplace(model.labels[i],
                               weights(static_cast<Eigen::Index>(i)) / total);
  }
  return dist;
}

namespace {

ToyModel ZerosLike(const ToyModel& model) {
  ToyModel zeros = model;
  for (auto& [name, tensor] : zeros.Tensors()) tensor->setZero();
  return zeros;
}

struct BatchEval {
  double loss = 0.0;
  size_t correct = 0;
};

// Runs the whole batch at once: token-wise layers see an n x (B*T) matrix.
BatchEval EvaluateBatch(const ToyModel& model, std::span<const Sample> samples,
                        ToyModel* grads) {
  Require(!samples.empty(), "empty batch");
  const auto n = static_cast<Eigen::Index>(model.dims.width);
  const auto T = static_cast<Eigen::Index>(model.dims.sequence_length());
  const auto B = static_cast<Eigen::Index>(samples.size());

  std::vector<ToyInput> inputs;
  inputs.reserve(samples.size());
  Matrix h(n, B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Sample& sample = samples[static_cast<size_t>(b)];
    Require(model.labels.Contains(sample.gold),
            "sample '" + sample.id + "' has a gold label outside the model");
    inputs.push_back(MakeInput(model, sample));
    h.middleCols(b * T, T) = Embed(model, inputs.back());
  }

  const double scale = ResidualScale(model);
  std::vector<Matrix> hidden{h};
  std::vector<Matrix> pre;
  for (size_t l = 0; l < model.dims.layers; ++l) {
    pre.push_back((model.layer_w[l] * h / scale).colwise() + model.layer_b[l].col(0));
    h += scale * pre.back().unaryExpr(&Phi);
    hidden.push_back(h);
  }

  Matrix pooled(n, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    pooled.col(b) = h.middleCols(b * T, T).rowwise().mean() / scale;
  }
  const Matrix logits =
      (model.readout_w * pooled).colwise() + model.readout_b.col(0);

  BatchEval result;
  Matrix d_logits(logits.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto gold = static_cast<Eigen::Index>(samples[static_cast<size_t>(b)].gold);
    const double top = logits.col(b).maxCoeff();
    const Vector weights = (logits.col(b).array() - top).exp().matrix();
    const double total = weights.sum();
    result.loss += std::log(total) + top - logits(gold, b);
    Eigen::Index argmax = 0;
    logits.col(b).maxCoeff(&argmax);
    if (argmax == gold) ++result.correct;
    d_logits.col(b) = weights / total;
    d_logits(gold, b) -= 1.0;
  }
  result.loss /= static_cast<double>(B);
  if (grads == nullptr) return result;

  d_logits /= static_cast<double>(B);
  grads->readout_w += d_logits * pooled.transpose();
  grads->readout_b += d_logits.rowwise().sum();
  const Matrix d_pooled = model.readout_w.transpose() * d_logits;
  Matrix d_h(n, B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    d_h.middleCols(b * T, T) =
        (d_pooled.col(b) / (static_cast<double>(T) * scale)).replicate(1, T);
  }
  for (size_t l = model.dims.layers; l-- > 0;) {
    const Matrix d_pre = scale * d_h.cwiseProduct(pre[l].unaryExpr(&PhiPrime));
    grads->layer_w[l] += d_pre * hidden[l].transpose() / scale;
    grads->layer_b[l] += d_pre.rowwise().sum();
    d_h += model.layer_w[l].transpose() * d_pre / scale;
  }
  d_h *= scale;
  for (Eigen::Index b = 0; b < B; ++b) {
    const ToyInput& input = inputs[static_cast<size_t>(b)];
    grads->text_embed += d_h.col(b * T) * input.text.transpose();
    grads->position += d_h.middleCols(b * T, T);
    for (Eigen::Index j = 0; j + 1 < T; ++j) {
      grads->chunk_embed[static_cast<size_t>(j)] +=
          d_h.col(b * T + j + 1) * input.chunks.col(j).transpose();
    }
  }
  return result;
}

}  // namespace

double ToyLoss(const ToyModel& model, std::span<const Sample> samples,
               ToyModel* grads) {
  if (grads != nullptr) *grads = ZerosLike(model);
  return EvaluateBatch(model, samples, grads).loss;
}

ToyModelDims DimsForTask(const ToyTask& task, ToyModelDims base) {
  Require(base.chunk_width >= 1, "chunk width must be positive");
  base.modality_tokens =
      (task.modality_dim() + base.chunk_width - 1) / base.chunk_width;
  return base;
}

ToyTrainResult TrainToy(const ToyTask& task, size_t epochs, uint64_t seed,
                        const ToyTrainOptions& options) {
  Require(epochs >= 1, "toy training needs at least one epoch");
  Require(options.batch_size >= 1, "batch size must be positive");
  Require(options.learning_rate > 0.0, "learning rate must be positive");
  Require(task.samples.size() >= 2, "toy task has too few samples");
  const LabelSpace& labels = task.samples.front().label_space;
  {
    std::vector<bool> seen(labels.size(), false);
    for (const auto& sample : task.samples) seen[sample.gold] = true;
    Require(std::count(seen.begin(), seen.end(), true) >= 2,
            "toy task is degenerate: only one gold label present");
  }

  ToyTrainResult result;
  result.model = InitToyModel(DimsForTask(task, options.dims), labels, seed);
  ToyModel& model = result.model;

  ToyModel first = ZerosLike(model);
  ToyModel second = ZerosLike(model);
  ToyModel grads = ZerosLike(model);
  auto params = model.Tensors();
  auto m1 = first.Tensors();
  auto m2 = second.Tensors();
  auto g = grads.Tensors();

  std::mt19937_64 rng(seed ^ 0x70f70f70f70f70fULL);
  std::vector<size_t> order(task.samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<Sample> batch;
  size_t step = 0;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  for (size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += options.batch_size) {
      const size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      for (size_t i = start; i < end; ++i) batch.push_back(task.samples[order[i]]);
      for (auto& [name, tensor] : g) tensor->setZero();
      const double loss = EvaluateBatch(model, batch, &grads).loss;
      if (!std::isfinite(loss)) {
        throw ValidationError("toy training diverged in epoch " +
                              std::to_string(epoch));
      }
      ++step;
      const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (size_t t = 0; t < params.size(); ++t) {
        Matrix& p = *params[t].second;
        Matrix& a = *m1[t].second;
        Matrix& v = *m2[t].second;
        const Matrix& grad = *g[t].second;
        a = kBeta1 * a + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
        p.array() -= options.learning_rate * (a.array() / bias1) /
                     ((v.array() / bias2).sqrt() + kEps);
      }
    }
    const BatchEval eval = EvaluateBatch(model, task.samples, nullptr);
    if (!std::isfinite(eval.loss)) {
      throw ValidationError("toy training diverged in epoch " +
                            std::to_string(epoch));
    }
    result.train_loss.push_back(eval.loss);
    result.train_accuracy.push_back(static_cast<double>(eval.correct) /
                                    static_cast<double>(task.samples.size()));
  }
  return result;
}

std::vector<Vector> CollectHiddenStates(const ToyModel& model,
                                        std::span<const Sample> samples) {
  std::vector<Vector> corpus;
  corpus.reserve(samples.size() * model.dims.sequence_length());
  for (const auto& sample : samples) {
    const auto states = ForwardHidden(model, MakeInput(model, sample));
    const HiddenSequence& hook = states[model.dims.hook_layer + 1];
    for (Eigen::Index t = 0; t < hook.cols(); ++t) corpus.push_back(hook.col(t));
  }
  return corpus;
}

FeatureSelection SelectGroupFeature(const ToyModel& model,
                                    std::span<const Sample> samples,
                                    const SaeParams& sae,
                                    const std::string& attribute,
                                    const std::string& positive_value) {
  Require(sae.width() == model.dims.width, "SAE width does not match model");
  Require(!samples.empty(), "feature selection needs samples");
  const auto m = static_cast<Eigen::Index>(sae.features());
  const double tokens = static_cast<double>(model.dims.sequence_length());

  Vector sum = Vector::Zero(m), sum_sq = Vector::Zero(m), sum_xy = Vector::Zero(m);
  double count = 0.0, positives = 0.0;
  for (const auto& sample : samples) {
    const auto it = sample.groups.find(attribute);
    Require(it != sample.groups.end(),
            "sample '" + sample.id + "' lacks attribute '" + attribute + "'");
    const double y = it->second == positive_value ? 1.0 : 0.0;
    const auto states = ForwardHidden(model, MakeInput(model, sample));
    const HiddenSequence& hook = states[model.dims.hook_layer + 1];
    const Matrix act =
        ((sae.w_enc * hook).colwise() + sae.b_enc).cwiseMax(0.0);
    sum += act.rowwise().sum();
    sum_sq += act.cwiseAbs2().rowwise().sum();
    sum_xy += y * act.rowwise().sum();
    count += tokens;
    positives += y * tokens;
  }
  const double p = positives / count;
  Require(p > 0.0 && p < 1.0,
          "attribute '" + attribute + "' takes a single value in the samples");

  FeatureSelection best;
  double best_abs = -1.0;
  for (Eigen::Index f = 0; f < m; ++f) {
    const double mean = sum(f) / count;
    const double var = sum_sq(f) / count - mean * mean;
    if (var <= 1e-15) continue;
    const double cov = sum_xy(f) / count - mean * p;
    const double r = cov / std::sqrt(var * p * (1.0 - p));
    if (std::abs(r) > best_abs) {
      best_abs = std::abs(r);
      best.feature = static_cast<size_t>(f);
      best.correlation = r;
    }
  }
  Require(best_abs >= 0.0, "no SAE feature varies over the samples");
  return best;
}

}  // namespace fairsteer
