// Copyright 2026 The advsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// A small differentiable function-name classifier used as the white-box
// model for the attack.
//
//   e_t    = x_t . E                       (x_t: relaxed one-hot row)
//   p      = sum_t w_t e_t / sum_t w_t     (weighted mean pool)
//   a      = tanh(p . W1 + b1)
//   probs  = softmax(a . W2 + b2)
//
// Row weights default to 1. The attack uses them to fade inserted templates
// in and out continuously.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "advsum/corpus.hpp"

namespace advsum {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> Row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::span<double> Row(std::size_t r) { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct ModelParams {
  Matrix embed;     // |vocab| x d
  Matrix hidden_w;  // d x h
  std::vector<double> hidden_b;
  Matrix out_w;     // h x |labels|
  std::vector<double> out_b;

  std::size_t vocab_size() const { return embed.rows; }
  std::size_t label_count() const { return out_b.size(); }

  bool operator==(const ModelParams&) const = default;
};

struct TrainConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  /// Half-width of the uniform initializer; 0 gives all-zero parameters.
  double init_scale = 0.1;
};

/// Sparse relaxed one-hot row: (vocabulary index, mass) entries.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

struct RelaxedInput {
  std::vector<SparseRow> rows;
  /// Pooling weight per row; empty means all ones.
  std::vector<double> weights;

  static RelaxedInput OneHot(std::span<const std::size_t> token_ids);
  static RelaxedInput FromDense(const Matrix& rows);

  double WeightAt(std::size_t t) const { return weights.empty() ? 1.0 : weights[t]; }
  /// Checks the simplex invariant (entries >= 0, row sums 1 +/- tol).
  bool OnSimplex(double tol = 1e-6) const;
};

/// Gradient of the loss with respect to every row entry, in factored form:
/// d loss / d x_t[v] = row_scale[t] * direction[v]. Mean pooling makes every
/// row share one direction.
struct InputGradient {
  std::vector<double> direction;   // length |vocab|
  std::vector<double> row_scale;   // per row
  std::vector<double> weight_grad; // d loss / d w_t
  double loss = 0.0;

  double At(std::size_t t, std::size_t v) const { return row_scale[t] * direction[v]; }
  /// Materialized |rows| x |vocab| gradient matrix.
  Matrix Dense() const;
};

ModelParams InitParams(std::size_t vocab_size, std::size_t label_count,
                       const TrainConfig& config);

/// Label distribution. Throws InvalidArgument on dimension mismatch or when
/// the pooling weights sum to zero.
std::vector<double> Predict(const ModelParams& params, const RelaxedInput& input);
std::vector<double> PredictTokens(const ModelParams& params,
                                  std::span<const std::size_t> token_ids);

/// Cross-entropy -log probs[label].
double Loss(const ModelParams& params, const RelaxedInput& input, std::size_t label);
double LossTokens(const ModelParams& params, std::span<const std::size_t> token_ids,
                  std::size_t label);

InputGradient GradInput(const ModelParams& params, const RelaxedInput& input,
                        std::size_t label);

std::size_t Argmax(std::span<const double> v);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

/// Mini-batch gradient descent on cross-entropy. Single-threaded and
/// deterministic in `config.seed`.
TrainResult Train(const std::vector<CodeSnippet>& corpus, const Vocabulary& vocab,
                  const LabelSet& labels, const TrainConfig& config);

/// Fraction of `corpus` whose argmax equals its label.
double Accuracy(const ModelParams& params, const std::vector<CodeSnippet>& corpus,
                const Vocabulary& vocab, const LabelSet& labels);

/// Flat-text checkpoint with hexfloat values, recorded dimensions and the
/// vocabulary / label-set hashes.
void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params,
                    const Vocabulary& vocab, const LabelSet& labels);
/// Refuses (ErrorCode::kMismatch) when the hashes or dimensions disagree.
ModelParams LoadCheckpoint(const std::filesystem::path& path, const Vocabulary& vocab,
                           const LabelSet& labels);

/// Parameters bundled with the vocabulary and label space they index.
struct SurrogateModel {
  ModelParams params;
  Vocabulary vocab;
  LabelSet labels;

  std::vector<double> Probabilities(const std::vector<std::string>& tokens) const;
  /// Index into `labels` of the most likely label.
  std::size_t Classify(const std::vector<std::string>& tokens) const;

  /// Writes surrogate.ckpt, vocab.jsonl and labels.jsonl into `dir`.
  void Save(const std::filesystem::path& dir) const;
  static SurrogateModel Load(const std::filesystem::path& dir);
};

}  // namespace advsum
