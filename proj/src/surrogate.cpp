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

#include "advsum/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "advsum/error.hpp"
#include "advsum/util.hpp"

namespace advsum {
namespace {

constexpr std::string_view kCheckpointMagic = "advsum-surrogate";
constexpr int kCheckpointVersion = 1;

struct Forward {
  std::vector<std::vector<double>> row_embed;  // e_t
  std::vector<double> pooled;                  // p
  std::vector<double> hidden;                  // a
  std::vector<double> probs;
  double total_weight = 0.0;
};

void CheckInput(const ModelParams& params, const RelaxedInput& input) {
  if (input.rows.empty()) throw InvalidArgument("relaxed input has no rows");
  if (!input.weights.empty() && input.weights.size() != input.rows.size()) {
    throw InvalidArgument("weight count does not match row count");
  }
  for (const auto& row : input.rows) {
    for (const auto& [v, x] : row) {
      if (v >= params.vocab_size()) {
        throw InvalidArgument("row entry index " + std::to_string(v) +
                              " exceeds vocabulary width " +
                              std::to_string(params.vocab_size()));
      }
    }
  }
}

void Softmax(std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

// Pooled embedding -> hidden -> probabilities.
void Head(const ModelParams& params, Forward& f) {
  const std::size_t d = params.hidden_w.rows;
  const std::size_t h = params.hidden_w.cols;
  const std::size_t l = params.out_w.cols;
  f.hidden.assign(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    double s = params.hidden_b[j];
    for (std::size_t i = 0; i < d; ++i) s += f.pooled[i] * params.hidden_w(i, j);
    f.hidden[j] = std::tanh(s);
  }
  f.probs.assign(l, 0.0);
  for (std::size_t c = 0; c < l; ++c) {
    double s = params.out_b[c];
    for (std::size_t j = 0; j < h; ++j) s += f.hidden[j] * params.out_w(j, c);
    f.probs[c] = s;
  }
  Softmax(f.probs);
}

Forward RunForward(const ModelParams& params, const RelaxedInput& input) {
  CheckInput(params, input);
  const std::size_t d = params.embed.cols;
  Forward f;
  f.row_embed.assign(input.rows.size(), std::vector<double>(d, 0.0));
  f.pooled.assign(d, 0.0);
  for (std::size_t t = 0; t < input.rows.size(); ++t) {
    auto& e = f.row_embed[t];
    for (const auto& [v, x] : input.rows[t]) {
      auto er = params.embed.Row(v);
      for (std::size_t i = 0; i < d; ++i) e[i] += x * er[i];
    }
    double w = input.WeightAt(t);
    if (w < 0.0) throw InvalidArgument("negative pooling weight");
    f.total_weight += w;
    for (std::size_t i = 0; i < d; ++i) f.pooled[i] += w * e[i];
  }
  if (!(f.total_weight > 0.0)) throw InvalidArgument("pooling weights sum to zero");
  for (double& p : f.pooled) p /= f.total_weight;
  Head(params, f);
  return f;
}

// Gradient of the loss with respect to the pooled embedding, plus the
// intermediate gradients training needs.
struct Backward {
  std::vector<double> d_logits;
  std::vector<double> d_pre;
  std::vector<double> d_pooled;
};

Backward RunBackward(const ModelParams& params, const Forward& f, std::size_t label) {
  const std::size_t d = params.hidden_w.rows;
  const std::size_t h = params.hidden_w.cols;
  const std::size_t l = params.out_w.cols;
  Backward b;
  b.d_logits = f.probs;
  b.d_logits[label] -= 1.0;
  b.d_pre.assign(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < l; ++c) s += params.out_w(j, c) * b.d_logits[c];
    b.d_pre[j] = s * (1.0 - f.hidden[j] * f.hidden[j]);
  }
  b.d_pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < h; ++j) s += params.hidden_w(i, j) * b.d_pre[j];
    b.d_pooled[i] = s;
  }
  return b;
}

void CheckLabel(const ModelParams& params, std::size_t label) {
  if (label >= params.label_count()) {
    throw InvalidArgument("label index " + std::to_string(label) + " out of range");
  }
}

void WriteHexRow(std::ostream& out, std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", values[i]);
    if (i) out << ' ';
    out << buf;
  }
  out << '\n';
}

std::vector<double> ReadHexRow(std::istream& in, std::size_t n, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string("checkpoint truncated in ") + what);
  std::istringstream ss(line);
  std::vector<double> values;
  values.reserve(n);
  std::string tok;
  while (ss >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
      throw ParseError(std::string("checkpoint has a bad value in ") + what);
    }
    values.push_back(v);
  }
  if (values.size() != n) throw ParseError(std::string("checkpoint row width mismatch in ") + what);
  return values;
}

}  // namespace

RelaxedInput RelaxedInput::OneHot(std::span<const std::size_t> token_ids) {
  RelaxedInput in;
  in.rows.reserve(token_ids.size());
  for (std::size_t id : token_ids) in.rows.push_back({{id, 1.0}});
  return in;
}

RelaxedInput RelaxedInput::FromDense(const Matrix& rows) {
  RelaxedInput in;
  in.rows.resize(rows.rows);
  for (std::size_t t = 0; t < rows.rows; ++t) {
    for (std::size_t v = 0; v < rows.cols; ++v) {
      if (rows(t, v) != 0.0) in.rows[t].emplace_back(v, rows(t, v));
    }
  }
  return in;
}

bool RelaxedInput::OnSimplex(double tol) const {
  for (const auto& row : rows) {
    double sum = 0.0;
    for (const auto& [v, x] : row) {
      if (x < 0.0) return false;
      sum += x;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

Matrix InputGradient::Dense() const {
  Matrix m(row_scale.size(), direction.size());
  for (std::size_t t = 0; t < m.rows; ++t) {
    for (std::size_t v = 0; v < m.cols; ++v) m(t, v) = At(t, v);
  }
  return m;
}

ModelParams InitParams(std::size_t vocab_size, std::size_t label_count,
                       const TrainConfig& config) {
  if (vocab_size == 0 || label_count == 0 || config.embed_dim == 0 ||
      config.hidden_dim == 0) {
    throw InvalidArgument("model dimensions must be positive");
  }
  ModelParams p;
  p.embed = Matrix(vocab_size, config.embed_dim);
  p.hidden_w = Matrix(config.embed_dim, config.hidden_dim);
  p.hidden_b.assign(config.hidden_dim, 0.0);
  p.out_w = Matrix(config.hidden_dim, label_count);
  p.out_b.assign(label_count, 0.0);
  if (config.init_scale == 0.0) return p;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
  for (auto* m : {&p.embed, &p.hidden_w, &p.out_w}) {
    for (double& x : m->data) x = dist(rng);
  }
  return p;
}

std::vector<double> Predict(const ModelParams& params, const RelaxedInput& input) {
  return RunForward(params, input).probs;
}

std::vector<double> PredictTokens(const ModelParams& params,
                                  std::span<const std::size_t> token_ids) {
  return Predict(params, RelaxedInput::OneHot(token_ids));
}

double Loss(const ModelParams& params, const RelaxedInput& input, std::size_t label) {
  CheckLabel(params, label);
  return -std::log(Predict(params, input)[label]);
}

double LossTokens(const ModelParams& params, std::span<const std::size_t> token_ids,
                  std::size_t label) {
  return Loss(params, RelaxedInput::OneHot(token_ids), label);
}

InputGradient GradInput(const ModelParams& params, const RelaxedInput& input,
                        std::size_t label) {
  CheckLabel(params, label);
  Forward f = RunForward(params, input);
  Backward b = RunBackward(params, f, label);
  const std::size_t d = params.embed.cols;
  InputGradient g;
  g.loss = -std::log(f.probs[label]);
  g.direction.assign(params.vocab_size(), 0.0);
  for (std::size_t v = 0; v < params.vocab_size(); ++v) {
    auto er = params.embed.Row(v);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += er[i] * b.d_pooled[i];
    g.direction[v] = s;
  }
  g.row_scale.resize(input.rows.size());
  g.weight_grad.resize(input.rows.size());
  for (std::size_t t = 0; t < input.rows.size(); ++t) {
    g.row_scale[t] = input.WeightAt(t) / f.total_weight;
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s += (f.row_embed[t][i] - f.pooled[i]) * b.d_pooled[i];
    }
    g.weight_grad[t] = s / f.total_weight;
  }
  return g;
}

std::size_t Argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TrainResult Train(const std::vector<CodeSnippet>& corpus, const Vocabulary& vocab,
                  const LabelSet& labels, const TrainConfig& config) {
  if (corpus.empty()) throw InvalidArgument("cannot train on an empty corpus");
  if (config.batch_size == 0) throw InvalidArgument("batch size must be positive");
  TrainResult result;
  result.params = InitParams(vocab.size(), labels.size(), config);
  ModelParams& p = result.params;

  std::vector<std::vector<std::size_t>> encoded;
  std::vector<std::size_t> targets;
  for (const auto& s : corpus) {
    encoded.push_back(vocab.Encode(s.tokens));
    auto y = labels.Find(s.label);
    if (!y) throw InvalidArgument("label '" + s.label + "' not in the label set");
    targets.push_back(*y);
  }

  const std::size_t d = p.embed.cols;
  const std::size_t h = p.hidden_w.cols;
  const std::size_t l = p.out_w.cols;
  std::mt19937_64 rng(MixSeed(config.seed, "train-order"));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  Matrix g_embed(p.embed.rows, d);
  Matrix g_hidden_w(d, h), g_out_w(h, l);
  std::vector<double> g_hidden_b(h), g_out_b(l);
  std::vector<std::size_t> touched;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(g_hidden_w.data.begin(), g_hidden_w.data.end(), 0.0);
      std::fill(g_out_w.data.begin(), g_out_w.data.end(), 0.0);
      std::fill(g_hidden_b.begin(), g_hidden_b.end(), 0.0);
      std::fill(g_out_b.begin(), g_out_b.end(), 0.0);
      touched.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto& ids = encoded[order[k]];
        std::size_t y = targets[order[k]];
        Forward f = RunForward(p, RelaxedInput::OneHot(ids));
        Backward b = RunBackward(p, f, y);
        epoch_loss += -std::log(f.probs[y]);
        for (std::size_t j = 0; j < h; ++j) {
          for (std::size_t c = 0; c < l; ++c) g_out_w(j, c) += f.hidden[j] * b.d_logits[c];
          g_hidden_b[j] += b.d_pre[j];
        }
        for (std::size_t c = 0; c < l; ++c) g_out_b[c] += b.d_logits[c];
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < h; ++j) g_hidden_w(i, j) += f.pooled[i] * b.d_pre[j];
        }
        double inv = 1.0 / static_cast<double>(ids.size());
        for (std::size_t id : ids) {
          auto row = g_embed.Row(id);
          for (std::size_t i = 0; i < d; ++i) row[i] += inv * b.d_pooled[i];
          touched.push_back(id);
        }
      }
      double scale = config.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < p.hidden_w.data.size(); ++i) {
        p.hidden_w.data[i] -= scale * g_hidden_w.data[i];
      }
      for (std::size_t i = 0; i < p.out_w.data.size(); ++i) {
        p.out_w.data[i] -= scale * g_out_w.data[i];
      }
      for (std::size_t j = 0; j < h; ++j) p.hidden_b[j] -= scale * g_hidden_b[j];
      for (std::size_t c = 0; c < l; ++c) p.out_b[c] -= scale * g_out_b[c];
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (std::size_t id : touched) {
        auto row = g_embed.Row(id);
        auto prow = p.embed.Row(id);
        for (std::size_t i = 0; i < d; ++i) {
          prow[i] -= scale * row[i];
          row[i] = 0.0;
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(corpus.size()));
  }
  return result;
}

double Accuracy(const ModelParams& params, const std::vector<CodeSnippet>& corpus,
                const Vocabulary& vocab, const LabelSet& labels) {
  if (corpus.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : corpus) {
    auto ids = vocab.Encode(s.tokens);
    auto y = labels.Find(s.label);
    if (y && Argmax(PredictTokens(params, ids)) == *y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params,
                    const Vocabulary& vocab, const LabelSet& labels) {
  if (params.vocab_size() != vocab.size() || params.label_count() != labels.size()) {
    throw Error(ErrorCode::kMismatch, "parameters do not match vocabulary/label sizes");
  }
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "vocab_hash " << vocab.Hash() << '\n';
  out << "label_hash " << labels.Hash() << '\n';
  out << "dims " << params.embed.rows << ' ' << params.embed.cols << ' '
      << params.hidden_w.cols << ' ' << params.out_w.cols << '\n';
  for (std::size_t r = 0; r < params.embed.rows; ++r) WriteHexRow(out, params.embed.Row(r));
  for (std::size_t r = 0; r < params.hidden_w.rows; ++r) WriteHexRow(out, params.hidden_w.Row(r));
  WriteHexRow(out, params.hidden_b);
  for (std::size_t r = 0; r < params.out_w.rows; ++r) WriteHexRow(out, params.out_w.Row(r));
  WriteHexRow(out, params.out_b);
  WriteFile(path, out.str());
}

ModelParams LoadCheckpoint(const std::filesystem::path& path, const Vocabulary& vocab,
                           const LabelSet& labels) {
  std::istringstream in(ReadFile(path));
  std::string magic, key, hash;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw ParseError(path.string() + " is not a surrogate checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  if (!(in >> key >> hash) || key != "vocab_hash") throw ParseError("checkpoint lacks vocab_hash");
  if (hash != vocab.Hash()) {
    throw Error(ErrorCode::kMismatch, "checkpoint vocabulary hash does not match");
  }
  if (!(in >> key >> hash) || key != "label_hash") throw ParseError("checkpoint lacks label_hash");
  if (hash != labels.Hash()) {
    throw Error(ErrorCode::kMismatch, "checkpoint label-set hash does not match");
  }
  std::size_t v = 0, d = 0, h = 0, l = 0;
  if (!(in >> key >> v >> d >> h >> l) || key != "dims") throw ParseError("checkpoint lacks dims");
  if (v != vocab.size() || l != labels.size() || d == 0 || h == 0) {
    throw Error(ErrorCode::kMismatch, "checkpoint dimensions do not match");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  ModelParams p;
  p.embed = Matrix(v, d);
  p.hidden_w = Matrix(d, h);
  p.out_w = Matrix(h, l);
  for (std::size_t r = 0; r < v; ++r) {
    auto row = ReadHexRow(in, d, "embed");
    std::copy(row.begin(), row.end(), p.embed.Row(r).begin());
  }
  for (std::size_t r = 0; r < d; ++r) {
    auto row = ReadHexRow(in, h, "hidden_w");
    std::copy(row.begin(), row.end(), p.hidden_w.Row(r).begin());
  }
  p.hidden_b = ReadHexRow(in, h, "hidden_b");
  for (std::size_t r = 0; r < h; ++r) {
    auto row = ReadHexRow(in, l, "out_w");
    std::copy(row.begin(), row.end(), p.out_w.Row(r).begin());
  }
  p.out_b = ReadHexRow(in, l, "out_b");
  return p;
}

std::vector<double> SurrogateModel::Probabilities(
    const std::vector<std::string>& tokens) const {
  auto ids = vocab.Encode(tokens);
  return PredictTokens(params, ids);
}

std::size_t SurrogateModel::Classify(const std::vector<std::string>& tokens) const {
  return Argmax(Probabilities(tokens));
}

void SurrogateModel::Save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  WriteFile(dir / "vocab.jsonl", vocab.Serialize());
  WriteFile(dir / "labels.jsonl", labels.Serialize());
  SaveCheckpoint(dir / "surrogate.ckpt", params, vocab, labels);
}

SurrogateModel SurrogateModel::Load(const std::filesystem::path& dir) {
  SurrogateModel m;
  m.vocab = Vocabulary::Load(dir / "vocab.jsonl");
  m.labels = LabelSet::Load(dir / "labels.jsonl");
  m.params = LoadCheckpoint(dir / "surrogate.ckpt", m.vocab, m.labels);
  return m;
}

}  // namespace advsum
