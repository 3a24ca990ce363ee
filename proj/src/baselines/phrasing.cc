// Copyright (c) 2026 The Cauliflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cauliflow/baselines/phrasing.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "cauliflow/autodiff/adam.h"
#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/corpus/stats.h"
#include "cauliflow/metrics/metrics.h"

namespace cauliflow::baselines {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

constexpr const char* kModelKind = "phrasing";

struct WordBatch {
  Tensor features;  // [B, W, D]
  Tensor valid;     // [B, W]
  Tensor labels;    // [B, W]
  std::vector<std::size_t> words;
};

WordBatch MakeWordBatch(const std::vector<const corpus::Utterance*>& utts,
                        const corpus::Corpus& tables, std::size_t dim, double threshold,
                        bool with_labels) {
  WordBatch b;
  std::size_t longest = 1;
  for (const auto* u : utts) longest = std::max(longest, u->words.size());
  b.features = Tensor({utts.size(), longest, dim});
  b.valid = Tensor({utts.size(), longest});
  b.labels = Tensor({utts.size(), longest});
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const corpus::Utterance& u = *utts[i];
    auto it = tables.word_features.find(u.id);
    if (it == tables.word_features.end() || it->second.size() != u.words.size()) {
      throw CorpusError(u.id + ": word feature vectors missing or incomplete");
    }
    std::vector<int> labels;
    if (with_labels) labels = corpus::ExtractPauseLabels(u, threshold);
    for (std::size_t w = 0; w < u.words.size(); ++w) {
      const auto& row = it->second[w];
      if (row.size() != dim) throw ShapeError(u.id + ": word feature dimension mismatch");
      std::copy(row.begin(), row.end(), b.features.mutable_data().begin() + (i * longest + w) * dim);
      b.valid[i * longest + w] = 1.0;
      if (with_labels) b.labels[i * longest + w] = labels[w];
    }
    b.words.push_back(u.words.size());
  }
  return b;
}

// Sum of softplus(l) - y l over valid words.
Var BceSum(Graph& g, Var logits, const WordBatch& b) {
  Var l = g.Reshape(logits, b.valid.shape());
  Var per = g.Sub(g.Softplus(l), g.Mul(g.Input(b.labels), l));
  return g.Sum(g.Mul(per, g.Input(b.valid)));
}

double Count(const Tensor& valid) {
  double n = 0.0;
  for (double v : valid.values()) n += v;
  return n;
}

std::vector<const corpus::Utterance*> Pointers(const std::vector<corpus::Utterance>& utts,
                                               std::size_t begin, std::size_t end) {
  std::vector<const corpus::Utterance*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&utts[i]);
  return out;
}

double FAt(const std::vector<double>& p, const std::vector<int>& y, double theta, double beta) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool pred = p[i] >= theta;
    if (pred && y[i]) ++tp;
    if (pred && !y[i]) ++fp;
    if (!pred && y[i]) ++fn;
  }
  return metrics::Fbeta(tp, fp, fn, beta).f;
}

void CheckLabels(const std::vector<double>& p, const std::vector<int>& y) {
  if (p.size() != y.size()) throw ShapeError("probabilities and labels differ in length");
  if (std::find(y.begin(), y.end(), 1) == y.end()) {
    throw CorpusError("threshold selection needs at least one positive label");
  }
}

}  // namespace

PhrasingClassifier::PhrasingClassifier(const PhrasingConfig& config, std::size_t feature_dim,
                                       uint64_t seed)
    : config_(config), feature_dim_(feature_dim), store_(std::make_unique<ad::ParameterStore>()) {
  if (feature_dim == 0 || config.hidden == 0 || config.taps == 0) {
    throw ConfigError("phrasing classifier sizes must be positive");
  }
  Rng rng = Rng(seed).Split("phrasing-init");
  std::size_t in = feature_dim;
  for (std::size_t i = 0; i < config.dilations.size(); ++i) {
    convs_.emplace_back(store_.get(), "conv" + std::to_string(i), in, config.hidden, config.taps,
                        config.dilations[i], &rng);
    in = config.hidden;
  }
  head_ = ad::Linear(store_.get(), "head", in, 1, &rng);
}

void PhrasingClassifier::set_threshold(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("phrasing threshold must lie in (0, 1)");
  threshold_ = theta;
}

Var PhrasingClassifier::Logits(Graph& g, const Tensor& features, const Tensor& valid) const {
  Var x = ad::MaskTime(g, g.Input(features), valid);
  for (const auto& conv : convs_) x = ad::MaskTime(g, g.Tanh(conv(g, x)), valid);
  return head_(g, x);
}

std::vector<std::vector<double>> PhrasingClassifier::Probabilities(
    const std::vector<corpus::Utterance>& utts, const corpus::Corpus& tables) const {
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < utts.size(); start += 32) {
    auto chunk = Pointers(utts, start, std::min(utts.size(), start + 32));
    WordBatch b = MakeWordBatch(chunk, tables, feature_dim_, 0.0, false);
    Graph g(false);
    const Tensor& logits = g.value(g.Sigmoid(Logits(g, b.features, b.valid)));
    const std::size_t width = b.valid.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.emplace_back(logits.data().begin() + i * width,
                       logits.data().begin() + i * width + b.words[i]);
    }
  }
  return out;
}

std::vector<std::vector<int>> PhrasingClassifier::Decide(const std::vector<corpus::Utterance>& utts,
                                                         const corpus::Corpus& tables) const {
  return Binarise(Probabilities(utts, tables), threshold_);
}

std::vector<std::vector<int>> Binarise(const std::vector<std::vector<double>>& probabilities,
                                       double threshold) {
  std::vector<std::vector<int>> out;
  for (const auto& row : probabilities) {
    std::vector<int> d;
    for (double p : row) d.push_back(p >= threshold ? 1 : 0);
    out.push_back(std::move(d));
  }
  return out;
}

ad::Checkpoint PhrasingClassifier::ToCheckpoint() const {
  ad::Checkpoint ck = ad::MakeCheckpoint(*store_, {});
  nlohmann::json j = {{"hidden", config_.hidden},
                      {"taps", config_.taps},
                      {"dilations", config_.dilations}};
  ck.metadata["kind"] = kModelKind;
  ck.metadata["config"] = j.dump();
  ck.metadata["feature_dim"] = std::to_string(feature_dim_);
  ck.metadata["threshold"] = corpus::FormatDouble(threshold_);
  return ck;
}

std::unique_ptr<PhrasingClassifier> PhrasingClassifier::FromCheckpoint(const ad::Checkpoint& ck) {
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw CorpusError("phrasing checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (meta("kind") != kModelKind) {
    throw CorpusError("checkpoint holds a '" + meta("kind") + "' model, not a phrasing classifier");
  }
  PhrasingConfig config;
  try {
    auto j = nlohmann::json::parse(meta("config"));
    config.hidden = j.at("hidden").get<std::size_t>();
    config.taps = j.at("taps").get<std::size_t>();
    config.dilations = j.at("dilations").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("phrasing config: ") + e.what());
  }
  auto model = std::make_unique<PhrasingClassifier>(config, std::stoul(meta("feature_dim")), 0);
  model->store_->Restore(ck.tensors);
  model->set_threshold(corpus::ParseDouble(meta("threshold")));
  return model;
}

double MeanBce(const PhrasingClassifier& model, const corpus::Corpus& data, double threshold) {
  double total = 0.0, n = 0.0;
  for (std::size_t start = 0; start < data.utterances.size(); start += 32) {
    auto chunk = Pointers(data.utterances, start, std::min(data.utterances.size(), start + 32));
    WordBatch b = MakeWordBatch(chunk, data, model.feature_dim(), threshold, true);
    Graph g(false);
    total += g.value(BceSum(g, model.Logits(g, b.features, b.valid), b)).item();
    n += Count(b.valid);
  }
  if (n == 0.0) throw CorpusError("cannot score an empty split");
  return total / n;
}

PhrasingTrainResult TrainPhrasing(PhrasingClassifier* model, const corpus::Corpus& train,
                                  const corpus::Corpus& dev, const PhrasingTrainConfig& config,
                                  const std::function<void(const PhrasingEpoch&)>& on_epoch) {
  if (train.utterances.empty() || dev.utterances.empty()) {
    throw CorpusError("phrasing training needs non-empty train and dev splits");
  }
  if (config.batch_size == 0 || config.epochs == 0) {
    throw ConfigError("epochs and batch_size must be positive");
  }
  bool any = false;
  for (const auto& u : train.utterances) {
    auto l = corpus::ExtractPauseLabels(u, config.pause_threshold);
    any = any || std::find(l.begin(), l.end(), 1) != l.end();
  }
  if (!any) {
    throw CorpusError("no training word is followed by a pause of at least " +
                      std::to_string(config.pause_threshold) +
                      " frames; check the pause threshold or the durations");
  }
  PhrasingTrainResult result;
  result.initial_train_bce = MeanBce(*model, train, config.pause_threshold);
  result.best_dev_bce = MeanBce(*model, dev, config.pause_threshold);
  auto best = model->store().Snapshot();
  ad::AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  ac.clip_norm = config.clip_norm;
  ad::Adam adam(ac);
  const Rng root(config.seed);
  std::vector<std::size_t> order(train.utterances.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng = root.Split("epoch").Split(static_cast<uint64_t>(epoch));
    std::vector<std::size_t> perm = order;
    rng.Shuffle(&perm);
    double total = 0.0, n = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      std::vector<const corpus::Utterance*> chunk;
      for (std::size_t i = start; i < std::min(perm.size(), start + config.batch_size); ++i) {
        chunk.push_back(&train.utterances[perm[i]]);
      }
      WordBatch b = MakeWordBatch(chunk, train, model->feature_dim(), config.pause_threshold, true);
      model->store().ZeroGrad();
      Graph g;
      const double count = Count(b.valid);
      Var loss = g.Scale(BceSum(g, model->Logits(g, b.features, b.valid), b), 1.0 / count);
      g.Backward(loss);
      adam.Step(model->store());
      total += g.value(loss).item() * count;
      n += count;
    }
    PhrasingEpoch rec;
    rec.epoch = epoch;
    rec.train_bce = total / n;
    rec.dev_bce = MeanBce(*model, dev, config.pause_threshold);
    result.curve.push_back(rec);
    if (rec.dev_bce < result.best_dev_bce) {
      result.best_dev_bce = rec.dev_bce;
      result.best_epoch = epoch;
      best = model->store().Snapshot();
    }
    if (on_epoch) on_epoch(rec);
  }
  model->store().Restore(best);
  return result;
}

ThresholdChoice SelectThreshold(const std::vector<double>& probabilities,
                                const std::vector<int>& labels, double beta) {
  CheckLabels(probabilities, labels);
  ThresholdChoice best{0.01, -1.0};
  for (int k = 1; k <= 99; ++k) {
    const double theta = k / 100.0;
    const double f = FAt(probabilities, labels, theta, beta);
    if (f >= best.f) best = {theta, f};
  }
  return best;
}

ThresholdChoice SelectThresholdExhaustive(const std::vector<double>& probabilities,
                                          const std::vector<int>& labels, double beta) {
  CheckLabels(probabilities, labels);
  std::vector<double> candidates = probabilities;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  ThresholdChoice best{candidates.front(), -1.0};
  for (double theta : candidates) {
    const double f = FAt(probabilities, labels, theta, beta);
    if (f >= best.f) best = {theta, f};
  }
  return best;
}

double Auc(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size()) throw ShapeError("AUC inputs differ in length");
  std::vector<std::size_t> idx(probabilities.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });
  // Mid-ranks for ties.
  double rank_sum = 0.0, pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && probabilities[idx[j]] == probabilities[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        rank_sum += mid;
        pos += 1.0;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(idx.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw CorpusError("AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace cauliflow::baselines
