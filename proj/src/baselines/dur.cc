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

#include "cauliflow/baselines/dur.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cauliflow/autodiff/adam.h"
#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/corpus/stats.h"
#include "cauliflow/flow/flow.h"

namespace cauliflow::baselines {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

constexpr std::size_t kPredictBatch = 32;

cond::EncoderConfig WithPauseChannel(cond::EncoderConfig c, bool pause_input) {
  c.extra_channels = pause_input ? 1 : 0;
  return c;
}

Var MaskedSquaredError(Graph& g, Var pred, const cond::Batch& batch, double mean,
                       double stddev, double* tokens) {
  Tensor target = batch.durations;
  double n = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = batch.valid[i] != 0.0 ? (target[i] - mean) / stddev : 0.0;
    n += batch.valid[i];
  }
  Var diff = g.Mul(g.Sub(pred, g.Input(target)), g.Input(batch.valid));
  *tokens = n;
  return g.Sum(g.Mul(diff, diff));
}

}  // namespace

std::vector<double> TokenPauseChannel(const corpus::Utterance& utt, const std::vector<int>& labels) {
  if (labels.size() != utt.words.size()) {
    throw ShapeError(utt.id + ": " + std::to_string(labels.size()) + " pause labels for " +
                     std::to_string(utt.words.size()) + " words");
  }
  std::vector<double> out;
  out.reserve(utt.tokens.size());
  for (const corpus::Token& t : utt.tokens) {
    out.push_back(labels.at(static_cast<std::size_t>(t.word_index)) ? 1.0 : 0.0);
  }
  return out;
}

DurModel::DurModel(const cond::EncoderConfig& encoder, const corpus::Inventory& inventory,
                   bool pause_input, uint64_t seed)
    : pause_input_(pause_input), store_(std::make_unique<ad::ParameterStore>()) {
  Rng rng = Rng(seed).Split("dur-init");
  encoder_ = cond::PhonemeEncoder(store_.get(), "encoder", inventory,
                                  WithPauseChannel(encoder, pause_input), &rng);
  head_ = ad::Linear(store_.get(), "head", encoder.embed_dim, 1, &rng);
}

void DurModel::SetNormalisation(double mean, double stddev) {
  if (!std::isfinite(mean) || !(stddev > 0.0)) {
    throw NumericError("duration normalisation needs a finite mean and positive spread");
  }
  mean_ = mean;
  stddev_ = stddev;
}

cond::Batch DurModel::MakeBatch(const std::vector<const corpus::Utterance*>& utts,
                                const std::vector<const std::vector<int>*>& labels) const {
  std::vector<cond::ConditioningBundle> bundles(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const corpus::Utterance& u = *utts[i];
    cond::ConditioningBundle& b = bundles[i];
    b.id = u.id;
    b.symbols = encoder_.SymbolIds(u);
    b.w = Tensor({u.tokens.size(), 0});
    b.durations = u.Durations();
    b.kinds = u.Kinds();
    if (pause_input_) {
      if (i >= labels.size() || labels[i] == nullptr) {
        throw ConfigError("Dur+P needs pause labels for " + u.id);
      }
      b.extra = Tensor({u.tokens.size(), 1}, TokenPauseChannel(u, *labels[i]));
    }
  }
  std::vector<const cond::ConditioningBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  return cond::Collate(ptrs, 1);
}

Var DurModel::Forward(Graph& g, const cond::Batch& batch) const {
  Var h = encoder_.Encode(g, batch.ids, batch.valid, batch.extra);
  return g.Reshape(head_(g, h), {batch.batch, batch.length});
}

std::vector<std::vector<double>> DurModel::PredictReal(
    const std::vector<corpus::Utterance>& utts, const std::vector<std::vector<int>>* labels) const {
  if (pause_input_ && (labels == nullptr || labels->size() != utts.size())) {
    throw ConfigError("Dur+P prediction needs one label vector per utterance");
  }
  std::vector<std::vector<double>> out;
  out.reserve(utts.size());
  for (std::size_t start = 0; start < utts.size(); start += kPredictBatch) {
    std::vector<const corpus::Utterance*> chunk;
    std::vector<const std::vector<int>*> chunk_labels;
    for (std::size_t i = start; i < std::min(utts.size(), start + kPredictBatch); ++i) {
      chunk.push_back(&utts[i]);
      chunk_labels.push_back(labels ? &(*labels)[i] : nullptr);
    }
    cond::Batch batch = MakeBatch(chunk, chunk_labels);
    Graph g(false);
    const Tensor& pred = g.value(Forward(g, batch));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      std::vector<double> row(batch.lengths[i]);
      for (std::size_t t = 0; t < row.size(); ++t) {
        row[t] = pred[i * batch.length + t] * stddev_ + mean_;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<corpus::Utterance> DurModel::Predict(const std::vector<corpus::Utterance>& utts,
                                                 const std::vector<std::vector<int>>* labels) const {
  auto real = PredictReal(utts, labels);
  std::vector<corpus::Utterance> out = utts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto pp = flow::Postprocess(real[i], out[i].Kinds());
    for (std::size_t t = 0; t < out[i].tokens.size(); ++t) {
      out[i].tokens[t].duration_frames = pp.durations[t];
    }
  }
  return out;
}

ad::Checkpoint DurModel::ToCheckpoint() const {
  ad::Checkpoint ck = ad::MakeCheckpoint(*store_, {});
  ck.metadata["kind"] = pause_input_ ? "durp" : "dur";
  cond::EncoderConfig enc = encoder_.config();
  enc.extra_channels = 0;
  ck.metadata["encoder"] = enc.ToJson();
  ck.metadata["inventory"] = corpus::FormatInventory(encoder_.inventory());
  ck.metadata["norm.mean"] = corpus::FormatDouble(mean_);
  ck.metadata["norm.std"] = corpus::FormatDouble(stddev_);
  return ck;
}

std::unique_ptr<DurModel> DurModel::FromCheckpoint(const ad::Checkpoint& ck) {
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw CorpusError("duration checkpoint lacks '" + key + "'");
    return it->second;
  };
  const std::string& kind = meta("kind");
  if (kind != "dur" && kind != "durp") {
    throw CorpusError("checkpoint holds a '" + kind + "' model, not Dur or Dur+P");
  }
  auto model = std::make_unique<DurModel>(cond::EncoderConfig::FromJson(meta("encoder")),
                                          corpus::ParseInventory(meta("inventory")),
                                          kind == "durp", 0);
  model->store_->Restore(ck.tensors);
  model->SetNormalisation(corpus::ParseDouble(meta("norm.mean")),
                          corpus::ParseDouble(meta("norm.std")));
  return model;
}

double NormalisedMse(const DurModel& model, const std::vector<corpus::Utterance>& utts,
                     double pause_threshold) {
  if (utts.empty()) throw CorpusError("cannot score an empty split");
  double total = 0.0, tokens = 0.0;
  for (std::size_t start = 0; start < utts.size(); start += kPredictBatch) {
    std::vector<const corpus::Utterance*> chunk;
    std::vector<std::vector<int>> labels;
    for (std::size_t i = start; i < std::min(utts.size(), start + kPredictBatch); ++i) {
      chunk.push_back(&utts[i]);
      labels.push_back(corpus::ExtractPauseLabels(utts[i], pause_threshold));
    }
    std::vector<const std::vector<int>*> label_ptrs;
    for (const auto& l : labels) label_ptrs.push_back(&l);
    cond::Batch batch = model.MakeBatch(chunk, label_ptrs);
    Graph g(false);
    double n = 0.0;
    Var sse = MaskedSquaredError(g, model.Forward(g, batch), batch, model.mean(), model.stddev(), &n);
    total += g.value(sse).item();
    tokens += n;
  }
  return total / tokens;
}

DurTrainResult TrainDur(DurModel* model, const corpus::Corpus& train, const corpus::Corpus& dev,
                        const DurTrainConfig& config,
                        const std::function<void(const DurEpoch&)>& on_epoch) {
  if (train.utterances.empty() || dev.utterances.empty()) {
    throw CorpusError("duration training needs non-empty train and dev splits");
  }
  if (config.batch_size == 0 || config.epochs == 0) {
    throw ConfigError("epochs and batch_size must be positive");
  }
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const corpus::Utterance& u : train.utterances) {
    for (const corpus::Token& t : u.tokens) {
      sum += t.duration_frames;
      sq += t.duration_frames * t.duration_frames;
      n += 1.0;
    }
  }
  const double mean = sum / n;
  model->SetNormalisation(mean, std::sqrt(std::max(sq / n - mean * mean, 1e-12)));

  std::vector<std::vector<int>> labels;
  for (const corpus::Utterance& u : train.utterances) {
    labels.push_back(corpus::ExtractPauseLabels(u, config.pause_threshold));
  }

  DurTrainResult result;
  result.initial_dev_mse = NormalisedMse(*model, dev.utterances, config.pause_threshold);
  result.best_dev_mse = result.initial_dev_mse;
  auto best = model->store().Snapshot();
  const double limit = std::max(result.initial_dev_mse, 1.0) * config.divergence_factor;

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
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      std::vector<const corpus::Utterance*> chunk;
      std::vector<const std::vector<int>*> chunk_labels;
      for (std::size_t i = start; i < std::min(perm.size(), start + config.batch_size); ++i) {
        chunk.push_back(&train.utterances[perm[i]]);
        chunk_labels.push_back(&labels[perm[i]]);
      }
      cond::Batch batch = model->MakeBatch(chunk, chunk_labels);
      model->store().ZeroGrad();
      Graph g;
      double count = 0.0;
      Var sse = MaskedSquaredError(g, model->Forward(g, batch), batch, model->mean(),
                                   model->stddev(), &count);
      Var loss = g.Scale(sse, 1.0 / count);
      const double value = g.value(loss).item();
      if (!std::isfinite(value) || value > limit) {
        throw TrainingError("duration training diverged in epoch " + std::to_string(epoch) +
                            ": batch MSE " + std::to_string(value) + " exceeds " +
                            std::to_string(limit) + "; lower the learning rate");
      }
      g.Backward(loss);
      adam.Step(model->store());
      total += value * count;
      tokens += count;
    }
    DurEpoch rec;
    rec.epoch = epoch;
    rec.train_mse = total / tokens;
    rec.dev_mse = NormalisedMse(*model, dev.utterances, config.pause_threshold);
    result.curve.push_back(rec);
    if (rec.dev_mse < result.best_dev_mse) {
      result.best_dev_mse = rec.dev_mse;
      result.best_epoch = epoch;
      best = model->store().Snapshot();
    }
    if (on_epoch) on_epoch(rec);
  }
  model->store().Restore(best);
  return result;
}

}  // namespace cauliflow::baselines
