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

#include "cauliflow/flow/train.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cauliflow/autodiff/adam.h"
#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/corpus/stats.h"

namespace cauliflow::flow {

using ad::Tensor;

namespace {

// Dequantized targets laid out like the batch.
Tensor BatchTargets(const cond::Batch& batch,
                    const std::vector<const cond::ConditioningBundle*>& members,
                    const Rng& noise) {
  Tensor y({batch.batch, batch.length});
  for (std::size_t i = 0; i < members.size(); ++i) {
    Rng rng = noise.Split(members[i]->id);
    std::vector<double> real = Dequantize(members[i]->durations, &rng);
    std::copy(real.begin(), real.end(), y.mutable_data().begin() + i * batch.length);
  }
  return y;
}

std::vector<std::vector<const cond::ConditioningBundle*>> Chunks(
    const std::vector<cond::ConditioningBundle>& bundles, const std::vector<std::size_t>& order,
    std::size_t batch_size) {
  std::vector<std::vector<const cond::ConditioningBundle*>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<const cond::ConditioningBundle*> chunk;
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) {
      chunk.push_back(&bundles[order[j]]);
    }
    out.push_back(std::move(chunk));
  }
  return out;
}

}  // namespace

std::vector<cond::ConditioningBundle> TrainingBundles(const CauliflowModel& model,
                                                      const corpus::Corpus& data) {
  std::vector<cond::ConditioningBundle> out;
  out.reserve(data.utterances.size());
  for (const corpus::Utterance& u : data.utterances) {
    out.push_back(cond::AssembleConditioning(u, model.encoder().SymbolIds(u), data,
                                             model.speakers(), model.stats(),
                                             cond::ConditioningMode::kTraining));
  }
  return out;
}

double MeanNll(const CauliflowModel& model, const std::vector<cond::ConditioningBundle>& bundles,
               uint64_t seed, std::size_t batch_size) {
  if (bundles.empty()) throw CorpusError("cannot score an empty split");
  std::vector<std::size_t> order(bundles.size());
  std::iota(order.begin(), order.end(), 0);
  const Rng noise = Rng(seed).Split("dequantize");
  double total = 0.0, tokens = 0.0;
  for (const auto& chunk : Chunks(bundles, order, std::max<std::size_t>(batch_size, 1))) {
    cond::Batch batch = cond::Collate(chunk, model.config().group);
    Tensor y = BatchTargets(batch, chunk, noise);
    total -= model.LogLikelihood(batch, y);
    for (std::size_t n : batch.lengths) tokens += static_cast<double>(n);
  }
  return total / tokens;
}

std::vector<double> UtteranceNll(const CauliflowModel& model,
                                 const std::vector<cond::ConditioningBundle>& bundles,
                                 uint64_t seed) {
  const Rng noise = Rng(seed).Split("dequantize");
  std::vector<double> out;
  out.reserve(bundles.size());
  for (const auto& b : bundles) {
    std::vector<const cond::ConditioningBundle*> one{&b};
    cond::Batch batch = cond::Collate(one, model.config().group);
    Tensor y = BatchTargets(batch, one, noise);
    out.push_back(-model.LogLikelihood(batch, y) / static_cast<double>(b.length()));
  }
  return out;
}

std::vector<cond::ConditioningBundle> ShuffleConditioning(
    const std::vector<cond::ConditioningBundle>& bundles, uint64_t seed) {
  Rng rng = Rng(seed).Split("shuffle-conditioning");
  const std::size_t n = bundles.size();
  std::vector<cond::ConditioningBundle> out = bundles;
  for (std::size_t i = 0; i < n; ++i) {
    cond::ConditioningBundle& b = out[i];
    const std::size_t p = b.length();
    std::vector<std::size_t> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(&perm);
    const std::size_t dw = b.w.dim(1);
    Tensor w = b.w;
    std::vector<int> symbols = b.symbols;
    for (std::size_t t = 0; t < p; ++t) {
      symbols[t] = bundles[i].symbols[perm[t]];
      for (std::size_t k = 0; k < dw; ++k) w[t * dw + k] = bundles[i].w[perm[t] * dw + k];
    }
    b.symbols = std::move(symbols);
    b.w = std::move(w);
    if (n > 1) {
      std::size_t donor = (i + 1 + rng.UniformInt(n - 1)) % n;
      b.spk = bundles[donor].spk;
      b.rs = bundles[donor].rs;
      b.rp = bundles[donor].rp;
    }
  }
  return out;
}

FlowTrainResult TrainFlow(CauliflowModel* model, const corpus::Corpus& train,
                          const corpus::Corpus& dev, const FlowTrainConfig& config,
                          const EpochCallback& on_epoch) {
  if (train.utterances.empty() || dev.utterances.empty()) {
    throw CorpusError("flow training needs non-empty train and dev splits");
  }
  if (config.batch_size == 0 || config.epochs == 0) {
    throw ConfigError("epochs and batch_size must be positive");
  }
  model->SetContext(cond::SpeakerTable::FromCorpus(train),
                    corpus::ComputeCorpusStats(train.utterances));
  const auto train_bundles = TrainingBundles(*model, train);
  const auto dev_bundles = TrainingBundles(*model, dev);
  const Rng root(config.seed);
  const uint64_t dev_seed = root.Split("dev-noise").NextU64();

  std::vector<std::size_t> order(train_bundles.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng shuffle = root.Split("epoch").Split(uint64_t{0});
    std::vector<std::size_t> first = order;
    shuffle.Shuffle(&first);
    auto chunk = Chunks(train_bundles, first, config.batch_size).front();
    cond::Batch batch = cond::Collate(chunk, model->config().group);
    model->InitializeActnorm(batch, BatchTargets(batch, chunk, root.Split("actnorm-noise")));
  }

  FlowTrainResult result;
  result.initial_dev_nll = MeanNll(*model, dev_bundles, dev_seed);
  result.best_dev_nll = result.initial_dev_nll;
  auto best = model->store().Snapshot();
  const double limit = std::abs(result.initial_dev_nll) * config.divergence_factor;

  ad::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  adam_config.clip_norm = config.clip_norm;
  ad::Adam adam(adam_config);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng = root.Split("epoch").Split(static_cast<uint64_t>(epoch));
    std::vector<std::size_t> perm = order;
    epoch_rng.Shuffle(&perm);
    const Rng noise = epoch_rng.Split("dequantize");
    double total = 0.0, tokens = 0.0;
    for (const auto& chunk : Chunks(train_bundles, perm, config.batch_size)) {
      cond::Batch batch = cond::Collate(chunk, model->config().group);
      Tensor y = BatchTargets(batch, chunk, noise);
      model->store().ZeroGrad();
      ad::Graph g;
      FlowTerms terms = model->Inverse(g, batch, y);
      ad::Var loss = g.Scale(terms.log_likelihood, -1.0 / terms.tokens);
      const double value = g.value(loss).item();
      if (!std::isfinite(value) || value > limit) {
        throw TrainingError("flow training diverged in epoch " + std::to_string(epoch) +
                            ": batch NLL " + std::to_string(value) + " exceeds " +
                            std::to_string(limit) + " (initial dev NLL " +
                            std::to_string(result.initial_dev_nll) +
                            "); lower the learning rate");
      }
      g.Backward(loss);
      adam.Step(model->store());
      total += value * terms.tokens;
      tokens += terms.tokens;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = total / tokens;
    rec.dev_nll = MeanNll(*model, dev_bundles, dev_seed);
    result.curve.push_back(rec);
    if (rec.dev_nll < result.best_dev_nll) {
      result.best_dev_nll = rec.dev_nll;
      result.best_epoch = epoch;
      best = model->store().Snapshot();
    }
    if (on_epoch) on_epoch(rec);
  }
  model->store().Restore(best);
  return result;
}

}  // namespace cauliflow::flow
