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

#ifndef CAULIFLOW_FLOW_TRAIN_H_
#define CAULIFLOW_FLOW_TRAIN_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "cauliflow/conditioning/conditioning.h"
#include "cauliflow/corpus/corpus.h"
#include "cauliflow/flow/flow.h"

namespace cauliflow::flow {

// Training-mode bundles (per-utterance speaker vector, measured rs/rp) for
// every utterance of `data`, which also supplies the sidecar tables.
std::vector<cond::ConditioningBundle> TrainingBundles(const CauliflowModel& model,
                                                      const corpus::Corpus& data);

// Mean negative log-likelihood per token, with dequantization noise drawn
// per utterance from `seed`.
double MeanNll(const CauliflowModel& model, const std::vector<cond::ConditioningBundle>& bundles,
               uint64_t seed, std::size_t batch_size = 32);

// Per-utterance mean NLL per token, same noise as MeanNll.
std::vector<double> UtteranceNll(const CauliflowModel& model,
                                 const std::vector<cond::ConditioningBundle>& bundles,
                                 uint64_t seed);

// Copies with the conditioning broken: symbols and word-feature rows
// permuted within each utterance, speaker vector and rate controls taken
// from another utterance. Durations are kept.
std::vector<cond::ConditioningBundle> ShuffleConditioning(
    const std::vector<cond::ConditioningBundle>& bundles, uint64_t seed);

struct FlowTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  // Training aborts once a batch NLL exceeds |initial| times this factor.
  double divergence_factor = 10.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double dev_nll = 0.0;
};

struct FlowTrainResult {
  double initial_dev_nll = 0.0;
  double best_dev_nll = 0.0;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> curve;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam on the mean per-token NLL. Actnorm is initialised from the first
// batch; the parameters with the best dev NLL are restored at the end.
// Sets the model's speaker table and rate statistics from `train`.
// Throws TrainingError on divergence.
FlowTrainResult TrainFlow(CauliflowModel* model, const corpus::Corpus& train,
                          const corpus::Corpus& dev, const FlowTrainConfig& config,
                          const EpochCallback& on_epoch = {});

}  // namespace cauliflow::flow

#endif  // CAULIFLOW_FLOW_TRAIN_H_
