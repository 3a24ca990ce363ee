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

#ifndef CAULIFLOW_BASELINES_DUR_H_
#define CAULIFLOW_BASELINES_DUR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/autodiff/layers.h"
#include "cauliflow/conditioning/conditioning.h"
#include "cauliflow/conditioning/encoder.h"
#include "cauliflow/corpus/corpus.h"

namespace cauliflow::baselines {

// Deterministic per-token duration regressor: phoneme encoder plus a linear
// head, trained with L2 on globally z-scored durations. With
// pause_input = true it also reads a per-token pause label (Dur+P).
class DurModel {
 public:
  DurModel(const cond::EncoderConfig& encoder, const corpus::Inventory& inventory,
           bool pause_input, uint64_t seed);
  DurModel(const DurModel&) = delete;
  DurModel& operator=(const DurModel&) = delete;

  bool pause_input() const { return pause_input_; }
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }
  void SetNormalisation(double mean, double stddev);

  // Normalised predictions [B, L] for a batch.
  ad::Var Forward(ad::Graph& g, const cond::Batch& batch) const;

  // Real-valued (de-normalised) predictions per token. `labels` holds one
  // pause decision per word of each utterance and is required iff
  // pause_input().
  std::vector<std::vector<double>> PredictReal(
      const std::vector<corpus::Utterance>& utts,
      const std::vector<std::vector<int>>* labels = nullptr) const;

  // Prompts with durations replaced by rounded, clamped predictions.
  std::vector<corpus::Utterance> Predict(const std::vector<corpus::Utterance>& utts,
                                         const std::vector<std::vector<int>>* labels = nullptr) const;

  // Batch for `utts`; labels as for PredictReal.
  cond::Batch MakeBatch(const std::vector<const corpus::Utterance*>& utts,
                        const std::vector<const std::vector<int>*>& labels) const;

  const cond::PhonemeEncoder& encoder() const { return encoder_; }
  ad::ParameterStore& store() { return *store_; }
  const ad::ParameterStore& store() const { return *store_; }

  ad::Checkpoint ToCheckpoint() const;
  static std::unique_ptr<DurModel> FromCheckpoint(const ad::Checkpoint& checkpoint);

 private:
  bool pause_input_;
  std::unique_ptr<ad::ParameterStore> store_;
  cond::PhonemeEncoder encoder_;
  ad::Linear head_;
  double mean_ = 0.0;
  double stddev_ = 1.0;
};

// Per-token pause channel: every token carries the label of its word
// (separators belong to the word they follow).
std::vector<double> TokenPauseChannel(const corpus::Utterance& utt, const std::vector<int>& labels);

struct DurTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  double divergence_factor = 10.0;
  double pause_threshold = corpus::kDefaultPauseThreshold;
};

struct DurEpoch {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double dev_mse = 0.0;
};

struct DurTrainResult {
  double initial_dev_mse = 0.0;
  double best_dev_mse = 0.0;
  std::size_t best_epoch = 0;
  std::vector<DurEpoch> curve;
};

// Mean squared error of normalised predictions over valid tokens. Dur+P
// models read the oracle labels extracted from the targets.
double NormalisedMse(const DurModel& model, const std::vector<corpus::Utterance>& utts,
                     double pause_threshold = corpus::kDefaultPauseThreshold);

// Fits normalisation on all training tokens, then Adam on the L2 loss.
// Dur+P consumes oracle pause labels from the training targets. The
// parameters with the best dev MSE are restored at the end.
DurTrainResult TrainDur(DurModel* model, const corpus::Corpus& train, const corpus::Corpus& dev,
                        const DurTrainConfig& config,
                        const std::function<void(const DurEpoch&)>& on_epoch = {});

}  // namespace cauliflow::baselines

#endif  // CAULIFLOW_BASELINES_DUR_H_
