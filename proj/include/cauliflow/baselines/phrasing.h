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

#ifndef CAULIFLOW_BASELINES_PHRASING_H_
#define CAULIFLOW_BASELINES_PHRASING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/layers.h"
#include "cauliflow/corpus/corpus.h"

namespace cauliflow::baselines {

struct PhrasingConfig {
  std::size_t hidden = 32;
  std::size_t taps = 3;
  std::vector<int> dilations{1, 2};
};

// Word-level conv stack over word feature vectors with a sigmoid head
// giving the probability of a pause after each word.
class PhrasingClassifier {
 public:
  PhrasingClassifier(const PhrasingConfig& config, std::size_t feature_dim, uint64_t seed);
  PhrasingClassifier(const PhrasingClassifier&) = delete;
  PhrasingClassifier& operator=(const PhrasingClassifier&) = delete;

  // features: [B, W, D]; valid: [B, W]. Returns logits [B, W, 1].
  ad::Var Logits(ad::Graph& g, const ad::Tensor& features, const ad::Tensor& valid) const;

  // Pause probability per word.
  std::vector<std::vector<double>> Probabilities(const std::vector<corpus::Utterance>& utts,
                                                 const corpus::Corpus& tables) const;
  // Probability >= threshold().
  std::vector<std::vector<int>> Decide(const std::vector<corpus::Utterance>& utts,
                                       const corpus::Corpus& tables) const;

  double threshold() const { return threshold_; }
  void set_threshold(double theta);
  std::size_t feature_dim() const { return feature_dim_; }
  ad::ParameterStore& store() { return *store_; }
  const ad::ParameterStore& store() const { return *store_; }

  ad::Checkpoint ToCheckpoint() const;
  static std::unique_ptr<PhrasingClassifier> FromCheckpoint(const ad::Checkpoint& checkpoint);

 private:
  PhrasingConfig config_;
  std::size_t feature_dim_;
  std::unique_ptr<ad::ParameterStore> store_;
  std::vector<ad::Conv1dLayer> convs_;
  ad::Linear head_;
  double threshold_ = 0.5;
};

// Decisions for probabilities at a threshold.
std::vector<std::vector<int>> Binarise(const std::vector<std::vector<double>>& probabilities,
                                       double threshold);

struct PhrasingTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  double pause_threshold = corpus::kDefaultPauseThreshold;
};

struct PhrasingEpoch {
  std::size_t epoch = 0;
  double train_bce = 0.0;
  double dev_bce = 0.0;
};

struct PhrasingTrainResult {
  double initial_train_bce = 0.0;
  double best_dev_bce = 0.0;
  std::size_t best_epoch = 0;
  std::vector<PhrasingEpoch> curve;
};

// Mean word-level binary cross-entropy against labels extracted at the
// pause threshold.
double MeanBce(const PhrasingClassifier& model, const corpus::Corpus& data,
               double pause_threshold = corpus::kDefaultPauseThreshold);

// Throws CorpusError when the training labels contain no pause.
PhrasingTrainResult TrainPhrasing(PhrasingClassifier* model, const corpus::Corpus& train,
                                  const corpus::Corpus& dev, const PhrasingTrainConfig& config,
                                  const std::function<void(const PhrasingEpoch&)>& on_epoch = {});

struct ThresholdChoice {
  double threshold = 0.5;
  double f = 0.0;
};

// argmax of F_beta over theta in {0.01, ..., 0.99}; ties go to the higher
// theta. Throws CorpusError when labels hold no positive.
ThresholdChoice SelectThreshold(const std::vector<double>& probabilities,
                                const std::vector<int>& labels, double beta = 0.25);

// Same objective over every distinct probability as a threshold.
ThresholdChoice SelectThresholdExhaustive(const std::vector<double>& probabilities,
                                          const std::vector<int>& labels, double beta = 0.25);

// Area under the ROC curve (ties count one half).
double Auc(const std::vector<double>& probabilities, const std::vector<int>& labels);

}  // namespace cauliflow::baselines

#endif  // CAULIFLOW_BASELINES_PHRASING_H_
