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

#ifndef CAULIFLOW_FLOW_FLOW_H_
#define CAULIFLOW_FLOW_FLOW_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/layers.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/conditioning/conditioning.h"
#include "cauliflow/conditioning/encoder.h"
#include "cauliflow/corpus/corpus.h"

namespace cauliflow::flow {

struct FlowConfig {
  std::size_t steps = 6;
  // Tokens regrouped into one channel vector by the time squeeze.
  std::size_t group = 4;
  std::size_t cond_channels = 16;
  std::size_t hidden = 32;
  std::size_t taps = 3;
  double log_scale_limit = 7.0;
  cond::EncoderConfig encoder;

  void Validate() const;
  std::string ToJson() const;
  static FlowConfig FromJson(const std::string& text);
};

// y = d + u with u ~ U[0, 1) per token.
std::vector<double> Dequantize(const std::vector<double>& durations, Rng* rng);

// [B, L] -> [B, L / g, g]; L must be a multiple of g.
ad::Tensor Squeeze(const ad::Tensor& x, std::size_t group);
// [B, R, g] -> [B, R * g].
ad::Tensor Unsqueeze(const ad::Tensor& x);

struct Postprocessed {
  std::vector<double> durations;
  std::size_t clamped = 0;
};

// Rounds to whole frames; phonemes are clamped to >= 1, boundary and
// punctuation tokens to >= 0.
Postprocessed Postprocess(const std::vector<double>& real,
                          const std::vector<corpus::TokenKind>& kinds);

struct FlowTerms {
  ad::Var z;               // [B, R, g], zero at padding
  ad::Var log_det;         // scalar
  ad::Var log_prior;       // scalar
  ad::Var log_likelihood;  // scalar, log_prior + log_det
  ad::Var row_log_likelihood;  // [B, 1]
  double tokens = 0.0;     // valid positions
};

// Conditional flow over per-token durations. The density direction maps
// durations to the Gaussian latent; Forward() is its exact inverse.
class CauliflowModel {
 public:
  CauliflowModel(const FlowConfig& config, const corpus::Inventory& inventory,
                 std::size_t word_dim, std::size_t speaker_dim, uint64_t seed);
  CauliflowModel(const CauliflowModel&) = delete;
  CauliflowModel& operator=(const CauliflowModel&) = delete;

  // Durations y [B, L] (L a multiple of the group size) to latents, with
  // the change-of-variables terms. Padded positions contribute nothing.
  FlowTerms Inverse(ad::Graph& g, const cond::Batch& batch, const ad::Tensor& y) const;

  // Latents z [B, L] to durations [B, L]. No gradients are recorded.
  ad::Tensor Forward(const cond::Batch& batch, const ad::Tensor& z) const;

  // Total log-density of y over valid positions.
  double LogLikelihood(const cond::Batch& batch, const ad::Tensor& y) const;

  // Log-density of each batch row.
  std::vector<double> RowLogLikelihood(const cond::Batch& batch, const ad::Tensor& y) const;

  // Sets every actnorm so that its input over the valid positions of this
  // batch has zero mean and unit variance per channel.
  void InitializeActnorm(const cond::Batch& batch, const ad::Tensor& y);

  // Context used to build inference-time conditioning.
  void SetContext(cond::SpeakerTable speakers, corpus::CorpusStats stats);
  const cond::SpeakerTable& speakers() const { return speakers_; }
  const corpus::CorpusStats& stats() const { return stats_; }

  const FlowConfig& config() const { return config_; }
  const cond::PhonemeEncoder& encoder() const { return encoder_; }
  ad::ParameterStore& store() { return *store_; }
  const ad::ParameterStore& store() const { return *store_; }
  std::size_t word_dim() const { return word_dim_; }
  std::size_t speaker_dim() const { return speaker_dim_; }

  ad::Checkpoint ToCheckpoint() const;
  static std::unique_ptr<CauliflowModel> FromCheckpoint(const ad::Checkpoint& checkpoint);

 private:
  struct Step {
    ad::Parameter* an_bias = nullptr;
    ad::Parameter* an_logs = nullptr;
    // Mixing matrix A = (lower + diag(exp(log_diag))) (upper + I), applied
    // as h A on channel rows.
    ad::Parameter* lower = nullptr;
    ad::Parameter* log_diag = nullptr;
    ad::Parameter* upper = nullptr;
    ad::Conv1dLayer conv1;
    ad::Conv1dLayer conv2;
    ad::Linear out;
  };

  ad::Var Condition(ad::Graph& g, const cond::Batch& batch) const;
  ad::Var Mixing(ad::Graph& g, const Step& s) const;
  // Coupling log-scale and shift for the passive half x_a, each [B, R, g/2].
  std::pair<ad::Var, ad::Var> Coupling(ad::Graph& g, const Step& s, ad::Var x_a, ad::Var c,
                                       const ad::Tensor& group_valid,
                                       const ad::Tensor& pad_b) const;
  FlowTerms Run(ad::Graph& g, const cond::Batch& batch, const ad::Tensor& y,
                bool init_actnorm) const;

  FlowConfig config_;
  std::size_t word_dim_;
  std::size_t speaker_dim_;
  std::unique_ptr<ad::ParameterStore> store_;
  cond::PhonemeEncoder encoder_;
  ad::Linear proj_tokens_;
  ad::Linear proj_speaker_;
  ad::Linear proj_rates_;
  std::vector<Step> steps_;
  cond::SpeakerTable speakers_;
  corpus::CorpusStats stats_;
};

}  // namespace cauliflow::flow

#endif  // CAULIFLOW_FLOW_FLOW_H_
