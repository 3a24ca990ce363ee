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

#ifndef CAULIFLOW_CONDITIONING_CONDITIONING_H_
#define CAULIFLOW_CONDITIONING_CONDITIONING_H_

#include <map>
#include <string>
#include <vector>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/autodiff/tensor.h"
#include "cauliflow/corpus/corpus.h"
#include "cauliflow/corpus/stats.h"
#include "cauliflow/metrics/sweeps.h"

namespace cauliflow::cond {

inline constexpr double kRpMax = 10.0;

// One row per token: phonemes take their word's vector, boundary and
// punctuation tokens the vector of the word they follow.
std::vector<std::vector<double>> UpsampleWordFeatures(const corpus::Utterance& utt,
                                                      const corpus::Corpus& tables);

// Mean utterance-level speaker vector per speaker id.
class SpeakerTable {
 public:
  SpeakerTable() = default;
  static SpeakerTable FromCorpus(const corpus::Corpus& train);

  void Add(const std::string& speaker_id, const std::vector<double>& vector);
  // Throws CorpusError for an unknown speaker.
  const std::vector<double>& Mean(const std::string& speaker_id) const;
  bool Contains(const std::string& speaker_id) const { return means_.count(speaker_id) > 0; }
  std::size_t dim() const { return dim_; }
  std::vector<std::string> Speakers() const;

  void WriteTo(ad::Checkpoint* checkpoint) const;
  static SpeakerTable ReadFrom(const ad::Checkpoint& checkpoint);

 private:
  std::map<std::string, std::vector<double>> sums_;
  std::map<std::string, std::vector<double>> means_;
  std::map<std::string, std::size_t> counts_;
  std::size_t dim_ = 0;
};

std::vector<double> MeanSpeakerEmbedding(const std::string& speaker_id,
                                         const SpeakerTable& table);

// Words per second minus the training mean.
double ComputeRs(const corpus::Utterance& utt, const corpus::CorpusStats& stats);
// Words per pause minus the training mean; kRpMax for pause-free utterances.
double ComputeRp(const corpus::Utterance& utt, const corpus::CorpusStats& stats,
                 double threshold, double rp_max = kRpMax);

void WriteStats(const corpus::CorpusStats& stats, ad::Checkpoint* checkpoint);
corpus::CorpusStats ReadStats(const ad::Checkpoint& checkpoint);

enum class ConditioningMode {
  // Per-utterance speaker vector, measured rs/rp.
  kTraining,
  // Mean speaker vector, rs = rp = 0 unless overridden.
  kInference,
};

struct ConditioningBundle {
  std::string id;
  std::vector<int> symbols;
  // [P, D_w]
  ad::Tensor w;
  std::vector<double> spk;
  double rs = 0.0;
  double rp = 0.0;
  // Optional per-token channels for the encoder, [P, X] or empty.
  ad::Tensor extra;
  // Token durations and kinds of the source utterance.
  std::vector<double> durations;
  std::vector<corpus::TokenKind> kinds;

  std::size_t length() const { return symbols.size(); }
};

ConditioningBundle AssembleConditioning(const corpus::Utterance& utt,
                                        const std::vector<int>& symbol_ids,
                                        const corpus::Corpus& tables,
                                        const SpeakerTable& speakers,
                                        const corpus::CorpusStats& stats,
                                        ConditioningMode mode,
                                        const metrics::RateOverrides& overrides = {});

// Right-padded batch. Length is rounded up to a multiple of pad_multiple.
struct Batch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;   // B*L, 0 at padding
  ad::Tensor valid;       // [B, L]
  ad::Tensor w;           // [B, L, D_w]
  ad::Tensor spk;         // [B, D_s]
  ad::Tensor rates;       // [B, 2] (rs, rp)
  ad::Tensor extra;       // [B, L, X] or empty
  ad::Tensor durations;   // [B, L]
  ad::Tensor phoneme;     // [B, L], 1 on phoneme tokens
  std::vector<std::size_t> lengths;
};

Batch Collate(const std::vector<const ConditioningBundle*>& bundles,
              std::size_t pad_multiple = 1);

}  // namespace cauliflow::cond

#endif  // CAULIFLOW_CONDITIONING_CONDITIONING_H_
