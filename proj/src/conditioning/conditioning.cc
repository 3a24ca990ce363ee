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

#include "cauliflow/conditioning/conditioning.h"

#include <algorithm>
#include <cmath>

#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"

namespace cauliflow::cond {

using ad::Tensor;

std::vector<std::vector<double>> UpsampleWordFeatures(const corpus::Utterance& utt,
                                                      const corpus::Corpus& tables) {
  auto it = tables.word_features.find(utt.id);
  if (it == tables.word_features.end()) {
    throw CorpusError(utt.id + ": no word feature vectors");
  }
  const auto& rows = it->second;
  std::vector<std::vector<double>> out;
  out.reserve(utt.tokens.size());
  for (const corpus::Token& t : utt.tokens) {
    if (t.word_index < 0 || static_cast<std::size_t>(t.word_index) >= rows.size()) {
      throw CorpusError(utt.id + ": missing feature vector for word " +
                        std::to_string(t.word_index));
    }
    out.push_back(rows[static_cast<std::size_t>(t.word_index)]);
  }
  return out;
}

SpeakerTable SpeakerTable::FromCorpus(const corpus::Corpus& train) {
  SpeakerTable table;
  for (const corpus::Utterance& u : train.utterances) {
    auto it = train.speaker_vectors.find(u.id);
    if (it == train.speaker_vectors.end()) throw CorpusError(u.id + ": no speaker vector");
    table.Add(u.speaker_id, it->second);
  }
  return table;
}

void SpeakerTable::Add(const std::string& speaker_id, const std::vector<double>& vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_ || dim_ == 0) {
    throw ShapeError("speaker vector of length " + std::to_string(vector.size()) +
                     ", expected " + std::to_string(dim_));
  }
  auto& sum = sums_[speaker_id];
  sum.resize(dim_, 0.0);
  for (std::size_t k = 0; k < dim_; ++k) sum[k] += vector[k];
  std::size_t n = ++counts_[speaker_id];
  auto& mean = means_[speaker_id];
  mean.resize(dim_);
  for (std::size_t k = 0; k < dim_; ++k) mean[k] = sum[k] / static_cast<double>(n);
}

const std::vector<double>& SpeakerTable::Mean(const std::string& speaker_id) const {
  auto it = means_.find(speaker_id);
  if (it == means_.end()) throw CorpusError("unknown speaker '" + speaker_id + "'");
  return it->second;
}

std::vector<std::string> SpeakerTable::Speakers() const {
  std::vector<std::string> out;
  for (const auto& [id, v] : means_) out.push_back(id);
  return out;
}

void SpeakerTable::WriteTo(ad::Checkpoint* checkpoint) const {
  for (const auto& [id, mean] : means_) {
    checkpoint->tensors["speaker/" + id] = Tensor::Vector(mean);
  }
}

SpeakerTable SpeakerTable::ReadFrom(const ad::Checkpoint& checkpoint) {
  SpeakerTable table;
  const std::string prefix = "speaker/";
  for (const auto& [name, t] : checkpoint.tensors) {
    if (name.rfind(prefix, 0) != 0) continue;
    table.Add(name.substr(prefix.size()), t.values());
  }
  return table;
}

std::vector<double> MeanSpeakerEmbedding(const std::string& speaker_id,
                                         const SpeakerTable& table) {
  return table.Mean(speaker_id);
}

double ComputeRs(const corpus::Utterance& utt, const corpus::CorpusStats& stats) {
  return corpus::WordsPerSecond(utt) - stats.mean_speech_rate;
}

double ComputeRp(const corpus::Utterance& utt, const corpus::CorpusStats& stats,
                 double threshold, double rp_max) {
  std::size_t pauses = utt.CountPauses(threshold);
  if (pauses == 0) return rp_max;
  return static_cast<double>(utt.NumWords()) / static_cast<double>(pauses) -
         stats.mean_pause_rate;
}

void WriteStats(const corpus::CorpusStats& stats, ad::Checkpoint* checkpoint) {
  checkpoint->metadata["stats.mean_speech_rate"] = corpus::FormatDouble(stats.mean_speech_rate);
  checkpoint->metadata["stats.mean_pause_rate"] = corpus::FormatDouble(stats.mean_pause_rate);
  checkpoint->metadata["stats.pause_threshold"] = corpus::FormatDouble(stats.pause_threshold);
}

corpus::CorpusStats ReadStats(const ad::Checkpoint& checkpoint) {
  auto get = [&](const std::string& key) {
    auto it = checkpoint.metadata.find(key);
    if (it == checkpoint.metadata.end()) throw CorpusError("checkpoint lacks " + key);
    return corpus::ParseDouble(it->second);
  };
  corpus::CorpusStats s;
  s.mean_speech_rate = get("stats.mean_speech_rate");
  s.mean_pause_rate = get("stats.mean_pause_rate");
  s.pause_threshold = get("stats.pause_threshold");
  return s;
}

ConditioningBundle AssembleConditioning(const corpus::Utterance& utt,
                                        const std::vector<int>& symbol_ids,
                                        const corpus::Corpus& tables,
                                        const SpeakerTable& speakers,
                                        const corpus::CorpusStats& stats,
                                        ConditioningMode mode,
                                        const metrics::RateOverrides& overrides) {
  if (symbol_ids.size() != utt.tokens.size()) {
    throw ShapeError(utt.id + ": symbol ids do not match token count");
  }
  ConditioningBundle b;
  b.id = utt.id;
  b.symbols = symbol_ids;
  auto rows = UpsampleWordFeatures(utt, tables);
  const std::size_t p = rows.size();
  const std::size_t dw = p ? rows[0].size() : tables.word_feature_dim;
  b.w = Tensor({p, dw});
  for (std::size_t t = 0; t < p; ++t) {
    if (rows[t].size() != dw) throw ShapeError(utt.id + ": ragged word features");
    std::copy(rows[t].begin(), rows[t].end(), b.w.mutable_data().begin() + t * dw);
  }
  if (mode == ConditioningMode::kTraining) {
    auto it = tables.speaker_vectors.find(utt.id);
    if (it == tables.speaker_vectors.end()) throw CorpusError(utt.id + ": no speaker vector");
    b.spk = it->second;
    b.rs = ComputeRs(utt, stats);
    b.rp = ComputeRp(utt, stats, stats.pause_threshold);
  } else {
    b.spk = MeanSpeakerEmbedding(utt.speaker_id, speakers);
  }
  if (overrides.rs) b.rs = *overrides.rs;
  if (overrides.rp) b.rp = *overrides.rp;
  if (!std::isfinite(b.rs) || !std::isfinite(b.rp)) {
    throw NumericError(utt.id + ": non-finite rate control");
  }
  b.durations = utt.Durations();
  b.kinds = utt.Kinds();
  return b;
}

Batch Collate(const std::vector<const ConditioningBundle*>& bundles, std::size_t pad_multiple) {
  if (bundles.empty()) throw ShapeError("cannot collate an empty batch");
  if (pad_multiple == 0) pad_multiple = 1;
  Batch out;
  out.batch = bundles.size();
  std::size_t longest = 0;
  for (const auto* b : bundles) longest = std::max(longest, b->length());
  out.length = (longest + pad_multiple - 1) / pad_multiple * pad_multiple;
  if (out.length == 0) out.length = pad_multiple;
  const std::size_t B = out.batch, L = out.length;
  const std::size_t dw = bundles[0]->w.rank() == 2 ? bundles[0]->w.dim(1) : 0;
  const std::size_t ds = bundles[0]->spk.size();
  const std::size_t dx = bundles[0]->extra.rank() == 2 ? bundles[0]->extra.dim(1) : 0;
  out.ids.assign(B * L, 0);
  out.valid = Tensor({B, L});
  out.w = Tensor({B, L, dw});
  out.spk = Tensor({B, ds});
  out.rates = Tensor({B, 2});
  if (dx > 0) out.extra = Tensor({B, L, dx});
  out.durations = Tensor({B, L});
  out.phoneme = Tensor({B, L});
  for (std::size_t i = 0; i < B; ++i) {
    const ConditioningBundle& b = *bundles[i];
    const std::size_t p = b.length();
    if (b.spk.size() != ds || (p > 0 && b.w.dim(1) != dw) || b.durations.size() != p ||
        b.kinds.size() != p) {
      throw ShapeError(b.id + ": bundle does not match the batch layout");
    }
    if (dx > 0 && (b.extra.rank() != 2 || b.extra.dim(0) != p || b.extra.dim(1) != dx)) {
      throw ShapeError(b.id + ": extra channels do not match the batch layout");
    }
    out.lengths.push_back(p);
    for (std::size_t t = 0; t < p; ++t) {
      out.ids[i * L + t] = b.symbols[t];
      out.valid[i * L + t] = 1.0;
      out.durations[i * L + t] = b.durations[t];
      out.phoneme[i * L + t] = b.kinds[t] == corpus::TokenKind::kPhoneme ? 1.0 : 0.0;
      for (std::size_t k = 0; k < dw; ++k) out.w[(i * L + t) * dw + k] = b.w[t * dw + k];
      for (std::size_t k = 0; k < dx; ++k) out.extra[(i * L + t) * dx + k] = b.extra[t * dx + k];
    }
    for (std::size_t k = 0; k < ds; ++k) out.spk[i * ds + k] = b.spk[k];
    out.rates[i * 2] = b.rs;
    out.rates[i * 2 + 1] = b.rp;
  }
  return out;
}

}  // namespace cauliflow::cond
