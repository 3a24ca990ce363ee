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

#include "cauliflow/corpus/stats.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"

namespace cauliflow::corpus {

std::vector<int> ExtractPauseLabels(const Utterance& utt, double threshold) {
  std::vector<int> labels(utt.words.size(), 0);
  for (const Token& t : utt.tokens) {
    if (!IsPauseCapable(t.kind)) continue;
    if (t.word_index < 0 || t.word_index >= utt.NumWords()) continue;
    if (t.duration_frames >= threshold) labels[static_cast<std::size_t>(t.word_index)] = 1;
  }
  return labels;
}

double WordsPerSecond(const Utterance& utt) {
  double seconds = utt.DurationSeconds();
  if (!(seconds > 0.0)) {
    throw CorpusError("utterance " + utt.id + " has zero duration");
  }
  return utt.NumWords() / seconds;
}

CorpusStats ComputeCorpusStats(const std::vector<Utterance>& utterances,
                               double threshold) {
  if (utterances.empty()) throw CorpusError("cannot compute statistics of an empty split");
  CorpusStats stats;
  stats.pause_threshold = threshold;
  double rate_sum = 0.0;
  double pause_sum = 0.0;
  std::size_t pausing = 0;
  for (const Utterance& utt : utterances) {
    rate_sum += WordsPerSecond(utt);
    int s = utt.CountPauses(threshold);
    if (s > 0) {
      pause_sum += static_cast<double>(utt.NumWords()) / s;
      ++pausing;
    }
  }
  if (pausing == 0) {
    throw CorpusError("no utterance contains a pause; mean pause rate is undefined");
  }
  stats.mean_speech_rate = rate_sum / static_cast<double>(utterances.size());
  stats.mean_pause_rate = pause_sum / static_cast<double>(pausing);
  return stats;
}

std::vector<std::vector<double>> UpsampleByDurations(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& durations) {
  if (rows.size() != durations.size()) {
    throw ShapeError("upsampling needs one duration per row: " +
                     std::to_string(rows.size()) + " rows, " +
                     std::to_string(durations.size()) + " durations");
  }
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double d = durations[i];
    if (d < 0.0 || d != std::floor(d)) {
      throw CorpusError("upsampling duration must be a non-negative integer");
    }
    for (long k = 0; k < static_cast<long>(d); ++k) out.push_back(rows[i]);
  }
  return out;
}

Corpus Subset(const Corpus& corpus, const std::vector<std::string>& ids) {
  Corpus out;
  out.inventory = corpus.inventory;
  out.word_feature_dim = corpus.word_feature_dim;
  out.speaker_dim = corpus.speaker_dim;
  for (const std::string& id : ids) {
    const Utterance* utt = corpus.Find(id);
    if (!utt) throw CorpusError("unknown utterance " + id);
    out.utterances.push_back(*utt);
    auto wf = corpus.word_features.find(id);
    if (wf != corpus.word_features.end()) out.word_features[id] = wf->second;
    auto sv = corpus.speaker_vectors.find(id);
    if (sv != corpus.speaker_vectors.end()) out.speaker_vectors[id] = sv->second;
  }
  return out;
}

CorpusSplits SplitCorpus(const Corpus& corpus, uint64_t seed,
                         std::array<double, 3> ratios) {
  if (corpus.utterances.empty()) throw CorpusError("cannot split an empty corpus");
  double total = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::vector<std::string> ids;
  for (const Utterance& u : corpus.utterances) ids.push_back(u.id);
  Rng rng = Rng(seed).Split("split");
  rng.Shuffle(&ids);

  const std::size_t n = ids.size();
  std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios[0] * n)));
  std::size_t n_dev =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * n)));
  if (ratios[2] == 0.0) n_dev = n - n_train;

  // Each part keeps the corpus order.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < n; ++i) position[corpus.utterances[i].id] = i;
  auto part = [&](std::size_t from, std::size_t to) {
    std::vector<std::string> sel(ids.begin() + static_cast<long>(from),
                                 ids.begin() + static_cast<long>(to));
    std::sort(sel.begin(), sel.end(), [&](const std::string& a, const std::string& b) {
      return position[a] < position[b];
    });
    return Subset(corpus, sel);
  };
  CorpusSplits splits;
  splits.train = part(0, n_train);
  splits.dev = part(n_train, n_train + n_dev);
  splits.test = part(n_train + n_dev, n);
  return splits;
}

}  // namespace cauliflow::corpus
