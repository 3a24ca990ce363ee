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

#ifndef CAULIFLOW_CORPUS_STATS_H_
#define CAULIFLOW_CORPUS_STATS_H_

#include <array>
#include <cstdint>
#include <vector>

#include "cauliflow/corpus/corpus.h"

namespace cauliflow::corpus {

// One label per word: 1 iff a boundary/punctuation token following the word
// lasts at least `threshold` frames. A word with no trailing separator gets 0.
std::vector<int> ExtractPauseLabels(const Utterance& utt, double threshold);

struct CorpusStats {
  // Mean words per second over utterances.
  double mean_speech_rate = 0.0;
  // Mean words per pause over utterances with at least one pause.
  double mean_pause_rate = 0.0;
  double pause_threshold = kDefaultPauseThreshold;
};

// Words per second of one utterance; throws if it has zero duration.
double WordsPerSecond(const Utterance& utt);

CorpusStats ComputeCorpusStats(const std::vector<Utterance>& utterances,
                               double threshold = kDefaultPauseThreshold);

// Repeats rows[i] durations[i] times. Durations must be non-negative whole
// numbers.
std::vector<std::vector<double>> UpsampleByDurations(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& durations);

struct CorpusSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Seeded utterance-level partition. Ratios must be non-negative and sum
// to 1; split sizes are rounded, with the remainder going to test.
CorpusSplits SplitCorpus(const Corpus& corpus, uint64_t seed,
                         std::array<double, 3> ratios);

// Copy of `corpus` restricted to `ids` (in the given order), sidecars
// included.
Corpus Subset(const Corpus& corpus, const std::vector<std::string>& ids);

}  // namespace cauliflow::corpus

#endif  // CAULIFLOW_CORPUS_STATS_H_
