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

#ifndef CAULIFLOW_METRICS_METRICS_H_
#define CAULIFLOW_METRICS_METRICS_H_

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cauliflow/corpus/corpus.h"

namespace cauliflow::metrics {

// Precision, recall and F-beta as fractions in [0, 1]. Any ratio with a
// zero denominator is reported as 0.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

Prf Fbeta(double tp, double fp, double fn, double beta);

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Token positions (utterance index, token index) of detected pauses.
struct PauseEventSet {
  std::vector<std::pair<std::size_t, std::size_t>> punctuation;
  std::vector<std::pair<std::size_t, std::size_t>> word_boundary;
};

PauseEventSet PauseEvents(const std::vector<corpus::Utterance>& utterances,
                          double threshold);

// Exact-position matching of predicted against target pauses. Both sides
// must share token structure (same ids, kinds and lengths).
struct PauseMatch {
  MatchCounts punctuation;
  MatchCounts word_boundary;
};
PauseMatch MatchPauses(const std::vector<corpus::Utterance>& predicted,
                       const std::vector<corpus::Utterance>& target,
                       double threshold);

// 1-frame bins over [0, 200] plus one overflow bin. Values are rounded to
// the nearest frame; negatives land in bin 0.
inline constexpr std::size_t kHistogramFrames = 200;
std::vector<double> DurationHistogram(const std::vector<double>& durations);

// Jensen-Shannon divergence with natural log between two normalised
// histograms of equal length.
double JsdFromHistograms(const std::vector<double>& p, const std::vector<double>& q);
double Jsd(const std::vector<double>& predicted, const std::vector<double>& target);

enum class TokenFilter { kPauseCapable, kPhoneme };
std::vector<double> CollectDurations(const std::vector<corpus::Utterance>& utterances,
                                     TokenFilter filter);

// Mean words per pause over utterances with at least one pause.
double PauseRate(const std::vector<corpus::Utterance>& utterances, double threshold);
// Mean words per second over utterances.
double SpeechRate(const std::vector<corpus::Utterance>& utterances);

// q-th percentile of |predicted - target|, nearest rank: the element of
// 1-based rank min(N, floor(q * N / 100) + 1) in sorted order.
double PercentileL1(const std::vector<double>& predicted,
                    const std::vector<double>& target, double q);

struct ReportOptions {
  double threshold = corpus::kDefaultPauseThreshold;
  double beta = 0.25;
  double percentile = 99.0;
};

struct MetricReport {
  double jsd_pause = 0.0;
  double jsd_nonpause = 0.0;
  // Percent.
  Prf punctuation;
  Prf word_boundary;
  // NaN when the predicted utterances contain no pause.
  double pause_rate = 0.0;
  double target_pause_rate = 0.0;
  double speech_rate = 0.0;
  double target_speech_rate = 0.0;
  double percentile = 99.0;
  double percentile_l1 = 0.0;

  // Flat "key value" lines, fixed key order.
  std::string ToText() const;
  std::map<std::string, double> ToMap() const;
};

MetricReport Evaluate(const std::vector<corpus::Utterance>& predicted,
                      const std::vector<corpus::Utterance>& target,
                      const ReportOptions& options = {});

// Two-column count table (frame, predicted, target) per histogram bin.
std::string HistogramCsv(const std::vector<double>& predicted,
                         const std::vector<double>& target);

}  // namespace cauliflow::metrics

#endif  // CAULIFLOW_METRICS_METRICS_H_
