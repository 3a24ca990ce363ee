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

#ifndef CAULIFLOW_METRICS_SWEEPS_H_
#define CAULIFLOW_METRICS_SWEEPS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cauliflow/corpus/corpus.h"

namespace cauliflow::metrics {

struct RateOverrides {
  std::optional<double> rs;
  std::optional<double> rp;
};

// Produces durations for `prompts` (same token structure, durations
// replaced). Must be deterministic in its arguments.
using Sampler = std::function<std::vector<corpus::Utterance>(
    const std::vector<corpus::Utterance>& prompts, const RateOverrides& overrides,
    double temperature, uint64_t seed)>;

enum class RateKind { kSpeech, kPause };

struct RatePoint {
  double requested = 0.0;
  double measured_rate = 0.0;
  // measured_rate minus the rate with no override.
  double delta = 0.0;
};

struct RateResponse {
  RateKind kind = RateKind::kSpeech;
  double baseline_rate = 0.0;
  std::vector<RatePoint> points;

  double Correlation() const;
  double MeanAbsRequested() const;
  double MeanAbsDelta() const;
  std::string ToCsv() const;
};

// Sweeps rs (kSpeech) or rp (kPause) over `values`, leaving the other
// control at 0, and measures speech rate or pause rate against the
// zero-override baseline. Every call uses the same seed.
RateResponse MeasureRateResponse(const Sampler& sampler,
                                 const std::vector<corpus::Utterance>& prompts,
                                 RateKind kind, const std::vector<double>& values,
                                 double temperature, uint64_t seed,
                                 double threshold = corpus::kDefaultPauseThreshold);

struct NestingReport {
  std::vector<double> rp_values;
  // Mean pause count per prompt at each rp value.
  std::vector<double> mean_pauses;
  // For each consecutive pair, the fraction of prompts whose pause set at
  // the later value contains the set at the earlier one.
  std::vector<double> containment;
  // Fraction of pauses at the last value lying in the given allowed sites
  // (1 when no sites were supplied).
  double within_sites = 1.0;
  // Fraction of prompts whose first-insertion order agrees with the given
  // suitability ranking (1 when no ranking was supplied).
  double order_agreement = 1.0;

  double MinContainment() const;
  // Mean pause-count increase over the final step.
  double FinalIncrement() const;
  std::string ToCsv() const;
};

// Runs the sampler at `temperature` (normally 0) for each rp value in the
// given order, tracking pause positions per prompt. `sites` optionally
// lists, per prompt, the token positions where a pause is plausible;
// `suitability`, per prompt and token, ranks those positions (higher
// pauses first).
NestingReport MeasurePauseNesting(
    const Sampler& sampler, const std::vector<corpus::Utterance>& prompts,
    const std::vector<double>& rp_values, double temperature, uint64_t seed,
    const std::vector<std::set<std::size_t>>& sites = {},
    const std::vector<std::vector<double>>& suitability = {},
    double threshold = corpus::kDefaultPauseThreshold);

double Pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cauliflow::metrics

#endif  // CAULIFLOW_METRICS_SWEEPS_H_
