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

#ifndef CAULIFLOW_FLOW_SAMPLE_H_
#define CAULIFLOW_FLOW_SAMPLE_H_

#include <cstdint>
#include <vector>

#include "cauliflow/corpus/corpus.h"
#include "cauliflow/flow/flow.h"
#include "cauliflow/metrics/sweeps.h"

namespace cauliflow::flow {

inline constexpr double kDefaultTemperature = 0.7;

struct DurationSample {
  std::string id;
  std::vector<double> real;
  std::vector<double> durations;
  std::size_t clamped = 0;
  double temperature = 0.0;
};

// Draws z ~ N(0, T^2) per token (T = 0 gives z = 0) and maps it through the
// flow with inference-time conditioning. The noise for each utterance comes
// from Rng(seed).Split(id), so results do not depend on batching. `tables`
// supplies word features for the prompts.
std::vector<DurationSample> SampleDurations(const CauliflowModel& model,
                                            const std::vector<corpus::Utterance>& prompts,
                                            const corpus::Corpus& tables, double temperature,
                                            const metrics::RateOverrides& overrides,
                                            uint64_t seed, std::size_t batch_size = 32);

// Prompts with their durations replaced by samples.
std::vector<corpus::Utterance> SampleUtterances(const CauliflowModel& model,
                                                const std::vector<corpus::Utterance>& prompts,
                                                const corpus::Corpus& tables, double temperature,
                                                const metrics::RateOverrides& overrides,
                                                uint64_t seed);

metrics::Sampler MakeSampler(const CauliflowModel& model, const corpus::Corpus& tables);

}  // namespace cauliflow::flow

#endif  // CAULIFLOW_FLOW_SAMPLE_H_
