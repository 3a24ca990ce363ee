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

#include "cauliflow/flow/sample.h"

#include <algorithm>

#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"

namespace cauliflow::flow {

std::vector<DurationSample> SampleDurations(const CauliflowModel& model,
                                            const std::vector<corpus::Utterance>& prompts,
                                            const corpus::Corpus& tables, double temperature,
                                            const metrics::RateOverrides& overrides,
                                            uint64_t seed, std::size_t batch_size) {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (batch_size == 0) batch_size = 1;
  std::vector<cond::ConditioningBundle> bundles;
  bundles.reserve(prompts.size());
  for (const corpus::Utterance& u : prompts) {
    bundles.push_back(cond::AssembleConditioning(u, model.encoder().SymbolIds(u), tables,
                                                 model.speakers(), model.stats(),
                                                 cond::ConditioningMode::kInference, overrides));
  }
  const Rng root(seed);
  std::vector<DurationSample> out;
  out.reserve(prompts.size());
  for (std::size_t start = 0; start < bundles.size(); start += batch_size) {
    std::vector<const cond::ConditioningBundle*> chunk;
    for (std::size_t i = start; i < std::min(bundles.size(), start + batch_size); ++i) {
      chunk.push_back(&bundles[i]);
    }
    cond::Batch batch = cond::Collate(chunk, model.config().group);
    ad::Tensor z({batch.batch, batch.length});
    if (temperature > 0.0) {
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        Rng rng = root.Split(chunk[i]->id);
        for (std::size_t t = 0; t < chunk[i]->length(); ++t) {
          z[i * batch.length + t] = temperature * rng.Normal();
        }
      }
    }
    ad::Tensor y = model.Forward(batch, z);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      DurationSample s;
      s.id = chunk[i]->id;
      s.temperature = temperature;
      const std::size_t p = chunk[i]->length();
      s.real.assign(y.data().begin() + i * batch.length, y.data().begin() + i * batch.length + p);
      // Dequantization adds U[0, 1), so whole frames sit half a frame below.
      std::vector<double> shifted = s.real;
      for (double& v : shifted) v -= 0.5;
      Postprocessed pp = Postprocess(shifted, chunk[i]->kinds);
      s.durations = std::move(pp.durations);
      s.clamped = pp.clamped;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<corpus::Utterance> SampleUtterances(const CauliflowModel& model,
                                                const std::vector<corpus::Utterance>& prompts,
                                                const corpus::Corpus& tables, double temperature,
                                                const metrics::RateOverrides& overrides,
                                                uint64_t seed) {
  auto samples = SampleDurations(model, prompts, tables, temperature, overrides, seed);
  std::vector<corpus::Utterance> out = prompts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t t = 0; t < out[i].tokens.size(); ++t) {
      out[i].tokens[t].duration_frames = samples[i].durations[t];
    }
  }
  return out;
}

metrics::Sampler MakeSampler(const CauliflowModel& model, const corpus::Corpus& tables) {
  return [&model, &tables](const std::vector<corpus::Utterance>& prompts,
                           const metrics::RateOverrides& overrides, double temperature,
                           uint64_t seed) {
    return SampleUtterances(model, prompts, tables, temperature, overrides, seed);
  };
}

}  // namespace cauliflow::flow
