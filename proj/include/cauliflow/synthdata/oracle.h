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

#ifndef CAULIFLOW_SYNTHDATA_ORACLE_H_
#define CAULIFLOW_SYNTHDATA_ORACLE_H_

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "cauliflow/corpus/corpus.h"
#include "cauliflow/synthdata/generator.h"

namespace cauliflow::synth {

// Everything the generator conditions one token's duration on.
struct TokenContext {
  corpus::TokenKind kind = corpus::TokenKind::kPhoneme;
  // Phonemes.
  int phoneme = 0;
  double rate = 1.0;  // speaker rate times tempo
  bool word_final = false;
  bool prepausal = false;
  // Separators.
  int grade = 0;
  bool comma = false;
  bool sentence_final = false;
  // Marginalised over its prior when absent.
  std::optional<double> log_phi;
  // Mixture over both modes when absent.
  std::optional<bool> paused;
};

// pmf[k] = P(duration = k frames); the tail beyond the vector is < 1e-15.
using Pmf = std::vector<double>;

Pmf OracleConditional(const GeneratorSpec& spec, const TokenContext& context);
double PmfMean(const Pmf& pmf);

// P(pause after a word) given its grade and separator. With log_phi absent
// the pausing factor is integrated out by quadrature, which is the Bayes
// posterior given the word-level latents.
double PauseProbability(const GeneratorSpec& spec, int grade, bool comma,
                        bool sentence_final, std::optional<double> log_phi = std::nullopt);

// Contexts of every token of a generated utterance.
std::vector<TokenContext> ContextsFor(const GeneratorSpec& spec,
                                      const corpus::Utterance& utt,
                                      const UtteranceLatents& latents);

// Expected fraction of plain word boundaries that pause.
double ExpectedBoundaryPauseFraction(const GeneratorSpec& spec);
// Expected share of all pauses that fall at plain word boundaries.
double ExpectedWordBoundaryPauseShare(const GeneratorSpec& spec);
// Expected mean words per second, by Monte Carlo over utterance skeletons
// with exact per-token expected durations.
double ExpectedSpeechRate(const GeneratorSpec& spec, std::size_t samples = 20000,
                          uint64_t seed = 0x5eed);

struct OracleFbeta {
  double f = 0.0;
  double threshold = 0.0;
};

// Best F-beta over all thresholds of the Bayes posterior, against the
// realised pause flags of `latents`, counted per word.
OracleFbeta OracleBestFbeta(const GeneratorSpec& spec,
                            const std::vector<UtteranceLatents>& latents, double beta);

// Token positions of separators where a pause is possible (grade >= 1).
std::set<std::size_t> PlantedSites(const corpus::Utterance& utt,
                                   const UtteranceLatents& latents);
// Per token: posterior pause probability for separators, 0 elsewhere.
std::vector<double> Suitability(const GeneratorSpec& spec, const corpus::Utterance& utt,
                                const UtteranceLatents& latents);

}  // namespace cauliflow::synth

#endif  // CAULIFLOW_SYNTHDATA_ORACLE_H_
