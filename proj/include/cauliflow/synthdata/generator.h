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

#ifndef CAULIFLOW_SYNTHDATA_GENERATOR_H_
#define CAULIFLOW_SYNTHDATA_GENERATOR_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cauliflow/corpus/corpus.h"

namespace cauliflow::synth {

struct PhonemeSpec {
  std::string symbol;
  // Mean duration in frames at unit rate, and the log-scale spread of the
  // mean-preserving lognormal noise around it.
  double mean = 8.0;
  double log_sd = 0.22;
};

// Parameters of the generative process. Every utterance is drawn as:
//
//   speaker s ~ Uniform(speakers); tempo kappa = exp(t * N - t^2 / 2);
//   pausing factor log phi ~ N(0, pausing_log_sd^2);
//   W ~ Uniform[min_words, max_words]; per word n ~ Uniform[min_phonemes,
//   max_phonemes] phonemes drawn uniformly;
//   each internal separator is "," with comma_probability, otherwise "_";
//   a break grade g in {0..3} per word (commas: 2 or 3, the last word: 0);
//   pause ~ Bernoulli(sigmoid(grade_logit[g] + comma_logit_offset * comma
//   + pause_gain * log phi)), never for grade 0 or the final ".";
//   phoneme duration = max(1, round(mean * rate[s] * kappa * L * eps)) with
//   lognormal eps, L = prepausal_final_factor on the last phoneme of a word
//   followed by a pause, prepausal_word_factor on its other phonemes;
//   separator duration = max(threshold, round(N(pause_mean, pause_sd^2)))
//   when pausing, else a draw from no_pause_pmf over {0, 1, ...}.
//
// Word features: noisy one-hot grade (4), next-is-comma flag, is-last flag,
// then noise_dims standard normals (none by default). Speaker vectors: per-speaker centre
// plus per-utterance Gaussian noise.
struct GeneratorSpec {
  uint64_t seed = 1;
  std::vector<PhonemeSpec> phonemes;
  std::vector<double> speaker_rates{0.88, 0.96, 1.04, 1.12};
  double tempo_log_sd = 0.08;
  double pausing_log_sd = 0.8;
  double pause_gain = 1.0;
  int min_words = 8;
  int max_words = 25;
  int min_phonemes = 1;
  int max_phonemes = 6;
  // Words are drawn uniformly from a fixed lexicon of this many phoneme
  // strings; 0 draws every word afresh.
  std::size_t lexicon_size = 300;
  double comma_probability = 0.085;
  std::array<double, 4> grade_probs{0.879, 0.07, 0.035, 0.016};
  // Logits for grades 1..3; grade 0 never pauses.
  std::array<double, 3> grade_logits{-3.5, -1.5, 2.5};
  double comma_grade3_share = 0.5;
  double comma_logit_offset = 4.0;
  double pause_mean = 40.0;
  double pause_sd = 8.0;
  std::vector<double> no_pause_pmf{0.7, 0.2, 0.1};
  double prepausal_word_factor = 1.25;
  double prepausal_final_factor = 1.6;
  double grade_feature_noise = 0.3;
  std::size_t noise_dims = 0;
  std::size_t speaker_dim = 192;
  double speaker_centre_sd = 1.0;
  double speaker_utterance_sd = 0.3;
  double pause_threshold = corpus::kDefaultPauseThreshold;

  // Default inventory of 30 phonemes with means spread over 4..14 frames.
  static GeneratorSpec Default();
  std::size_t WordFeatureDim() const { return 6 + noise_dims; }
  // Throws ConfigError on any invalid field.
  void Validate() const;
};

std::string SpecToJson(const GeneratorSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
GeneratorSpec SpecFromJson(const std::string& text);
GeneratorSpec LoadSpec(const std::string& path);
void SaveSpec(const std::string& path, const GeneratorSpec& spec);

// Ground-truth latent variables of one generated utterance.
struct UtteranceLatents {
  std::string id;
  int speaker = 0;
  double tempo = 1.0;
  double log_phi = 0.0;
  // Per word: break grade, separator symbol ('_', ',' or '.'), pause flag.
  std::vector<int> grades;
  std::string separators;
  std::vector<int> paused;

  bool operator==(const UtteranceLatents&) const = default;
};

struct GeneratedSplit {
  corpus::Corpus corpus;
  std::vector<UtteranceLatents> latents;
};

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 200;
};

struct GeneratedCorpus {
  GeneratedSplit train;
  GeneratedSplit dev;
  GeneratedSplit test;
};

corpus::Inventory MakeInventory(const GeneratorSpec& spec);

// Phoneme indices of every lexicon entry, from Rng(seed).Split("lexicon").
std::vector<std::vector<int>> MakeLexicon(const GeneratorSpec& spec);

// Utterances of one split are drawn from the stream Rng(seed).Split(name),
// utterance i from its child Split(i), so splits and utterances are
// independent of each other and of the split sizes.
GeneratedSplit GenerateSplit(const GeneratorSpec& spec, const std::string& name,
                             std::size_t count);
GeneratedCorpus GenerateCorpus(const GeneratorSpec& spec, const SplitSizes& sizes);

// Per-speaker centres of the speaker-vector clusters.
std::vector<std::vector<double>> SpeakerCentres(const GeneratorSpec& spec);

// "latents.txt": header "# cauliflow-latents v1", then one TAB-separated
// line per utterance: id, speaker, tempo, log_phi, grades (comma-joined),
// separators, paused flags (string of 0/1).
inline constexpr const char* kLatentsFile = "latents.txt";
inline constexpr const char* kSpecFile = "generator_spec.json";
void SaveLatents(const std::string& path, const std::vector<UtteranceLatents>& latents);
std::vector<UtteranceLatents> LoadLatents(const std::string& path);

// Writes <dir>/{train,dev,test}/ corpora with their latents and the spec.
void SaveGenerated(const std::string& dir, const GeneratorSpec& spec,
                   const GeneratedCorpus& generated);

}  // namespace cauliflow::synth

#endif  // CAULIFLOW_SYNTHDATA_GENERATOR_H_
