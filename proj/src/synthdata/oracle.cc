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

#include "cauliflow/synthdata/oracle.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/metrics/metrics.h"

namespace cauliflow::synth {

namespace {

using corpus::TokenKind;

constexpr int kQuadraturePoints = 801;
constexpr double kQuadratureReach = 8.0;

double NormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// d = max(1, floor(x + 0.5)) with x lognormal of the given mean.
Pmf RoundedLognormal(double mean, double log_sd) {
  const double mu = std::log(mean) - 0.5 * log_sd * log_sd;
  const double top = std::exp(mu + 9.0 * log_sd) + 2.0;
  auto cdf = [&](double v) { return v <= 0 ? 0.0 : NormalCdf((std::log(v) - mu) / log_sd); };
  const std::size_t n = static_cast<std::size_t>(std::ceil(top)) + 1;
  Pmf pmf(n, 0.0);
  pmf[1] = cdf(1.5);
  for (std::size_t k = 2; k < n; ++k) {
    pmf[k] = cdf(static_cast<double>(k) + 0.5) - cdf(static_cast<double>(k) - 0.5);
  }
  return pmf;
}

// d = max(thr, round(N(mean, sd^2))).
Pmf RoundedPause(const GeneratorSpec& spec) {
  const double thr = spec.pause_threshold;
  const std::size_t lo = static_cast<std::size_t>(thr);
  const std::size_t n = static_cast<std::size_t>(std::ceil(spec.pause_mean + 10.0 * spec.pause_sd)) + 1;
  Pmf pmf(std::max(n, lo + 1), 0.0);
  auto cdf = [&](double v) { return NormalCdf((v - spec.pause_mean) / spec.pause_sd); };
  pmf[lo] = cdf(thr + 0.5);
  for (std::size_t k = lo + 1; k < pmf.size(); ++k) {
    pmf[k] = cdf(static_cast<double>(k) + 0.5) - cdf(static_cast<double>(k) - 0.5);
  }
  return pmf;
}

double PauseLogit(const GeneratorSpec& spec, int grade, bool comma) {
  return spec.grade_logits[static_cast<std::size_t>(grade - 1)] +
         (comma ? spec.comma_logit_offset : 0.0);
}

}  // namespace

double PmfMean(const Pmf& pmf) {
  double m = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
  return m;
}

double PauseProbability(const GeneratorSpec& spec, int grade, bool comma, bool sentence_final,
                        std::optional<double> log_phi) {
  if (grade <= 0 || sentence_final) return 0.0;
  const double logit = PauseLogit(spec, grade, comma);
  if (log_phi) return Sigmoid(logit + spec.pause_gain * *log_phi);
  // Trapezoid rule over the N(0, sd^2) prior of log phi.
  const double sd = spec.pausing_log_sd;
  const double h = 2.0 * kQuadratureReach / (kQuadraturePoints - 1);
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < kQuadraturePoints; ++i) {
    double z = -kQuadratureReach + h * i;
    double w = std::exp(-0.5 * z * z) * ((i == 0 || i == kQuadraturePoints - 1) ? 0.5 : 1.0);
    num += w * Sigmoid(logit + spec.pause_gain * sd * z);
    den += w;
  }
  return num / den;
}

Pmf OracleConditional(const GeneratorSpec& spec, const TokenContext& c) {
  if (c.kind == TokenKind::kPhoneme) {
    if (c.phoneme < 0 || static_cast<std::size_t>(c.phoneme) >= spec.phonemes.size()) {
      throw ConfigError("oracle: phoneme index out of range");
    }
    const PhonemeSpec& p = spec.phonemes[static_cast<std::size_t>(c.phoneme)];
    double factor = 1.0;
    if (c.prepausal) factor = c.word_final ? spec.prepausal_final_factor : spec.prepausal_word_factor;
    return RoundedLognormal(p.mean * c.rate * factor, p.log_sd);
  }
  const Pmf pause = RoundedPause(spec);
  Pmf quiet = spec.no_pause_pmf;
  double q;
  if (c.paused) {
    q = *c.paused ? 1.0 : 0.0;
  } else {
    q = PauseProbability(spec, c.grade, c.comma, c.sentence_final, c.log_phi);
  }
  Pmf out(std::max(pause.size(), quiet.size()), 0.0);
  for (std::size_t k = 0; k < pause.size(); ++k) out[k] += q * pause[k];
  for (std::size_t k = 0; k < quiet.size(); ++k) out[k] += (1.0 - q) * quiet[k];
  return out;
}

std::vector<TokenContext> ContextsFor(const GeneratorSpec& spec, const corpus::Utterance& utt,
                                      const UtteranceLatents& lat) {
  if (lat.id != utt.id || lat.grades.size() != utt.words.size()) {
    throw CorpusError("latents for " + lat.id + " do not match utterance " + utt.id);
  }
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < spec.phonemes.size(); ++i) {
    index[spec.phonemes[i].symbol] = static_cast<int>(i);
  }
  const double rate = spec.speaker_rates.at(static_cast<std::size_t>(lat.speaker)) * lat.tempo;
  std::vector<TokenContext> out;
  out.reserve(utt.tokens.size());
  for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
    const corpus::Token& tok = utt.tokens[t];
    const std::size_t w = static_cast<std::size_t>(tok.word_index);
    TokenContext c;
    c.kind = tok.kind;
    if (tok.kind == TokenKind::kPhoneme) {
      auto it = index.find(tok.symbol);
      if (it == index.end()) throw CorpusError("oracle: unknown phoneme " + tok.symbol);
      c.phoneme = it->second;
      c.rate = rate;
      c.word_final = static_cast<int>(t) + 1 == utt.words[w].end_token;
      c.prepausal = lat.paused[w] != 0;
    } else {
      c.grade = lat.grades[w];
      c.comma = lat.separators[w] == ',';
      c.sentence_final = lat.separators[w] == '.';
      c.log_phi = lat.log_phi;
      c.paused = lat.paused[w] != 0;
    }
    out.push_back(c);
  }
  return out;
}

double ExpectedBoundaryPauseFraction(const GeneratorSpec& spec) {
  double p = 0.0;
  for (int g = 1; g < 4; ++g) {
    p += spec.grade_probs[static_cast<std::size_t>(g)] * PauseProbability(spec, g, false, false);
  }
  return p;
}

double ExpectedWordBoundaryPauseShare(const GeneratorSpec& spec) {
  const double c = spec.comma_probability;
  const double plain = (1.0 - c) * ExpectedBoundaryPauseFraction(spec);
  const double comma = c * ((1.0 - spec.comma_grade3_share) * PauseProbability(spec, 2, true, false) +
                            spec.comma_grade3_share * PauseProbability(spec, 3, true, false));
  return plain / (plain + comma);
}

double ExpectedSpeechRate(const GeneratorSpec& spec, std::size_t samples, uint64_t seed) {
  // Structure is sampled, durations enter through exact conditional means.
  Rng rng = Rng(seed).Split("speech-rate");
  const std::size_t n_ph = spec.phonemes.size();
  const auto lexicon = MakeLexicon(spec);
  const double quiet_mean = PmfMean(spec.no_pause_pmf);
  const double pause_mean = PmfMean(RoundedPause(spec));
  std::unordered_map<long long, double> cache;
  auto phone_mean = [&](std::size_t ph, double mean) {
    long long key = static_cast<long long>(std::llround(mean * 1e6)) * 64 + static_cast<long long>(ph);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double m = PmfMean(RoundedLognormal(mean, spec.phonemes[ph].log_sd));
    cache.emplace(key, m);
    return m;
  };
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t spk = rng.UniformInt(spec.speaker_rates.size());
    double t = spec.tempo_log_sd;
    double rate = spec.speaker_rates[spk] * std::exp(t * rng.Normal() - 0.5 * t * t);
    double log_phi = spec.pausing_log_sd * rng.Normal();
    int words = spec.min_words +
                static_cast<int>(rng.UniformInt(static_cast<uint64_t>(spec.max_words - spec.min_words + 1)));
    double frames = 0.0;
    for (int w = 0; w < words; ++w) {
      bool pause = false;
      if (w + 1 < words) {
        int grade;
        bool comma = rng.Bernoulli(spec.comma_probability);
        if (comma) {
          grade = rng.Bernoulli(spec.comma_grade3_share) ? 3 : 2;
        } else {
          double u = rng.Uniform(), acc = 0.0;
          grade = 3;
          for (int g = 0; g < 3; ++g) {
            acc += spec.grade_probs[static_cast<std::size_t>(g)];
            if (u < acc) { grade = g; break; }
          }
        }
        pause = rng.Bernoulli(PauseProbability(spec, grade, comma, false, log_phi));
      }
      frames += pause ? pause_mean : quiet_mean;
      std::vector<int> word;
      if (!lexicon.empty()) {
        word = lexicon[rng.UniformInt(lexicon.size())];
      } else {
        int n = spec.min_phonemes +
                static_cast<int>(rng.UniformInt(static_cast<uint64_t>(spec.max_phonemes - spec.min_phonemes + 1)));
        for (int k = 0; k < n; ++k) word.push_back(static_cast<int>(rng.UniformInt(n_ph)));
      }
      const int n = static_cast<int>(word.size());
      for (int k = 0; k < n; ++k) {
        std::size_t ph = static_cast<std::size_t>(word[static_cast<std::size_t>(k)]);
        double factor = 1.0;
        if (pause) factor = k + 1 == n ? spec.prepausal_final_factor : spec.prepausal_word_factor;
        // Rate grid keeps the cache small without visible bias.
        double r = std::round(rate * factor * 1e3) / 1e3;
        frames += phone_mean(ph, spec.phonemes[ph].mean * r);
      }
    }
    total += static_cast<double>(words) / (frames * corpus::kFrameSeconds);
  }
  return total / static_cast<double>(samples);
}

OracleFbeta OracleBestFbeta(const GeneratorSpec& spec, const std::vector<UtteranceLatents>& latents,
                            double beta) {
  // Every non-final separator scored by its posterior given the true latents.
  std::vector<std::pair<double, int>> scored;
  for (const UtteranceLatents& l : latents) {
    for (std::size_t w = 0; w + 1 < l.grades.size(); ++w) {
      double p = PauseProbability(spec, l.grades[w], l.separators[w] == ',', false, l.log_phi);
      scored.emplace_back(p, l.paused[w]);
    }
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t positives = 0;
  for (const auto& s : scored) positives += static_cast<std::size_t>(s.second);
  OracleFbeta best{0.0, 1.0};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].second ? tp : fp) += 1;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    double f = metrics::Fbeta(tp, fp, positives - tp, beta).f;
    if (f > best.f) best = {f, scored[i].first};
  }
  return best;
}

std::set<std::size_t> PlantedSites(const corpus::Utterance& utt, const UtteranceLatents& lat) {
  std::set<std::size_t> sites;
  for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
    const corpus::Token& tok = utt.tokens[t];
    if (tok.kind == TokenKind::kPhoneme) continue;
    if (lat.grades.at(static_cast<std::size_t>(tok.word_index)) >= 1) sites.insert(t);
  }
  return sites;
}

std::vector<double> Suitability(const GeneratorSpec& spec, const corpus::Utterance& utt,
                                const UtteranceLatents& lat) {
  std::vector<double> out(utt.tokens.size(), 0.0);
  for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
    const corpus::Token& tok = utt.tokens[t];
    if (tok.kind == TokenKind::kPhoneme) continue;
    const std::size_t w = static_cast<std::size_t>(tok.word_index);
    out[t] = PauseProbability(spec, lat.grades.at(w), lat.separators.at(w) == ',',
                              lat.separators.at(w) == '.', lat.log_phi);
  }
  return out;
}

}  // namespace cauliflow::synth
