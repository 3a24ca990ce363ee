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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/corpus/stats.h"
#include "cauliflow/metrics/metrics.h"
#include "cauliflow/synthdata/generator.h"
#include "cauliflow/synthdata/oracle.h"

namespace cauliflow::synth {
namespace {

namespace fs = std::filesystem;
using corpus::TokenKind;

std::string ReadFile(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cauliflow_synth_" + name);
  fs::remove_all(p);
  return p;
}

const GeneratedSplit& BigSplit() {
  static const GeneratedSplit split = GenerateSplit(GeneratorSpec::Default(), "train", 4000);
  return split;
}

TEST(GeneratorSpec, JsonRoundTrip) {
  GeneratorSpec spec = GeneratorSpec::Default();
  spec.seed = 77;
  spec.pause_mean = 35;
  GeneratorSpec back = SpecFromJson(SpecToJson(spec));
  EXPECT_EQ(SpecToJson(back), SpecToJson(spec));
  EXPECT_EQ(back.phonemes.size(), 30u);
}

TEST(GeneratorSpec, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(SpecFromJson("{\"sed\": 3}"), ConfigError);
  EXPECT_THROW(SpecFromJson("{\"comma_probability\": 1.5}"), ConfigError);
  EXPECT_THROW(SpecFromJson("{\"grade_probs\": [0.5, 0.2, 0.2, 0.2]}"), ConfigError);
  EXPECT_THROW(SpecFromJson("not json"), ConfigError);
  EXPECT_NO_THROW(SpecFromJson("{\"seed\": 9}"));
}

TEST(Generator, DefaultInventoryMeans) {
  GeneratorSpec spec = GeneratorSpec::Default();
  EXPECT_DOUBLE_EQ(spec.phonemes.front().mean, 4.0);
  EXPECT_DOUBLE_EQ(spec.phonemes.back().mean, 14.0);
  corpus::Inventory inv = MakeInventory(spec);
  EXPECT_EQ(inv.size(), 33u);
  EXPECT_EQ(inv.kind(inv.IdOrThrow("_")), TokenKind::kWordBoundary);
  EXPECT_EQ(inv.kind(inv.IdOrThrow(",")), TokenKind::kPunctuation);
}

TEST(Generator, DeterministicFiles) {
  GeneratorSpec spec = GeneratorSpec::Default();
  SplitSizes sizes{30, 5, 5};
  fs::path a = TempDir("a"), b = TempDir("b");
  SaveGenerated(a.string(), spec, GenerateCorpus(spec, sizes));
  SaveGenerated(b.string(), spec, GenerateCorpus(spec, sizes));
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    fs::path rel = fs::relative(e.path(), a);
    EXPECT_EQ(ReadFile(e.path()), ReadFile(b / rel)) << rel;
    ++compared;
  }
  EXPECT_EQ(compared, 1 + 3 * 5);
  corpus::Corpus loaded = corpus::LoadCorpus((a / "dev").string());
  EXPECT_EQ(loaded.utterances.size(), 5u);
  EXPECT_EQ(loaded.utterances.front().id, "dev_00001");
  EXPECT_EQ(LoadLatents((a / "dev" / kLatentsFile).string()),
            GenerateSplit(spec, "dev", 5).latents);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Generator, UtteranceDependsOnlyOnIndex) {
  GeneratorSpec spec = GeneratorSpec::Default();
  GeneratedSplit small = GenerateSplit(spec, "test", 3);
  GeneratedSplit large = GenerateSplit(spec, "test", 10);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(corpus::FormatUtteranceLine(small.corpus.utterances[i]),
              corpus::FormatUtteranceLine(large.corpus.utterances[i]));
  }
  GeneratedSplit other = GenerateSplit(spec, "dev", 3);
  EXPECT_NE(other.latents[0].log_phi, small.latents[0].log_phi);
  spec.seed = 2;
  EXPECT_NE(GenerateSplit(spec, "test", 1).latents[0].log_phi, small.latents[0].log_phi);
}

TEST(Generator, StructureMatchesLatents) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const GeneratedSplit& g = BigSplit();
  EXPECT_NO_THROW(corpus::ValidateCorpus(g.corpus));
  EXPECT_EQ(g.corpus.word_feature_dim, spec.WordFeatureDim());
  EXPECT_EQ(spec.WordFeatureDim(), 6u);
  EXPECT_EQ(g.corpus.speaker_dim, 192u);
  for (std::size_t u = 0; u < g.corpus.utterances.size(); ++u) {
    const corpus::Utterance& utt = g.corpus.utterances[u];
    const UtteranceLatents& lat = g.latents[u];
    ASSERT_EQ(lat.id, utt.id);
    int words = static_cast<int>(utt.NumWords());
    ASSERT_GE(words, spec.min_words);
    ASSERT_LE(words, spec.max_words);
    EXPECT_EQ(lat.separators.back(), '.');
    EXPECT_EQ(lat.paused.back(), 0);
    EXPECT_EQ(utt.tokens.back().symbol, ".");
    std::vector<int> labels = corpus::ExtractPauseLabels(utt, spec.pause_threshold);
    EXPECT_EQ(labels, lat.paused) << utt.id;
    for (std::size_t w = 0; w < lat.grades.size(); ++w) {
      if (lat.grades[w] == 0) {
        EXPECT_EQ(lat.paused[w], 0);
      }
      if (lat.separators[w] == ',') {
        EXPECT_GE(lat.grades[w], 2);
      }
    }
    ASSERT_EQ(g.corpus.word_features.at(utt.id).size(), utt.words.size());
  }
}

TEST(Generator, PauseFractionsMatchCalibration) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const double expected_fraction = ExpectedBoundaryPauseFraction(spec);
  const double expected_share = ExpectedWordBoundaryPauseShare(spec);
  EXPECT_NEAR(expected_fraction, 0.025, 0.005);
  EXPECT_GE(expected_share, 0.20);
  EXPECT_LE(expected_share, 0.25);

  std::size_t plain = 0, plain_paused = 0, comma_paused = 0;
  for (const UtteranceLatents& l : BigSplit().latents) {
    for (std::size_t w = 0; w < l.separators.size(); ++w) {
      if (l.separators[w] == '_') {
        ++plain;
        plain_paused += static_cast<std::size_t>(l.paused[w]);
      } else if (l.separators[w] == ',') {
        comma_paused += static_cast<std::size_t>(l.paused[w]);
      }
    }
  }
  double fraction = static_cast<double>(plain_paused) / static_cast<double>(plain);
  double share = static_cast<double>(plain_paused) / static_cast<double>(plain_paused + comma_paused);
  EXPECT_NEAR(fraction, expected_fraction, 0.01);
  EXPECT_NEAR(share, expected_share, 0.02);
}

TEST(Generator, PerSymbolMeansMatchOracle) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const GeneratedSplit& g = BigSplit();
  std::map<std::string, std::pair<double, double>> sums;  // empirical, oracle
  std::map<std::string, int> counts;
  for (std::size_t u = 0; u < g.corpus.utterances.size(); ++u) {
    const corpus::Utterance& utt = g.corpus.utterances[u];
    auto contexts = ContextsFor(spec, utt, g.latents[u]);
    for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
      if (utt.tokens[t].kind != TokenKind::kPhoneme) continue;
      auto& s = sums[utt.tokens[t].symbol];
      s.first += utt.tokens[t].duration_frames;
      s.second += PmfMean(OracleConditional(spec, contexts[t]));
      ++counts[utt.tokens[t].symbol];
    }
  }
  EXPECT_EQ(sums.size(), 30u);
  for (const auto& [sym, s] : sums) {
    EXPECT_NEAR(s.first / s.second, 1.0, 0.02) << sym << " n=" << counts[sym];
  }
}

TEST(Generator, HistogramsMatchOraclePmf) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const GeneratedSplit& g = BigSplit();
  for (bool separators : {false, true}) {
    std::vector<double> empirical(metrics::kHistogramFrames + 2, 0.0);
    std::vector<double> oracle(metrics::kHistogramFrames + 2, 0.0);
    for (std::size_t u = 0; u < g.corpus.utterances.size(); ++u) {
      const corpus::Utterance& utt = g.corpus.utterances[u];
      auto contexts = ContextsFor(spec, utt, g.latents[u]);
      for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
        if ((utt.tokens[t].kind != TokenKind::kPhoneme) != separators) continue;
        empirical[static_cast<std::size_t>(utt.tokens[t].duration_frames)] += 1.0;
        Pmf pmf = OracleConditional(spec, contexts[t]);
        for (std::size_t k = 0; k < pmf.size() && k < oracle.size(); ++k) oracle[k] += pmf[k];
      }
    }
    double ne = 0, no = 0;
    for (std::size_t k = 0; k < empirical.size(); ++k) {
      ne += empirical[k];
      no += oracle[k];
    }
    for (std::size_t k = 0; k < empirical.size(); ++k) {
      empirical[k] /= ne;
      oracle[k] /= no;
    }
    EXPECT_LT(metrics::JsdFromHistograms(empirical, oracle), 0.01) << separators;
  }
}

TEST(Oracle, PmfsAreNormalised) {
  GeneratorSpec spec = GeneratorSpec::Default();
  TokenContext c;
  c.phoneme = 29;
  c.rate = 1.3;
  c.prepausal = true;
  c.word_final = true;
  Pmf p = OracleConditional(spec, c);
  double total = 0;
  for (double v : p) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NEAR(PmfMean(p), 14.0 * 1.3 * 1.6, 0.05);

  TokenContext s;
  s.kind = TokenKind::kWordBoundary;
  s.grade = 3;
  Pmf q = OracleConditional(spec, s);
  total = 0;
  for (double v : q) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
  double pause = PauseProbability(spec, 3, false, false);
  EXPECT_NEAR(PmfMean(q), pause * 40.0 + (1 - pause) * 0.4, 1e-3);
}

TEST(Oracle, PauseProbabilityLimits) {
  GeneratorSpec spec = GeneratorSpec::Default();
  EXPECT_EQ(PauseProbability(spec, 0, false, false), 0.0);
  EXPECT_EQ(PauseProbability(spec, 3, false, true), 0.0);
  EXPECT_NEAR(PauseProbability(spec, 3, true, false, 0.0), 1.0 / (1.0 + std::exp(-6.5)), 1e-12);
  // Marginal over a symmetric prior pulls toward one half.
  double conditional = PauseProbability(spec, 1, false, false, 0.0);
  double marginal = PauseProbability(spec, 1, false, false);
  EXPECT_GT(marginal, conditional);
  EXPECT_LT(marginal, 0.5);
  // Comma posteriors are high under the default calibration.
  EXPECT_GT(PauseProbability(spec, 2, true, false), 0.89);
}

TEST(Oracle, SpeechRateMatchesCorpus) {
  GeneratorSpec spec = GeneratorSpec::Default();
  double expected = ExpectedSpeechRate(spec, 4000);
  double measured = metrics::SpeechRate(BigSplit().corpus.utterances);
  EXPECT_NEAR(measured / expected, 1.0, 0.02);
}

TEST(Oracle, SpeakerVectorsCentreOnSpeaker) {
  GeneratorSpec spec = GeneratorSpec::Default();
  auto centres = SpeakerCentres(spec);
  const GeneratedSplit& g = BigSplit();
  std::vector<std::vector<double>> sums(centres.size(), std::vector<double>(spec.speaker_dim, 0.0));
  std::vector<int> counts(centres.size(), 0);
  for (const UtteranceLatents& l : g.latents) {
    const auto& v = g.corpus.speaker_vectors.at(l.id);
    for (std::size_t k = 0; k < v.size(); ++k) sums[l.speaker][k] += v[k];
    ++counts[l.speaker];
  }
  for (std::size_t s = 0; s < centres.size(); ++s) {
    ASSERT_GT(counts[s], 500);
    double worst = 0;
    for (std::size_t k = 0; k < spec.speaker_dim; ++k) {
      worst = std::max(worst, std::abs(sums[s][k] / counts[s] - centres[s][k]));
    }
    // 0.3 / sqrt(n) per coordinate; five sigma over 192 coordinates.
    EXPECT_LT(worst, 5 * 0.3 / std::sqrt(counts[s]));
  }
}

TEST(Oracle, BestFbetaEdgeCases) {
  GeneratorSpec spec = GeneratorSpec::Default();
  spec.pause_gain = 0.0;
  spec.grade_logits = {-40.0, -40.0, 40.0};
  spec.comma_logit_offset = 0.0;
  GeneratedSplit g = GenerateSplit(spec, "dev", 400);
  EXPECT_NEAR(OracleBestFbeta(spec, g.latents, 0.25).f, 1.0, 1e-12);

  // Uninformative posterior: best is to flag everything.
  spec.grade_logits = {0.0, 0.0, 0.0};
  spec.grade_probs = {0.001, 0.333, 0.333, 0.333};
  GeneratedSplit n = GenerateSplit(spec, "dev", 400);
  std::size_t total = 0, paused = 0;
  for (const UtteranceLatents& l : n.latents) {
    for (std::size_t w = 0; w + 1 < l.paused.size(); ++w) {
      if (l.grades[w] == 0) continue;
      ++total;
      paused += static_cast<std::size_t>(l.paused[w]);
    }
  }
  double b = static_cast<double>(paused) / static_cast<double>(total);
  double beta2 = 0.0625;
  double expected = (1 + beta2) * b / (beta2 * b + 1);
  EXPECT_NEAR(OracleBestFbeta(spec, n.latents, 0.25).f, expected, 0.02);
}

TEST(Oracle, PlantedSitesAndSuitability) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const GeneratedSplit& g = BigSplit();
  for (std::size_t u = 0; u < 50; ++u) {
    const corpus::Utterance& utt = g.corpus.utterances[u];
    auto sites = PlantedSites(utt, g.latents[u]);
    auto suit = Suitability(spec, utt, g.latents[u]);
    for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
      bool planted = sites.count(t) > 0;
      bool final = t + 1 == utt.tokens.size();
      EXPECT_EQ(suit[t] > 0, planted && !final) << utt.id << " " << t;
      if (utt.tokens[t].duration_frames >= 4 && utt.tokens[t].kind != TokenKind::kPhoneme) {
        EXPECT_TRUE(planted);
      }
    }
  }
}

TEST(Oracle, ContextsRejectMismatchedLatents) {
  GeneratorSpec spec = GeneratorSpec::Default();
  const GeneratedSplit& g = BigSplit();
  EXPECT_THROW(ContextsFor(spec, g.corpus.utterances[0], g.latents[1]), CorpusError);
}

}  // namespace
}  // namespace cauliflow::synth
