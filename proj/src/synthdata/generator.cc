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

#include "cauliflow/synthdata/generator.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/corpus/io.h"

namespace cauliflow::synth {

namespace {

using corpus::Token;
using corpus::TokenKind;
using json = nlohmann::json;

constexpr const char* kLatentsHeader = "# cauliflow-latents v1";

const char* const kSymbols[] = {"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
                                "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
                                "L",  "M",  "N",  "NG", "OW", "P",  "R",  "S",  "T",  "UW"};

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t Categorical(Rng* rng, const double* probs, std::size_t n) {
  double u = rng->Uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("generator spec: " + what);
}

std::string Lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

GeneratorSpec GeneratorSpec::Default() {
  GeneratorSpec spec;
  const std::size_t n = std::size(kSymbols);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 4.0 + 10.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    spec.phonemes.push_back({kSymbols[i], mean, 0.22});
  }
  return spec;
}

void GeneratorSpec::Validate() const {
  Require(!phonemes.empty(), "phoneme inventory is empty");
  for (const PhonemeSpec& p : phonemes) {
    Require(!p.symbol.empty() && p.symbol.find_first_of(" \t:_,.") == std::string::npos,
            "bad phoneme symbol '" + p.symbol + "'");
    Require(p.mean > 0 && p.log_sd > 0, "phoneme " + p.symbol + " needs mean > 0 and log_sd > 0");
  }
  Require(!speaker_rates.empty(), "no speakers");
  for (double r : speaker_rates) Require(r > 0, "speaker rates must be positive");
  Require(tempo_log_sd > 0 && pausing_log_sd > 0, "tempo and pausing spreads must be positive");
  Require(min_words >= 1 && max_words >= min_words, "word count range");
  Require(min_phonemes >= 1 && max_phonemes >= min_phonemes, "phoneme count range");
  Require(comma_probability > 0 && comma_probability < 1, "comma_probability in (0,1)");
  double total = 0;
  for (double p : grade_probs) {
    Require(p > 0 && p < 1, "grade probabilities in (0,1)");
    total += p;
  }
  Require(std::abs(total - 1.0) < 1e-9, "grade probabilities must sum to 1");
  Require(comma_grade3_share > 0 && comma_grade3_share < 1, "comma_grade3_share in (0,1)");
  Require(pause_sd > 0 && pause_mean > pause_threshold, "pause mode needs sd > 0 and mean above threshold");
  Require(!no_pause_pmf.empty(), "no_pause_pmf is empty");
  total = 0;
  for (double p : no_pause_pmf) {
    Require(p >= 0, "no_pause_pmf entries must be non-negative");
    total += p;
  }
  Require(std::abs(total - 1.0) < 1e-9, "no_pause_pmf must sum to 1");
  Require(static_cast<double>(no_pause_pmf.size()) - 1 < pause_threshold,
          "no-pause durations must stay below the pause threshold");
  Require(prepausal_word_factor > 0 && prepausal_final_factor > 0, "lengthening factors");
  Require(grade_feature_noise > 0 && speaker_utterance_sd > 0 && speaker_centre_sd > 0,
          "feature noise must be positive");
  Require(speaker_dim >= 1, "speaker_dim");
  Require(pause_threshold >= 1 && pause_threshold == std::floor(pause_threshold),
          "pause_threshold must be a whole number of frames >= 1");
}

std::string SpecToJson(const GeneratorSpec& s) {
  json j;
  j["seed"] = s.seed;
  json ph = json::array();
  for (const PhonemeSpec& p : s.phonemes) {
    ph.push_back({{"symbol", p.symbol}, {"mean", p.mean}, {"log_sd", p.log_sd}});
  }
  j["phonemes"] = ph;
  j["speaker_rates"] = s.speaker_rates;
  j["tempo_log_sd"] = s.tempo_log_sd;
  j["pausing_log_sd"] = s.pausing_log_sd;
  j["pause_gain"] = s.pause_gain;
  j["min_words"] = s.min_words;
  j["max_words"] = s.max_words;
  j["min_phonemes"] = s.min_phonemes;
  j["max_phonemes"] = s.max_phonemes;
  j["lexicon_size"] = s.lexicon_size;
  j["comma_probability"] = s.comma_probability;
  j["grade_probs"] = s.grade_probs;
  j["grade_logits"] = s.grade_logits;
  j["comma_grade3_share"] = s.comma_grade3_share;
  j["comma_logit_offset"] = s.comma_logit_offset;
  j["pause_mean"] = s.pause_mean;
  j["pause_sd"] = s.pause_sd;
  j["no_pause_pmf"] = s.no_pause_pmf;
  j["prepausal_word_factor"] = s.prepausal_word_factor;
  j["prepausal_final_factor"] = s.prepausal_final_factor;
  j["grade_feature_noise"] = s.grade_feature_noise;
  j["noise_dims"] = s.noise_dims;
  j["speaker_dim"] = s.speaker_dim;
  j["speaker_centre_sd"] = s.speaker_centre_sd;
  j["speaker_utterance_sd"] = s.speaker_utterance_sd;
  j["pause_threshold"] = s.pause_threshold;
  return j.dump(2) + "\n";
}

GeneratorSpec SpecFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("generator spec must be a JSON object");
  GeneratorSpec s = GeneratorSpec::Default();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "seed") s.seed = v.get<uint64_t>();
      else if (k == "phonemes") {
        s.phonemes.clear();
        for (const json& p : v) {
          PhonemeSpec ps;
          ps.symbol = p.at("symbol").get<std::string>();
          ps.mean = p.at("mean").get<double>();
          ps.log_sd = p.value("log_sd", 0.22);
          s.phonemes.push_back(ps);
        }
      } else if (k == "speaker_rates") s.speaker_rates = v.get<std::vector<double>>();
      else if (k == "tempo_log_sd") s.tempo_log_sd = v.get<double>();
      else if (k == "pausing_log_sd") s.pausing_log_sd = v.get<double>();
      else if (k == "pause_gain") s.pause_gain = v.get<double>();
      else if (k == "min_words") s.min_words = v.get<int>();
      else if (k == "max_words") s.max_words = v.get<int>();
      else if (k == "min_phonemes") s.min_phonemes = v.get<int>();
      else if (k == "max_phonemes") s.max_phonemes = v.get<int>();
      else if (k == "lexicon_size") s.lexicon_size = v.get<std::size_t>();
      else if (k == "comma_probability") s.comma_probability = v.get<double>();
      else if (k == "grade_probs") s.grade_probs = v.get<std::array<double, 4>>();
      else if (k == "grade_logits") s.grade_logits = v.get<std::array<double, 3>>();
      else if (k == "comma_grade3_share") s.comma_grade3_share = v.get<double>();
      else if (k == "comma_logit_offset") s.comma_logit_offset = v.get<double>();
      else if (k == "pause_mean") s.pause_mean = v.get<double>();
      else if (k == "pause_sd") s.pause_sd = v.get<double>();
      else if (k == "no_pause_pmf") s.no_pause_pmf = v.get<std::vector<double>>();
      else if (k == "prepausal_word_factor") s.prepausal_word_factor = v.get<double>();
      else if (k == "prepausal_final_factor") s.prepausal_final_factor = v.get<double>();
      else if (k == "grade_feature_noise") s.grade_feature_noise = v.get<double>();
      else if (k == "noise_dims") s.noise_dims = v.get<std::size_t>();
      else if (k == "speaker_dim") s.speaker_dim = v.get<std::size_t>();
      else if (k == "speaker_centre_sd") s.speaker_centre_sd = v.get<double>();
      else if (k == "speaker_utterance_sd") s.speaker_utterance_sd = v.get<double>();
      else if (k == "pause_threshold") s.pause_threshold = v.get<double>();
      else throw ConfigError("generator spec: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator spec: ") + e.what());
  }
  s.Validate();
  return s;
}

GeneratorSpec LoadSpec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return SpecFromJson(ss.str());
}

void SaveSpec(const std::string& path, const GeneratorSpec& spec) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << SpecToJson(spec);
}

corpus::Inventory MakeInventory(const GeneratorSpec& spec) {
  corpus::Inventory inv;
  for (const PhonemeSpec& p : spec.phonemes) inv.Add(p.symbol, TokenKind::kPhoneme);
  inv.Add("_", TokenKind::kWordBoundary);
  inv.Add(",", TokenKind::kPunctuation);
  inv.Add(".", TokenKind::kPunctuation);
  return inv;
}

namespace {

std::vector<int> RandomWord(const GeneratorSpec& spec, Rng* rng) {
  const int n = spec.min_phonemes +
                static_cast<int>(rng->UniformInt(static_cast<uint64_t>(spec.max_phonemes - spec.min_phonemes + 1)));
  std::vector<int> w;
  for (int k = 0; k < n; ++k) w.push_back(static_cast<int>(rng->UniformInt(spec.phonemes.size())));
  return w;
}

}  // namespace

std::vector<std::vector<int>> MakeLexicon(const GeneratorSpec& spec) {
  Rng rng = Rng(spec.seed).Split("lexicon");
  std::vector<std::vector<int>> lexicon;
  for (std::size_t i = 0; i < spec.lexicon_size; ++i) lexicon.push_back(RandomWord(spec, &rng));
  return lexicon;
}

std::vector<std::vector<double>> SpeakerCentres(const GeneratorSpec& spec) {
  Rng rng = Rng(spec.seed).Split("speaker-centres");
  std::vector<std::vector<double>> centres(spec.speaker_rates.size(),
                                           std::vector<double>(spec.speaker_dim));
  for (auto& c : centres) {
    for (double& v : c) v = rng.Normal(0.0, spec.speaker_centre_sd);
  }
  return centres;
}

GeneratedSplit GenerateSplit(const GeneratorSpec& spec, const std::string& name,
                             std::size_t count) {
  spec.Validate();
  GeneratedSplit out;
  corpus::Corpus& c = out.corpus;
  c.inventory = MakeInventory(spec);
  c.word_feature_dim = spec.WordFeatureDim();
  c.speaker_dim = spec.speaker_dim;
  const auto centres = SpeakerCentres(spec);
  const Rng stream = Rng(spec.seed).Split(name);
  const auto lexicon = MakeLexicon(spec);

  for (std::size_t index = 0; index < count; ++index) {
    Rng rng = stream.Split(static_cast<uint64_t>(index));
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05zu", name.c_str(), index + 1);

    UtteranceLatents lat;
    lat.id = id;
    lat.speaker = static_cast<int>(rng.UniformInt(spec.speaker_rates.size()));
    double t = spec.tempo_log_sd;
    lat.tempo = std::exp(t * rng.Normal() - 0.5 * t * t);
    lat.log_phi = spec.pausing_log_sd * rng.Normal();
    const int words = spec.min_words +
                      static_cast<int>(rng.UniformInt(static_cast<uint64_t>(spec.max_words - spec.min_words + 1)));

    // Text skeleton, separators, grades, pause decisions.
    std::vector<std::vector<int>> phones(static_cast<std::size_t>(words));
    for (auto& w : phones) {
      if (!lexicon.empty()) {
        w = lexicon[rng.UniformInt(lexicon.size())];
        continue;
      }
      w = RandomWord(spec, &rng);
    }
    for (int w = 0; w < words; ++w) {
      bool last = w == words - 1;
      char sep = '.';
      int grade = 0;
      if (!last) {
        if (rng.Bernoulli(spec.comma_probability)) {
          sep = ',';
          grade = rng.Bernoulli(spec.comma_grade3_share) ? 3 : 2;
        } else {
          sep = '_';
          grade = static_cast<int>(Categorical(&rng, spec.grade_probs.data(), 4));
        }
      }
      bool pause = false;
      if (grade > 0) {
        double logit = spec.grade_logits[static_cast<std::size_t>(grade - 1)] +
                       (sep == ',' ? spec.comma_logit_offset : 0.0) +
                       spec.pause_gain * lat.log_phi;
        pause = rng.Bernoulli(Sigmoid(logit));
      }
      lat.grades.push_back(grade);
      lat.separators.push_back(sep);
      lat.paused.push_back(pause ? 1 : 0);
    }

    // Durations.
    corpus::Utterance utt;
    utt.id = lat.id;
    utt.speaker_id = "spk" + std::to_string(lat.speaker);
    const double rate = spec.speaker_rates[static_cast<std::size_t>(lat.speaker)] * lat.tempo;
    for (int w = 0; w < words; ++w) {
      const auto& wp = phones[static_cast<std::size_t>(w)];
      const bool pause = lat.paused[static_cast<std::size_t>(w)] != 0;
      corpus::Word word;
      word.first_token = static_cast<int>(utt.tokens.size());
      for (std::size_t k = 0; k < wp.size(); ++k) {
        const PhonemeSpec& ps = spec.phonemes[static_cast<std::size_t>(wp[k])];
        double factor = 1.0;
        if (pause) factor = k + 1 == wp.size() ? spec.prepausal_final_factor : spec.prepausal_word_factor;
        double s = ps.log_sd;
        double x = ps.mean * rate * factor * std::exp(s * rng.Normal() - 0.5 * s * s);
        double d = std::max(1.0, std::floor(x + 0.5));
        utt.tokens.push_back({TokenKind::kPhoneme, ps.symbol, w, d});
        word.text += Lower(ps.symbol);
      }
      word.end_token = static_cast<int>(utt.tokens.size());
      utt.words.push_back(word);

      char sep = lat.separators[static_cast<std::size_t>(w)];
      double d;
      if (pause) {
        d = std::max(spec.pause_threshold, std::floor(rng.Normal(spec.pause_mean, spec.pause_sd) + 0.5));
      } else {
        d = static_cast<double>(Categorical(&rng, spec.no_pause_pmf.data(), spec.no_pause_pmf.size()));
      }
      TokenKind kind = sep == '_' ? TokenKind::kWordBoundary : TokenKind::kPunctuation;
      utt.tokens.push_back({kind, std::string(1, sep), w, d});
    }

    // Word features.
    std::vector<std::vector<double>> features;
    for (int w = 0; w < words; ++w) {
      std::vector<double> f(spec.WordFeatureDim(), 0.0);
      int grade = lat.grades[static_cast<std::size_t>(w)];
      for (int g = 0; g < 4; ++g) {
        f[static_cast<std::size_t>(g)] = (g == grade ? 1.0 : 0.0) + rng.Normal(0.0, spec.grade_feature_noise);
      }
      f[4] = lat.separators[static_cast<std::size_t>(w)] == ',' ? 1.0 : 0.0;
      f[5] = w == words - 1 ? 1.0 : 0.0;
      for (std::size_t k = 0; k < spec.noise_dims; ++k) f[6 + k] = rng.Normal();
      features.push_back(std::move(f));
    }

    // Speaker vector.
    std::vector<double> spk(spec.speaker_dim);
    const auto& centre = centres[static_cast<std::size_t>(lat.speaker)];
    for (std::size_t k = 0; k < spec.speaker_dim; ++k) {
      spk[k] = centre[k] + rng.Normal(0.0, spec.speaker_utterance_sd);
    }

    c.word_features[utt.id] = std::move(features);
    c.speaker_vectors[utt.id] = std::move(spk);
    c.utterances.push_back(std::move(utt));
    out.latents.push_back(std::move(lat));
  }
  corpus::ValidateCorpus(c);
  return out;
}

GeneratedCorpus GenerateCorpus(const GeneratorSpec& spec, const SplitSizes& sizes) {
  GeneratedCorpus g;
  g.train = GenerateSplit(spec, "train", sizes.train);
  g.dev = GenerateSplit(spec, "dev", sizes.dev);
  g.test = GenerateSplit(spec, "test", sizes.test);
  return g;
}

void SaveLatents(const std::string& path, const std::vector<UtteranceLatents>& latents) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << kLatentsHeader << '\n';
  for (const UtteranceLatents& l : latents) {
    os << l.id << '\t' << l.speaker << '\t' << corpus::FormatDouble(l.tempo) << '\t'
       << corpus::FormatDouble(l.log_phi) << '\t';
    for (std::size_t i = 0; i < l.grades.size(); ++i) os << (i ? "," : "") << l.grades[i];
    os << '\t' << l.separators << '\t';
    for (int p : l.paused) os << p;
    os << '\n';
  }
}

std::vector<UtteranceLatents> LoadLatents(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kLatentsHeader) {
    throw CorpusError(path + ": missing latents header");
  }
  std::vector<UtteranceLatents> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 7) throw CorpusError(path + ": malformed latents record");
    UtteranceLatents l;
    l.id = f[0];
    l.speaker = std::stoi(f[1]);
    l.tempo = corpus::ParseDouble(f[2]);
    l.log_phi = corpus::ParseDouble(f[3]);
    std::stringstream gs(f[4]);
    while (std::getline(gs, field, ',')) l.grades.push_back(std::stoi(field));
    l.separators = f[5];
    for (char ch : f[6]) l.paused.push_back(ch == '1' ? 1 : 0);
    if (l.grades.size() != l.separators.size() || l.paused.size() != l.grades.size()) {
      throw CorpusError(path + ": inconsistent latents for " + l.id);
    }
    out.push_back(std::move(l));
  }
  return out;
}

void SaveGenerated(const std::string& dir, const GeneratorSpec& spec,
                   const GeneratedCorpus& generated) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  SaveSpec((fs::path(dir) / kSpecFile).string(), spec);
  const std::pair<const char*, const GeneratedSplit*> parts[] = {
      {"train", &generated.train}, {"dev", &generated.dev}, {"test", &generated.test}};
  for (const auto& [name, split] : parts) {
    fs::path sub = fs::path(dir) / name;
    corpus::SaveCorpus(sub.string(), split->corpus);
    SaveLatents((sub / kLatentsFile).string(), split->latents);
  }
}

}  // namespace cauliflow::synth
