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

#ifndef CAULIFLOW_CORPUS_CORPUS_H_
#define CAULIFLOW_CORPUS_CORPUS_H_

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cauliflow::corpus {

// Frame shift of the duration annotations, in seconds.
inline constexpr double kFrameSeconds = 0.0125;
// Default silence threshold: 4 frames = 50 ms.
inline constexpr double kDefaultPauseThreshold = 4.0;

enum class TokenKind { kPhoneme, kWordBoundary, kPunctuation };

const char* TokenKindName(TokenKind kind);
bool IsPauseCapable(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::kPhoneme;
  std::string symbol;
  // Containing word for phonemes, preceding word for boundary/punctuation.
  int word_index = 0;
  double duration_frames = 0.0;

  bool operator==(const Token&) const = default;
};

struct Word {
  std::string text;
  // Half-open span [first_token, end_token) covering the word's phonemes.
  int first_token = 0;
  int end_token = 0;

  bool operator==(const Word&) const = default;
};

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::vector<Token> tokens;
  std::vector<Word> words;

  double TotalFrames() const;
  double DurationSeconds() const { return TotalFrames() * kFrameSeconds; }
  int NumWords() const { return static_cast<int>(words.size()); }
  // Boundary/punctuation tokens with duration >= threshold.
  int CountPauses(double threshold) const;
  std::vector<double> Durations() const;
  std::vector<TokenKind> Kinds() const;

  bool operator==(const Utterance&) const = default;
};

// Symbol table. Each symbol belongs to exactly one token kind.
class Inventory {
 public:
  Inventory() = default;

  int Add(const std::string& symbol, TokenKind kind);
  std::optional<int> Find(const std::string& symbol) const;
  int IdOrThrow(const std::string& symbol) const;
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  TokenKind kind(int id) const { return kinds_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return symbols_.size(); }

  bool operator==(const Inventory& other) const {
    return symbols_ == other.symbols_ && kinds_ == other.kinds_;
  }

 private:
  std::vector<std::string> symbols_;
  std::vector<TokenKind> kinds_;
  std::unordered_map<std::string, int> index_;
};

// A validated, immutable-after-load collection of utterances plus their
// precomputed word-feature and speaker-vector sidecars.
struct Corpus {
  std::vector<Utterance> utterances;
  Inventory inventory;
  // Utterance id -> one feature vector per word.
  std::map<std::string, std::vector<std::vector<double>>> word_features;
  // Utterance id -> utterance-level speaker vector.
  std::map<std::string, std::vector<double>> speaker_vectors;
  std::size_t word_feature_dim = 0;
  std::size_t speaker_dim = 0;

  const Utterance* Find(const std::string& id) const;

  bool operator==(const Corpus& other) const {
    return utterances == other.utterances && inventory == other.inventory &&
           word_features == other.word_features &&
           speaker_vectors == other.speaker_vectors &&
           word_feature_dim == other.word_feature_dim &&
           speaker_dim == other.speaker_dim;
  }
};

struct ValidationOptions {
  // Target data must give every phoneme at least one frame.
  bool require_positive_phonemes = true;
  // Durations must be whole frames.
  bool require_integer_durations = true;
};

// Checks every structural invariant of one utterance; throws CorpusError
// naming the utterance on the first violation.
void ValidateUtterance(const Utterance& utt, const Inventory& inventory,
                       const ValidationOptions& options = {});

// Full corpus validation including sidecar coverage.
void ValidateCorpus(const Corpus& corpus, const ValidationOptions& options = {});

}  // namespace cauliflow::corpus

#endif  // CAULIFLOW_CORPUS_CORPUS_H_
