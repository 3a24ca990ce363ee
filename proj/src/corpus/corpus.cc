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

#include "cauliflow/corpus/corpus.h"

#include <cmath>

#include "cauliflow/common/error.h"

namespace cauliflow::corpus {

const char* TokenKindName(TokenKind kind) {
  switch (kind) {
    case TokenKind::kPhoneme: return "phoneme";
    case TokenKind::kWordBoundary: return "boundary";
    case TokenKind::kPunctuation: return "punct";
  }
  return "unknown";
}

bool IsPauseCapable(TokenKind kind) { return kind != TokenKind::kPhoneme; }

double Utterance::TotalFrames() const {
  double total = 0.0;
  for (const Token& t : tokens) total += t.duration_frames;
  return total;
}

int Utterance::CountPauses(double threshold) const {
  int n = 0;
  for (const Token& t : tokens) {
    if (IsPauseCapable(t.kind) && t.duration_frames >= threshold) ++n;
  }
  return n;
}

std::vector<double> Utterance::Durations() const {
  std::vector<double> d;
  d.reserve(tokens.size());
  for (const Token& t : tokens) d.push_back(t.duration_frames);
  return d;
}

std::vector<TokenKind> Utterance::Kinds() const {
  std::vector<TokenKind> k;
  k.reserve(tokens.size());
  for (const Token& t : tokens) k.push_back(t.kind);
  return k;
}

int Inventory::Add(const std::string& symbol, TokenKind kind) {
  auto it = index_.find(symbol);
  if (it != index_.end()) {
    if (kinds_[static_cast<std::size_t>(it->second)] != kind) {
      throw CorpusError("symbol '" + symbol + "' registered with two kinds");
    }
    return it->second;
  }
  int id = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  kinds_.push_back(kind);
  index_[symbol] = id;
  return id;
}

std::optional<int> Inventory::Find(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Inventory::IdOrThrow(const std::string& symbol) const {
  auto id = Find(symbol);
  if (!id) throw CorpusError("unknown symbol '" + symbol + "'");
  return *id;
}

const Utterance* Corpus::Find(const std::string& id) const {
  for (const Utterance& u : utterances) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

void ValidateUtterance(const Utterance& utt, const Inventory& inventory,
                       const ValidationOptions& options) {
  auto fail = [&](const std::string& what) {
    throw CorpusError("utterance " + utt.id + ": " + what);
  };
  if (utt.tokens.empty()) fail("no tokens");
  if (utt.words.empty()) fail("no words");
  const int num_words = utt.NumWords();
  for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
    const Token& t = utt.tokens[i];
    auto id = inventory.Find(t.symbol);
    if (!id) fail("unknown symbol '" + t.symbol + "' at token " + std::to_string(i));
    if (inventory.kind(*id) != t.kind) {
      fail("symbol '" + t.symbol + "' used as " + TokenKindName(t.kind));
    }
    if (!std::isfinite(t.duration_frames)) fail("non-finite duration");
    if (t.duration_frames < 0) {
      fail("negative duration at token " + std::to_string(i));
    }
    if (options.require_integer_durations &&
        t.duration_frames != std::floor(t.duration_frames)) {
      fail("non-integer duration at token " + std::to_string(i));
    }
    if (options.require_positive_phonemes && t.kind == TokenKind::kPhoneme &&
        t.duration_frames < 1) {
      fail("phoneme with zero duration at token " + std::to_string(i));
    }
    if (t.word_index < 0 || t.word_index >= num_words) {
      fail("word index out of range at token " + std::to_string(i));
    }
  }
  int expected_first = 0;
  for (int w = 0; w < num_words; ++w) {
    const Word& word = utt.words[static_cast<std::size_t>(w)];
    if (word.end_token <= word.first_token) {
      fail("word " + std::to_string(w) + " spans no phoneme");
    }
    if (word.first_token < expected_first ||
        word.end_token > static_cast<int>(utt.tokens.size())) {
      fail("word " + std::to_string(w) + " span out of order or range");
    }
    for (int i = expected_first; i < word.first_token; ++i) {
      const Token& t = utt.tokens[static_cast<std::size_t>(i)];
      if (t.kind == TokenKind::kPhoneme) fail("phoneme outside any word");
      if (w == 0) fail("boundary/punctuation before the first word");
      if (t.word_index != w - 1) fail("separator token has wrong word index");
    }
    for (int i = word.first_token; i < word.end_token; ++i) {
      const Token& t = utt.tokens[static_cast<std::size_t>(i)];
      if (t.kind != TokenKind::kPhoneme) {
        fail("boundary/punctuation inside word " + std::to_string(w));
      }
      if (t.word_index != w) fail("phoneme has wrong word index");
    }
    expected_first = word.end_token;
  }
  for (std::size_t i = static_cast<std::size_t>(expected_first); i < utt.tokens.size(); ++i) {
    const Token& t = utt.tokens[i];
    if (t.kind == TokenKind::kPhoneme) fail("phoneme outside any word");
    if (t.word_index != num_words - 1) fail("trailing token has wrong word index");
  }
}

void ValidateCorpus(const Corpus& corpus, const ValidationOptions& options) {
  std::map<std::string, int> seen;
  for (const Utterance& utt : corpus.utterances) {
    if (seen[utt.id]++) throw CorpusError("duplicate utterance id " + utt.id);
    ValidateUtterance(utt, corpus.inventory, options);
    auto wf = corpus.word_features.find(utt.id);
    if (wf == corpus.word_features.end() ||
        wf->second.size() != utt.words.size()) {
      throw CorpusError("utterance " + utt.id + ": missing word feature vector");
    }
    for (std::size_t w = 0; w < wf->second.size(); ++w) {
      if (wf->second[w].size() != corpus.word_feature_dim) {
        throw CorpusError("utterance " + utt.id + ": word " + std::to_string(w) +
                          " feature vector has wrong dimension");
      }
    }
    auto sv = corpus.speaker_vectors.find(utt.id);
    if (sv == corpus.speaker_vectors.end()) {
      throw CorpusError("utterance " + utt.id + ": missing speaker vector");
    }
    if (sv->second.size() != corpus.speaker_dim) {
      throw CorpusError("utterance " + utt.id +
                        ": speaker vector has wrong dimension");
    }
  }
}

}  // namespace cauliflow::corpus
