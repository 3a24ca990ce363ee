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

#include "cauliflow/corpus/io.h"

#include <charconv>
#include <map>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cauliflow/common/error.h"

namespace cauliflow::corpus {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kInventoryHeader = "# cauliflow-inventory v1";
constexpr std::string_view kUtterancesHeader = "# cauliflow-utterances v1";
constexpr std::string_view kWordFeaturesHeader = "# cauliflow-word-features v1";
constexpr std::string_view kSpeakerVectorsHeader = "# cauliflow-speaker-vectors v1";

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> SplitWhitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int ParseInt(std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw CorpusError("malformed integer '" + std::string(text) + "'");
  }
  return value;
}

std::ifstream OpenForRead(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return is;
}

std::ofstream OpenForWrite(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

// Reads the header line and returns the declared dim= value (0 if absent).
std::size_t ReadHeader(std::istream& is, std::string_view expected,
                       const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line.rfind(expected, 0) != 0) {
    throw CorpusError(path + ": missing or unsupported version header (expected '" +
                      std::string(expected) + "')");
  }
  auto pos = line.find("dim=");
  if (pos == std::string::npos) return 0;
  return static_cast<std::size_t>(ParseInt(std::string_view(line).substr(pos + 4)));
}

TokenKind ParseKindTag(std::string_view tag) {
  if (tag == "ph") return TokenKind::kPhoneme;
  if (tag == "wb") return TokenKind::kWordBoundary;
  if (tag == "pu") return TokenKind::kPunctuation;
  throw CorpusError("unknown token kind tag '" + std::string(tag) + "'");
}

const char* KindTag(TokenKind kind) {
  switch (kind) {
    case TokenKind::kPhoneme: return "ph";
    case TokenKind::kWordBoundary: return "wb";
    case TokenKind::kPunctuation: return "pu";
  }
  return "??";
}

TokenKind ParseKindName(std::string_view name) {
  if (name == "phoneme") return TokenKind::kPhoneme;
  if (name == "boundary") return TokenKind::kWordBoundary;
  if (name == "punct") return TokenKind::kPunctuation;
  throw CorpusError("unknown symbol kind '" + std::string(name) + "'");
}

std::vector<double> ParseVector(const std::vector<std::string_view>& fields,
                                std::size_t first, std::size_t dim,
                                const std::string& where) {
  if (fields.size() != first + dim) {
    throw CorpusError(where + ": expected " + std::to_string(dim) +
                      " values, got " + std::to_string(fields.size() - first));
  }
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = ParseDouble(fields[first + i]);
  return v;
}

}  // namespace

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, ptr);
}

double ParseDouble(std::string_view text) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw CorpusError("malformed number '" + std::string(text) + "'");
  }
  return value;
}

Utterance ParseUtteranceLine(std::string_view line) {
  auto fields = Split(line, '\t');
  if (fields.size() != 4 || fields[0].empty()) {
    throw CorpusError("malformed utterance record: expected 4 tab-separated fields");
  }
  Utterance utt;
  utt.id = std::string(fields[0]);
  utt.speaker_id = std::string(fields[1]);
  try {
    for (std::string_view tok : SplitWhitespace(fields[2])) {
      auto parts = Split(tok, ':');
      if (parts.size() != 4) {
        throw CorpusError("malformed token '" + std::string(tok) + "'");
      }
      Token t;
      t.kind = ParseKindTag(parts[0]);
      t.symbol = std::string(parts[1]);
      t.word_index = ParseInt(parts[2]);
      t.duration_frames = ParseDouble(parts[3]);
      utt.tokens.push_back(std::move(t));
    }
    for (std::string_view w : SplitWhitespace(fields[3])) {
      auto parts = Split(w, ':');
      if (parts.size() != 3) {
        throw CorpusError("malformed word '" + std::string(w) + "'");
      }
      utt.words.push_back(Word{std::string(parts[0]), ParseInt(parts[1]),
                               ParseInt(parts[2])});
    }
  } catch (const CorpusError& e) {
    throw CorpusError("utterance " + utt.id + ": " + e.what());
  }
  return utt;
}

std::string FormatUtteranceLine(const Utterance& utt) {
  std::string out = utt.id + '\t' + utt.speaker_id + '\t';
  for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
    const Token& t = utt.tokens[i];
    if (i) out += ' ';
    out += KindTag(t.kind);
    out += ':' + t.symbol + ':' + std::to_string(t.word_index) + ':' +
           FormatDouble(t.duration_frames);
  }
  out += '\t';
  for (std::size_t i = 0; i < utt.words.size(); ++i) {
    const Word& w = utt.words[i];
    if (i) out += ' ';
    out += w.text + ':' + std::to_string(w.first_token) + ':' +
           std::to_string(w.end_token);
  }
  return out;
}

static Inventory ReadInventory(std::istream& is, const std::string& source) {
  ReadHeader(is, kInventoryHeader, source);
  Inventory inv;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = SplitWhitespace(line);
    if (fields.size() != 2) {
      throw CorpusError(source + ":" + std::to_string(lineno) + ": malformed inventory entry");
    }
    inv.Add(std::string(fields[1]), ParseKindName(fields[0]));
  }
  return inv;
}

Inventory LoadInventory(const std::string& path) {
  auto is = OpenForRead(path);
  return ReadInventory(is, path);
}

Inventory ParseInventory(const std::string& text) {
  std::istringstream is(text);
  return ReadInventory(is, "inventory");
}

std::string FormatInventory(const Inventory& inventory) {
  std::ostringstream os;
  os << kInventoryHeader << '\n';
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    int id = static_cast<int>(i);
    os << TokenKindName(inventory.kind(id)) << ' ' << inventory.symbol(id) << '\n';
  }
  return os.str();
}

void SaveInventory(const std::string& path, const Inventory& inventory) {
  auto os = OpenForWrite(path);
  os << FormatInventory(inventory);
}

std::vector<Utterance> LoadUtterances(const std::string& path,
                                      const Inventory& inventory,
                                      const ValidationOptions& options) {
  auto is = OpenForRead(path);
  ReadHeader(is, kUtterancesHeader, path);
  std::vector<Utterance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Utterance utt = ParseUtteranceLine(line);
    ValidateUtterance(utt, inventory, options);
    out.push_back(std::move(utt));
  }
  return out;
}

void SaveUtterances(const std::string& path,
                    const std::vector<Utterance>& utterances) {
  auto os = OpenForWrite(path);
  os << kUtterancesHeader << '\n';
  for (const Utterance& u : utterances) os << FormatUtteranceLine(u) << '\n';
}

Corpus LoadCorpus(const std::string& dir, const ValidationOptions& options) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("corpus directory not found: " + dir);
  Corpus corpus;
  corpus.inventory = LoadInventory((root / kInventoryFile).string());
  corpus.utterances = LoadUtterances((root / kUtterancesFile).string(),
                                     corpus.inventory, options);

  {
    std::string path = (root / kWordFeaturesFile).string();
    auto is = OpenForRead(path);
    corpus.word_feature_dim = ReadHeader(is, kWordFeaturesHeader, path);
    std::map<std::string, std::map<int, std::vector<double>>> staged;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto fields = SplitWhitespace(line);
      if (fields.size() < 2) throw CorpusError(path + ": malformed feature record");
      std::string utt_id(fields[0]);
      int w = ParseInt(fields[1]);
      staged[utt_id][w] =
          ParseVector(fields, 2, corpus.word_feature_dim, "utterance " + utt_id);
    }
    for (const Utterance& utt : corpus.utterances) {
      auto it = staged.find(utt.id);
      std::vector<std::vector<double>> rows;
      for (int w = 0; w < utt.NumWords(); ++w) {
        if (it == staged.end() || !it->second.count(w)) {
          throw CorpusError("utterance " + utt.id + ": word " + std::to_string(w) +
                            " lacks a feature vector");
        }
        rows.push_back(std::move(it->second[w]));
      }
      corpus.word_features[utt.id] = std::move(rows);
    }
  }
  {
    std::string path = (root / kSpeakerVectorsFile).string();
    auto is = OpenForRead(path);
    corpus.speaker_dim = ReadHeader(is, kSpeakerVectorsHeader, path);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto fields = SplitWhitespace(line);
      if (fields.size() < 2) throw CorpusError(path + ": malformed speaker record");
      std::string utt_id(fields[1]);
      const Utterance* utt = corpus.Find(utt_id);
      if (utt && utt->speaker_id != fields[0]) {
        throw CorpusError("utterance " + utt_id + ": speaker vector belongs to " +
                          std::string(fields[0]) + ", not " + utt->speaker_id);
      }
      corpus.speaker_vectors[utt_id] =
          ParseVector(fields, 2, corpus.speaker_dim, "utterance " + utt_id);
    }
  }
  ValidateCorpus(corpus, options);
  return corpus;
}

void SaveCorpus(const std::string& dir, const Corpus& corpus) {
  const fs::path root(dir);
  fs::create_directories(root);
  SaveInventory((root / kInventoryFile).string(), corpus.inventory);
  SaveUtterances((root / kUtterancesFile).string(), corpus.utterances);
  {
    auto os = OpenForWrite((root / kWordFeaturesFile).string());
    os << kWordFeaturesHeader << " dim=" << corpus.word_feature_dim << '\n';
    for (const Utterance& utt : corpus.utterances) {
      const auto& rows = corpus.word_features.at(utt.id);
      for (std::size_t w = 0; w < rows.size(); ++w) {
        os << utt.id << ' ' << w;
        for (double v : rows[w]) os << ' ' << FormatDouble(v);
        os << '\n';
      }
    }
  }
  {
    auto os = OpenForWrite((root / kSpeakerVectorsFile).string());
    os << kSpeakerVectorsHeader << " dim=" << corpus.speaker_dim << '\n';
    for (const Utterance& utt : corpus.utterances) {
      os << utt.speaker_id << ' ' << utt.id;
      for (double v : corpus.speaker_vectors.at(utt.id)) os << ' ' << FormatDouble(v);
      os << '\n';
    }
  }
}

}  // namespace cauliflow::corpus
