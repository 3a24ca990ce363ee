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

#ifndef CAULIFLOW_CORPUS_IO_H_
#define CAULIFLOW_CORPUS_IO_H_

#include <string>
#include <string_view>
#include <vector>

#include "cauliflow/corpus/corpus.h"

namespace cauliflow::corpus {

// On-disk corpus layout. A corpus is a directory holding four plain-text
// files, each starting with a version header line:
//
//   inventory.txt        "# cauliflow-inventory v1"
//                        then one "<kind> <symbol>" per line, kind in
//                        {phoneme, boundary, punct}
//   utterances.txt       "# cauliflow-utterances v1"
//                        then one utterance per line, four TAB-separated
//                        fields: id, speaker_id, tokens, words.
//                        tokens: space-separated "<k>:<symbol>:<word>:<dur>"
//                        with k in {ph, wb, pu}; words: space-separated
//                        "<text>:<first_token>:<end_token>"
//   word_features.txt    "# cauliflow-word-features v1 dim=<D>"
//                        then "<utt_id> <word_index> <D floats>"
//   speaker_vectors.txt  "# cauliflow-speaker-vectors v1 dim=<D>"
//                        then "<speaker_id> <utt_id> <D floats>"
//
// Floats are written in shortest round-trip form, so save -> load is exact.
inline constexpr std::string_view kInventoryFile = "inventory.txt";
inline constexpr std::string_view kUtterancesFile = "utterances.txt";
inline constexpr std::string_view kWordFeaturesFile = "word_features.txt";
inline constexpr std::string_view kSpeakerVectorsFile = "speaker_vectors.txt";

Corpus LoadCorpus(const std::string& dir, const ValidationOptions& options = {});
void SaveCorpus(const std::string& dir, const Corpus& corpus);

Inventory LoadInventory(const std::string& path);
void SaveInventory(const std::string& path, const Inventory& inventory);
// Same content as the inventory file, held in a string.
std::string FormatInventory(const Inventory& inventory);
Inventory ParseInventory(const std::string& text);

// Utterance records only; every symbol must be in `inventory`.
std::vector<Utterance> LoadUtterances(const std::string& path,
                                      const Inventory& inventory,
                                      const ValidationOptions& options = {});
void SaveUtterances(const std::string& path,
                    const std::vector<Utterance>& utterances);

// Parses / formats one utterance line (no trailing newline).
Utterance ParseUtteranceLine(std::string_view line);
std::string FormatUtteranceLine(const Utterance& utt);

std::string FormatDouble(double value);
double ParseDouble(std::string_view text);

}  // namespace cauliflow::corpus

#endif  // CAULIFLOW_CORPUS_IO_H_
