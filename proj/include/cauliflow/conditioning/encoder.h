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

#ifndef CAULIFLOW_CONDITIONING_ENCODER_H_
#define CAULIFLOW_CONDITIONING_ENCODER_H_

#include <string>
#include <vector>

#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/layers.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/corpus/corpus.h"

namespace cauliflow::cond {

struct EncoderConfig {
  std::size_t embed_dim = 24;
  // Per-token input channels appended to the symbol embedding.
  std::size_t extra_channels = 0;
  std::size_t taps = 3;
  std::size_t conv_layers = 3;
  std::vector<int> dilations{1, 2, 4, 8};

  std::string ToJson() const;
  // Throws ConfigError on missing or malformed fields.
  static EncoderConfig FromJson(const std::string& text);
};

// Symbol embedding followed by plain conv layers and dilated residual conv
// layers, all with tanh. Padded positions are zeroed after every layer, so
// outputs at valid positions do not depend on the amount of padding.
class PhonemeEncoder {
 public:
  PhonemeEncoder() = default;
  PhonemeEncoder(ad::ParameterStore* store, const std::string& prefix,
                 const corpus::Inventory& inventory, const EncoderConfig& config, Rng* rng);

  // ids: B*L symbol ids; valid: [B, L]; extra: [B, L, X], ignored when
  // extra_channels is 0. Returns [B, L, E].
  ad::Var Encode(ad::Graph& g, const std::vector<int>& ids, const ad::Tensor& valid,
                 const ad::Tensor& extra) const;

  // Throws CorpusError on a symbol missing from the inventory.
  std::vector<int> SymbolIds(const corpus::Utterance& utt) const;

  // Tokens on either side of a position that can influence its output.
  std::size_t ReceptiveRadius() const;

  const EncoderConfig& config() const { return config_; }
  const corpus::Inventory& inventory() const { return inventory_; }

 private:
  EncoderConfig config_;
  corpus::Inventory inventory_;
  ad::Parameter* table_ = nullptr;
  std::vector<ad::Conv1dLayer> convs_;
  std::vector<ad::Conv1dLayer> residual_;
};

// Encodes a single utterance without recording gradients; [P, E].
ad::Tensor EncodePhonemes(const PhonemeEncoder& encoder, const corpus::Utterance& utt,
                          const ad::Tensor& extra = ad::Tensor());

}  // namespace cauliflow::cond

#endif  // CAULIFLOW_CONDITIONING_ENCODER_H_
