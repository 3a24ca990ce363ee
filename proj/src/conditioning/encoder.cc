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

#include "cauliflow/conditioning/encoder.h"

#include <cmath>

#include "json.hpp"

#include "cauliflow/common/error.h"

namespace cauliflow::cond {

using ad::Graph;
using ad::Tensor;
using ad::Var;

std::string EncoderConfig::ToJson() const {
  nlohmann::json j = {{"embed_dim", embed_dim},     {"extra_channels", extra_channels},
                      {"taps", taps},               {"conv_layers", conv_layers},
                      {"dilations", dilations}};
  return j.dump();
}

EncoderConfig EncoderConfig::FromJson(const std::string& text) {
  EncoderConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.extra_channels = j.at("extra_channels").get<std::size_t>();
    c.taps = j.at("taps").get<std::size_t>();
    c.conv_layers = j.at("conv_layers").get<std::size_t>();
    c.dilations = j.at("dilations").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
  return c;
}

PhonemeEncoder::PhonemeEncoder(ad::ParameterStore* store, const std::string& prefix,
                               const corpus::Inventory& inventory, const EncoderConfig& config,
                               Rng* rng)
    : config_(config), inventory_(inventory) {
  if (inventory.size() == 0) throw ConfigError("encoder needs a non-empty inventory");
  if (config.embed_dim == 0 || config.taps == 0 || config.conv_layers == 0) {
    throw ConfigError("encoder sizes must be positive");
  }
  const std::size_t e = config.embed_dim;
  Tensor table({inventory.size(), e});
  const double sd = 1.0 / std::sqrt(static_cast<double>(e));
  for (double& v : table.mutable_data()) v = rng->Normal(0.0, sd);
  table_ = store->Create(prefix + ".embedding", std::move(table));
  std::size_t in = e + config.extra_channels;
  for (std::size_t i = 0; i < config.conv_layers; ++i) {
    convs_.emplace_back(store, prefix + ".conv" + std::to_string(i), in, e, config.taps, 1, rng);
    in = e;
  }
  for (std::size_t i = 0; i < config.dilations.size(); ++i) {
    residual_.emplace_back(store, prefix + ".res" + std::to_string(i), e, e, config.taps,
                           config.dilations[i], rng);
  }
}

Var PhonemeEncoder::Encode(Graph& g, const std::vector<int>& ids, const Tensor& valid,
                           const Tensor& extra) const {
  if (valid.rank() != 2 || ids.size() != valid.size()) {
    throw ShapeError("encoder ids and mask disagree");
  }
  const std::size_t b = valid.dim(0), l = valid.dim(1);
  Var x = g.Embedding(g.Param(table_), ids, {b, l});
  if (config_.extra_channels > 0) {
    if (extra.shape() != ad::Shape{b, l, config_.extra_channels}) {
      throw ShapeError("encoder extra channels have shape " + ad::ShapeToString(extra.shape()));
    }
    x = g.Concat({x, g.Input(extra)}, 2);
  }
  x = ad::MaskTime(g, x, valid);
  for (const auto& conv : convs_) x = ad::MaskTime(g, g.Tanh(conv(g, x)), valid);
  for (const auto& conv : residual_) {
    x = ad::MaskTime(g, g.Add(x, g.Tanh(conv(g, x))), valid);
  }
  return x;
}

std::vector<int> PhonemeEncoder::SymbolIds(const corpus::Utterance& utt) const {
  std::vector<int> ids;
  ids.reserve(utt.tokens.size());
  for (const corpus::Token& t : utt.tokens) {
    auto id = inventory_.Find(t.symbol);
    if (!id) throw CorpusError(utt.id + ": symbol '" + t.symbol + "' not in encoder inventory");
    ids.push_back(*id);
  }
  return ids;
}

std::size_t PhonemeEncoder::ReceptiveRadius() const {
  std::size_t r = 0;
  for (const auto& c : convs_) r += c.HalfReach();
  for (const auto& c : residual_) r += c.HalfReach();
  return r;
}

Tensor EncodePhonemes(const PhonemeEncoder& encoder, const corpus::Utterance& utt,
                      const Tensor& extra) {
  std::vector<int> ids = encoder.SymbolIds(utt);
  const std::size_t p = ids.size();
  Graph g(false);
  Tensor x = extra.rank() == 2 ? extra.Reshaped({1, p, extra.dim(1)}) : Tensor();
  Var out = encoder.Encode(g, ids, Tensor::Full({1, p}, 1.0), x);
  return g.value(out).Reshaped({p, encoder.config().embed_dim});
}

}  // namespace cauliflow::cond
