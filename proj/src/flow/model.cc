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

#include "cauliflow/flow/flow.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"

namespace cauliflow::flow {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr const char* kModelKind = "cauliflow-flow";

struct Masks {
  std::size_t b = 0, r = 0, g = 0;
  Tensor pad;          // [B, R, g], 1 at padding
  Tensor group_valid;  // [B, R]
  Tensor counts;       // [B, g], valid positions per channel and row
  double tokens = 0.0;
};

Masks MakeMasks(const cond::Batch& batch, std::size_t group) {
  if (batch.length % group != 0) {
    throw ShapeError("batch length " + std::to_string(batch.length) +
                     " is not a multiple of the group size");
  }
  Masks m;
  m.b = batch.batch;
  m.g = group;
  m.r = batch.length / group;
  m.pad = Tensor({m.b, m.r, m.g});
  m.group_valid = Tensor({m.b, m.r});
  m.counts = Tensor({m.b, m.g});
  for (std::size_t i = 0; i < batch.valid.size(); ++i) {
    const bool v = batch.valid[i] != 0.0;
    m.pad[i] = v ? 0.0 : 1.0;
    if (v) {
      m.counts[(i / batch.length) * m.g + i % m.g] += 1.0;
      m.group_valid[i / m.g] = 1.0;
      m.tokens += 1.0;
    }
  }
  return m;
}

Tensor SliceChannels(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t c = x.shape().back(), rows = x.size() / c, w = end - begin;
  Shape shape = x.shape();
  shape.back() = w;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < w; ++k) out[r * w + k] = x[r * c + begin + k];
  }
  return out;
}

void WriteChannels(Tensor* x, const Tensor& part, std::size_t begin) {
  const std::size_t c = x->shape().back(), w = part.shape().back(), rows = part.size() / w;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < w; ++k) (*x)[r * c + begin + k] = part[r * w + k];
  }
}

Tensor Masked(const cond::Batch& batch, const Tensor& y) {
  if (y.shape() != batch.valid.shape()) {
    throw ShapeError("durations " + ad::ShapeToString(y.shape()) + " do not match batch " +
                     ad::ShapeToString(batch.valid.shape()));
  }
  Tensor out = y;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (batch.valid[i] == 0.0) out[i] = 0.0;
  }
  return out;
}

}  // namespace

void FlowConfig::Validate() const {
  if (steps == 0) throw ConfigError("flow needs at least one step");
  if (group < 2 || group % 2 != 0) throw ConfigError("flow group size must be even and >= 2");
  if (cond_channels == 0 || hidden == 0 || taps == 0) {
    throw ConfigError("flow layer sizes must be positive");
  }
  if (!(log_scale_limit > 0)) throw ConfigError("log_scale_limit must be positive");
}

std::string FlowConfig::ToJson() const {
  nlohmann::json j;
  j["steps"] = steps;
  j["group"] = group;
  j["cond_channels"] = cond_channels;
  j["hidden"] = hidden;
  j["taps"] = taps;
  j["log_scale_limit"] = log_scale_limit;
  j["encoder"] = nlohmann::json::parse(encoder.ToJson());
  return j.dump();
}

FlowConfig FlowConfig::FromJson(const std::string& text) {
  FlowConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.steps = j.at("steps").get<std::size_t>();
    c.group = j.at("group").get<std::size_t>();
    c.cond_channels = j.at("cond_channels").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.taps = j.at("taps").get<std::size_t>();
    c.log_scale_limit = j.at("log_scale_limit").get<double>();
    c.encoder = cond::EncoderConfig::FromJson(j.at("encoder").dump());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("flow config: ") + e.what());
  }
  c.Validate();
  return c;
}

std::vector<double> Dequantize(const std::vector<double>& durations, Rng* rng) {
  std::vector<double> out(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) out[i] = durations[i] + rng->Uniform();
  return out;
}

Tensor Squeeze(const Tensor& x, std::size_t group) {
  if (x.rank() != 2 || group == 0 || x.dim(1) % group != 0) {
    throw ShapeError("cannot squeeze " + ad::ShapeToString(x.shape()) + " by " +
                     std::to_string(group));
  }
  return x.Reshaped({x.dim(0), x.dim(1) / group, group});
}

Tensor Unsqueeze(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("cannot unsqueeze " + ad::ShapeToString(x.shape()));
  return x.Reshaped({x.dim(0), x.dim(1) * x.dim(2)});
}

Postprocessed Postprocess(const std::vector<double>& real,
                          const std::vector<corpus::TokenKind>& kinds) {
  if (real.size() != kinds.size()) throw ShapeError("postprocess: kinds do not match durations");
  Postprocessed out;
  out.durations.resize(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    double d = std::round(real[i]) + 0.0;
    double floor = kinds[i] == corpus::TokenKind::kPhoneme ? 1.0 : 0.0;
    if (!(d >= floor)) {
      d = floor;
      ++out.clamped;
    }
    out.durations[i] = d;
  }
  return out;
}

CauliflowModel::CauliflowModel(const FlowConfig& config, const corpus::Inventory& inventory,
                               std::size_t word_dim, std::size_t speaker_dim, uint64_t seed)
    : config_(config),
      word_dim_(word_dim),
      speaker_dim_(speaker_dim),
      store_(std::make_unique<ad::ParameterStore>()) {
  config_.Validate();
  Rng rng = Rng(seed).Split("flow-init");
  const std::size_t g = config_.group, half = g / 2, cc = config_.cond_channels;
  const std::size_t h = config_.hidden;
  encoder_ = cond::PhonemeEncoder(store_.get(), "encoder", inventory, config_.encoder, &rng);
  proj_tokens_ = ad::Linear(store_.get(), "cond.tokens", config_.encoder.embed_dim + word_dim, cc, &rng);
  proj_speaker_ = ad::Linear(store_.get(), "cond.speaker", speaker_dim, cc, &rng);
  proj_rates_ = ad::Linear(store_.get(), "cond.rates", 2, cc, &rng);
  for (std::size_t k = 0; k < config_.steps; ++k) {
    const std::string p = "step" + std::to_string(k);
    Step s;
    s.an_bias = store_->Create(p + ".actnorm.bias", Tensor({g}));
    s.an_logs = store_->Create(p + ".actnorm.log_scale", Tensor({g}));
    s.lower = store_->Create(p + ".mix.lower", Tensor({g, g}));
    s.log_diag = store_->Create(p + ".mix.log_diag", Tensor({g}));
    s.upper = store_->Create(p + ".mix.upper", Tensor({g, g}));
    s.conv1 = ad::Conv1dLayer(store_.get(), p + ".coupling.conv1", half + g * cc, 2 * h,
                              config_.taps, 1, &rng);
    s.conv2 = ad::Conv1dLayer(store_.get(), p + ".coupling.conv2", h, 2 * h, config_.taps, 2, &rng);
    s.out = ad::Linear(store_.get(), p + ".coupling.out", h, g, &rng, ad::Init::kZero);
    steps_.push_back(s);
  }
}

void CauliflowModel::SetContext(cond::SpeakerTable speakers, corpus::CorpusStats stats) {
  speakers_ = std::move(speakers);
  stats_ = stats;
}

Var CauliflowModel::Condition(Graph& g, const cond::Batch& batch) const {
  const std::size_t b = batch.batch, l = batch.length;
  if (batch.w.shape() != Shape{b, l, word_dim_} || batch.spk.shape() != Shape{b, speaker_dim_}) {
    throw ShapeError("batch conditioning does not match the model's feature sizes");
  }
  Var ph = encoder_.Encode(g, batch.ids, batch.valid, batch.extra);
  Var tok = proj_tokens_(g, g.Concat({ph, g.Input(batch.w)}, 2));
  Var spk = ad::ExpandOverTime(g, proj_speaker_(g, g.Input(batch.spk)), l);
  Var rates = ad::ExpandOverTime(g, proj_rates_(g, g.Input(batch.rates)), l);
  Var c = ad::MaskTime(g, g.Add(g.Add(tok, spk), rates), batch.valid);
  return g.Reshape(c, {b, l / config_.group, config_.group * config_.cond_channels});
}

Var CauliflowModel::Mixing(Graph& g, const Step& s) const {
  const std::size_t n = config_.group;
  Tensor strict_lower({n, n}), strict_upper({n, n}), eye({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    eye[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i > j) strict_lower[i * n + j] = 1.0;
      if (i < j) strict_upper[i * n + j] = 1.0;
    }
  }
  Var ones = g.Input(Tensor::Full({n, 1}, 1.0));
  Var diag = g.Mul(g.Matmul(ones, g.Reshape(g.Exp(g.Param(s.log_diag)), {1, n})), g.Input(eye));
  Var lower = g.Add(g.Mul(g.Param(s.lower), g.Input(strict_lower)), diag);
  Var upper = g.Add(g.Mul(g.Param(s.upper), g.Input(strict_upper)), g.Input(eye));
  return g.Matmul(lower, upper);
}

std::pair<Var, Var> CauliflowModel::Coupling(Graph& g, const Step& s, Var x_a, Var c,
                                             const Tensor& group_valid,
                                             const Tensor& pad_b) const {
  const std::size_t half = config_.group / 2;
  const double lim = config_.log_scale_limit;
  Var u = g.Concat({x_a, c}, 2);
  u = ad::MaskTime(g, ad::GatedActivation(g, s.conv1(g, u)), group_valid);
  u = ad::MaskTime(g, ad::GatedActivation(g, s.conv2(g, u)), group_valid);
  Var o = s.out(g, u);
  Var log_scale = g.Scale(g.Tanh(g.Scale(g.Slice(o, 2, 0, half), 1.0 / lim)), lim);
  Var shift = g.Slice(o, 2, half, 2 * half);
  return {g.MaskedFill(log_scale, pad_b, 0.0), g.MaskedFill(shift, pad_b, 0.0)};
}

FlowTerms CauliflowModel::Run(Graph& g, const cond::Batch& batch, const Tensor& y,
                              bool init_actnorm) const {
  const std::size_t n = config_.group, half = n / 2;
  Masks m = MakeMasks(batch, n);
  Var c = Condition(g, batch);
  Var h = g.Input(Squeeze(Masked(batch, y), n));
  Var counts = g.Input(m.counts);
  // Per-row sums of [B, R, c] tensors.
  auto row_sum = [&](Var x) {
    const std::size_t width = g.value(x).size() / m.b;
    return g.Matmul(g.Reshape(x, {m.b, width}), g.Input(Tensor::Full({width, 1}, 1.0)));
  };
  Var log_det = g.Input(Tensor({m.b, 1}));
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    const Step& s = steps_[k];
    if (init_actnorm) {
      const Tensor& hv = g.value(h);
      Tensor bias({n}), logs({n});
      for (std::size_t ch = 0; ch < n; ++ch) {
        double sum = 0.0, sq = 0.0, cnt = 0.0;
        for (std::size_t i = ch; i < hv.size(); i += n) {
          if (m.pad[i] != 0.0) continue;
          sum += hv[i];
          sq += hv[i] * hv[i];
          cnt += 1.0;
        }
        if (cnt == 0.0) continue;
        double mean = sum / cnt;
        double var = std::max(sq / cnt - mean * mean, 0.0);
        bias[ch] = -mean;
        logs[ch] = -0.5 * std::log(var + 1e-6);
      }
      s.an_bias->Assign(bias);
      s.an_logs->Assign(logs);
    }
    Var logs = g.Param(s.an_logs);
    h = ad::ScaleRows(g, ad::AddRowBias(g, h, g.Param(s.an_bias)), g.Exp(logs));
    h = g.MaskedFill(h, m.pad, 0.0);
    log_det = g.Add(log_det, g.Matmul(counts, g.Reshape(logs, {n, 1})));

    h = g.MaskedFill(g.Matmul(h, Mixing(g, s)), m.pad, 0.0);
    log_det = g.Add(log_det, g.Matmul(counts, g.Reshape(g.Param(s.log_diag), {n, 1})));

    const bool even = k % 2 == 0;
    const std::size_t a0 = even ? 0 : half, b0 = even ? half : 0;
    Var x_a = g.Slice(h, 2, a0, a0 + half);
    Var x_b = g.Slice(h, 2, b0, b0 + half);
    Tensor pad_b = SliceChannels(m.pad, b0, b0 + half);
    auto [log_scale, shift] = Coupling(g, s, x_a, c, m.group_valid, pad_b);
    Var z_b = g.Add(g.Mul(x_b, g.Exp(log_scale)), shift);
    h = even ? g.Concat({x_a, z_b}, 2) : g.Concat({z_b, x_a}, 2);
    log_det = g.Add(log_det, row_sum(log_scale));
  }
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  Tensor row_norm({m.b, 1});
  for (std::size_t i = 0; i < m.b; ++i) {
    for (std::size_t ch = 0; ch < n; ++ch) row_norm[i] += log_norm * m.counts[i * n + ch];
  }
  Var row_prior = g.Sub(g.Scale(row_sum(g.Mul(h, h)), -0.5), g.Input(row_norm));
  FlowTerms t;
  t.z = h;
  t.tokens = m.tokens;
  t.row_log_likelihood = g.Add(row_prior, log_det);
  t.log_det = g.Sum(log_det);
  t.log_prior = g.Sum(row_prior);
  t.log_likelihood = g.Sum(t.row_log_likelihood);
  return t;
}

FlowTerms CauliflowModel::Inverse(Graph& g, const cond::Batch& batch, const Tensor& y) const {
  return Run(g, batch, y, false);
}

double CauliflowModel::LogLikelihood(const cond::Batch& batch, const Tensor& y) const {
  Graph g(false);
  return g.value(Run(g, batch, y, false).log_likelihood).item();
}

std::vector<double> CauliflowModel::RowLogLikelihood(const cond::Batch& batch,
                                                     const Tensor& y) const {
  Graph g(false);
  return g.value(Run(g, batch, y, false).row_log_likelihood).values();
}

void CauliflowModel::InitializeActnorm(const cond::Batch& batch, const Tensor& y) {
  Graph g(false);
  Run(g, batch, y, true);
}

Tensor CauliflowModel::Forward(const cond::Batch& batch, const Tensor& z) const {
  const std::size_t n = config_.group, half = n / 2;
  Masks m = MakeMasks(batch, n);
  Graph g(false);
  Var c = Condition(g, batch);
  Tensor h = Squeeze(Masked(batch, z), n);
  const std::size_t rows = m.b * m.r;
  for (std::size_t kk = steps_.size(); kk-- > 0;) {
    const Step& s = steps_[kk];
    // Coupling.
    const bool even = kk % 2 == 0;
    const std::size_t a0 = even ? 0 : half, b0 = even ? half : 0;
    Tensor x_a = SliceChannels(h, a0, a0 + half);
    Tensor z_b = SliceChannels(h, b0, b0 + half);
    Tensor pad_b = SliceChannels(m.pad, b0, b0 + half);
    auto [log_scale, shift] = Coupling(g, s, g.Input(x_a), c, m.group_valid, pad_b);
    const Tensor& ls = g.value(log_scale);
    const Tensor& sh = g.value(shift);
    Tensor x_b(z_b.shape());
    for (std::size_t i = 0; i < x_b.size(); ++i) x_b[i] = (z_b[i] - sh[i]) * std::exp(-ls[i]);
    WriteChannels(&h, x_b, b0);

    // Mixing: solve q Y = out, then h X = q on the valid prefix of each row.
    const Tensor& lo = s.lower->value;
    const Tensor& up = s.upper->value;
    const Tensor& ld = s.log_diag->value;
    std::vector<double> q(n), x(n);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t v = 0;
      while (v < n && m.pad[r * n + v] == 0.0) ++v;
      for (std::size_t j = 0; j < v; ++j) {
        double acc = h[r * n + j];
        for (std::size_t i = 0; i < j; ++i) acc -= q[i] * up[i * n + j];
        q[j] = acc;
      }
      for (std::size_t j = v; j-- > 0;) {
        double acc = q[j];
        for (std::size_t i = j + 1; i < v; ++i) acc -= x[i] * lo[i * n + j];
        x[j] = acc / std::exp(ld[j]);
      }
      for (std::size_t j = 0; j < n; ++j) h[r * n + j] = j < v ? x[j] : 0.0;
    }

    // Actnorm.
    const Tensor& bias = s.an_bias->value;
    const Tensor& logs = s.an_logs->value;
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] = m.pad[i] != 0.0 ? 0.0 : h[i] * std::exp(-logs[i % n]) - bias[i % n];
    }
  }
  if (!h.AllFinite()) throw NumericError("flow forward produced non-finite durations");
  return Unsqueeze(h);
}

ad::Checkpoint CauliflowModel::ToCheckpoint() const {
  ad::Checkpoint ck = ad::MakeCheckpoint(*store_, {});
  ck.metadata["kind"] = kModelKind;
  ck.metadata["config"] = config_.ToJson();
  ck.metadata["inventory"] = corpus::FormatInventory(encoder_.inventory());
  ck.metadata["word_dim"] = std::to_string(word_dim_);
  ck.metadata["speaker_dim"] = std::to_string(speaker_dim_);
  cond::WriteStats(stats_, &ck);
  speakers_.WriteTo(&ck);
  return ck;
}

std::unique_ptr<CauliflowModel> CauliflowModel::FromCheckpoint(const ad::Checkpoint& ck) {
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw CorpusError("flow checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (meta("kind") != kModelKind) {
    throw CorpusError("checkpoint holds a '" + meta("kind") + "' model, not a flow");
  }
  auto model = std::make_unique<CauliflowModel>(
      FlowConfig::FromJson(meta("config")), corpus::ParseInventory(meta("inventory")),
      std::stoul(meta("word_dim")), std::stoul(meta("speaker_dim")), 0);
  std::map<std::string, Tensor> params;
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("speaker/", 0) != 0) params[name] = t;
  }
  model->store_->Restore(params);
  model->SetContext(cond::SpeakerTable::ReadFrom(ck), cond::ReadStats(ck));
  return model;
}

}  // namespace cauliflow::flow
