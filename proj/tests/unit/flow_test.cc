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
#include <numbers>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "cauliflow/autodiff/grad_check.h"
#include "cauliflow/common/error.h"
#include "cauliflow/flow/flow.h"
#include "cauliflow/flow/sample.h"
#include "cauliflow/flow/train.h"
#include "cauliflow/synthdata/generator.h"

namespace cauliflow::flow {
namespace {

using ad::Tensor;
using corpus::TokenKind;

FlowConfig SmallConfig(std::size_t group = 4) {
  FlowConfig c;
  c.steps = 3;
  c.group = group;
  c.cond_channels = 4;
  c.hidden = 6;
  c.encoder.embed_dim = 6;
  c.encoder.conv_layers = 1;
  c.encoder.dilations = {1, 2};
  return c;
}

void Randomize(CauliflowModel* model, uint64_t seed, double sd = 0.3) {
  Rng rng(seed);
  for (ad::Parameter* p : model->store().parameters()) {
    Tensor v = p->value;
    for (double& x : v.mutable_data()) x += rng.Normal(0.0, sd);
    p->Assign(v);
  }
}

struct Toy {
  synth::GeneratedSplit data;
  std::unique_ptr<CauliflowModel> model;
  std::vector<cond::ConditioningBundle> bundles;

  explicit Toy(std::size_t count = 6, FlowConfig config = SmallConfig(), uint64_t seed = 5) {
    synth::GeneratorSpec spec = synth::GeneratorSpec::Default();
    spec.speaker_dim = 8;
    spec.noise_dims = 2;
    spec.seed = seed;
    data = synth::GenerateSplit(spec, "train", count);
    model = std::make_unique<CauliflowModel>(config, data.corpus.inventory,
                                             spec.WordFeatureDim(), spec.speaker_dim, seed);
    model->SetContext(cond::SpeakerTable::FromCorpus(data.corpus),
                      corpus::ComputeCorpusStats(data.corpus.utterances));
    bundles = TrainingBundles(*model, data.corpus);
  }

  cond::Batch Batch(std::vector<std::size_t> which, std::size_t multiple = 0) const {
    std::vector<const cond::ConditioningBundle*> ptrs;
    for (std::size_t i : which) ptrs.push_back(&bundles[i]);
    return cond::Collate(ptrs, multiple ? multiple : model->config().group);
  }
};

Tensor RandomY(const cond::Batch& batch, Rng* rng, double scale = 1.0) {
  Tensor y(batch.valid.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = batch.valid[i] != 0.0 ? scale * rng->Normal() : 0.0;
  }
  return y;
}

Tensor Latent(const CauliflowModel& m, const cond::Batch& batch, const Tensor& y) {
  ad::Graph g(false);
  return Unsqueeze(g.value(m.Inverse(g, batch, y).z));
}

TEST(FlowOps, SqueezeExample) {
  Tensor x({1, 4}, {1, 2, 3, 4});
  Tensor s = Squeeze(x, 2);
  EXPECT_EQ(s.shape(), (ad::Shape{1, 2, 2}));
  EXPECT_EQ(s.values(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_TRUE(Unsqueeze(s) == x);
  Tensor mask({1, 4}, {1, 1, 1, 0});
  Tensor ms = Squeeze(mask, 2);
  EXPECT_EQ(ms[3], 0.0);
  EXPECT_EQ(ms[2], 1.0);
  EXPECT_THROW(Squeeze(Tensor({1, 5}), 2), ShapeError);
}

TEST(FlowOps, DequantizeRange) {
  Rng rng(1);
  std::vector<double> d(20000, 0.0);
  d[0] = 7;
  auto y = Dequantize(d, &rng);
  double sum = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    EXPECT_GE(y[i], 0.0);
    EXPECT_LT(y[i], 1.0);
    sum += y[i];
  }
  EXPECT_NEAR(sum / (y.size() - 1), 0.5, 0.01);
  EXPECT_GE(y[0], 7.0);
  EXPECT_LT(y[0], 8.0);
}

TEST(FlowOps, Postprocess) {
  auto p = Postprocess({3.6, -0.2, -0.2, 2.4},
                       {TokenKind::kPhoneme, TokenKind::kPhoneme, TokenKind::kWordBoundary,
                        TokenKind::kPunctuation});
  EXPECT_EQ(p.durations, (std::vector<double>{4, 1, 0, 2}));
  EXPECT_EQ(p.clamped, 1u);
  EXPECT_FALSE(std::signbit(p.durations[2]));
}

TEST(Flow, IdentityInitialisation) {
  Toy toy;
  cond::Batch batch = toy.Batch({0, 1});
  Rng rng(2);
  Tensor y = RandomY(batch, &rng);
  ad::Graph g(false);
  FlowTerms t = toy.model->Inverse(g, batch, y);
  EXPECT_TRUE(Unsqueeze(g.value(t.z)) == y);
  EXPECT_EQ(g.value(t.log_det).item(), 0.0);
  double expected = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (batch.valid[i] != 0.0) expected += -0.5 * y[i] * y[i] - 0.5 * std::log(2 * std::numbers::pi);
  }
  EXPECT_NEAR(g.value(t.log_likelihood).item(), expected, 1e-9);

  // Non-trivial actnorm, everything else identity.
  ad::Parameter& bias = toy.model->store().Get("step0.actnorm.bias");
  ad::Parameter& logs = toy.model->store().Get("step0.actnorm.log_scale");
  bias.Assign(Tensor::Vector({0.5, -1.0, 2.0, 0.0}));
  logs.Assign(Tensor::Vector({0.1, -0.3, 0.7, 0.2}));
  ad::Graph g2(false);
  FlowTerms t2 = toy.model->Inverse(g2, batch, y);
  Tensor z = Unsqueeze(g2.value(t2.z));
  double log_det = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (batch.valid[i] == 0.0) {
      EXPECT_EQ(z[i], 0.0);
      continue;
    }
    std::size_t c = (i % batch.length) % 4;
    EXPECT_NEAR(z[i], (y[i] + bias.value[c]) * std::exp(logs.value[c]), 1e-12);
    log_det += logs.value[c];
  }
  EXPECT_NEAR(g2.value(t2.log_det).item(), log_det, 1e-12);
  // z = 0 maps back to the actnorm preimage of 0.
  Tensor back = toy.model->Forward(batch, Tensor(batch.valid.shape()));
  for (std::size_t i = 0; i < back.size(); ++i) {
    if (batch.valid[i] == 0.0) continue;
    EXPECT_NEAR(back[i], -bias.value[(i % batch.length) % 4], 1e-12);
  }
}

TEST(Flow, RoundTripRandomModels) {
  for (uint64_t trial = 0; trial < 10; ++trial) {
    Toy toy(4, SmallConfig(), 100 + trial);
    Randomize(toy.model.get(), trial);
    cond::Batch batch = toy.Batch({0, 1, 2, 3});
    Rng rng(trial);
    Tensor y = RandomY(batch, &rng, 10.0);
    Tensor back = toy.model->Forward(batch, Latent(*toy.model, batch, y));
    double worst = 0.0, ymax = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      worst = std::max(worst, std::abs(back[i] - y[i]));
      ymax = std::max(ymax, std::abs(y[i]));
    }
    EXPECT_LE(worst, 1e-6 * (1.0 + ymax)) << "trial " << trial;
  }
}

// log|det| of the numerical Jacobian of the valid latents w.r.t. the valid
// durations of a single utterance.
double NumericalLogDet(const CauliflowModel& m, const cond::Batch& batch, const Tensor& y) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (batch.valid[i] != 0.0) idx.push_back(i);
  }
  const std::size_t n = idx.size();
  Eigen::MatrixXd jac(n, n);
  const double h = 1e-5;
  for (std::size_t j = 0; j < n; ++j) {
    Tensor plus = y, minus = y;
    plus[idx[j]] += h;
    minus[idx[j]] -= h;
    Tensor zp = Latent(m, batch, plus), zm = Latent(m, batch, minus);
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = (zp[idx[i]] - zm[idx[i]]) / (2 * h);
  }
  return std::log(std::abs(jac.partialPivLu().determinant()));
}

TEST(Flow, LogDetMatchesNumericalJacobian) {
  for (uint64_t trial = 0; trial < 6; ++trial) {
    Toy toy(3, SmallConfig(), 200 + trial);
    Randomize(toy.model.get(), trial + 50);
    // Cut utterances to 8 and 6 tokens to keep the Jacobian small.
    for (std::size_t keep : {8u, 6u}) {
      cond::ConditioningBundle b = toy.bundles[0];
      b.symbols.resize(keep);
      b.durations.resize(keep);
      b.kinds.resize(keep);
      b.w = Tensor({keep, b.w.dim(1)},
                   std::vector<double>(b.w.values().begin(), b.w.values().begin() + keep * b.w.dim(1)));
      cond::Batch batch = cond::Collate({&b}, 4);
      Rng rng(trial);
      Tensor y = RandomY(batch, &rng, 2.0);
      ad::Graph g(false);
      double analytic = g.value(toy.model->Inverse(g, batch, y).log_det).item();
      double numeric = NumericalLogDet(*toy.model, batch, y);
      EXPECT_NEAR(analytic, numeric, 1e-4 * std::max(1.0, std::abs(numeric)))
          << "trial " << trial << " keep " << keep;
    }
  }
}

TEST(Flow, TwoChannelDensityIntegratesToOne) {
  Toy toy(1, SmallConfig(2), 9);
  Randomize(toy.model.get(), 9, 0.2);
  cond::ConditioningBundle b = toy.bundles[0];
  const std::size_t keep = 2;
  b.symbols.resize(keep);
  b.durations.resize(keep);
  b.kinds.resize(keep);
  b.w = Tensor({keep, b.w.dim(1)},
               std::vector<double>(b.w.values().begin(), b.w.values().begin() + keep * b.w.dim(1)));
  // Locate the mass: map a spread of latents forward.
  cond::Batch one = cond::Collate({&b}, 2);
  double lo[2] = {1e9, 1e9}, hi[2] = {-1e9, -1e9};
  for (double u : {-6.0, 0.0, 6.0}) {
    for (double v : {-6.0, 0.0, 6.0}) {
      Tensor y = toy.model->Forward(one, Tensor({1, 2}, {u, v}));
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::min(lo[k], y[k]);
        hi[k] = std::max(hi[k], y[k]);
      }
    }
  }
  const std::size_t n = 400;
  std::vector<const cond::ConditioningBundle*> rows(n, &b);
  cond::Batch batch = cond::Collate(rows, 2);
  double total = 0.0;
  const double pad[2] = {0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])};
  const double step0 = (hi[0] - lo[0] + 2 * pad[0]) / n, step1 = (hi[1] - lo[1] + 2 * pad[1]) / n;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor y({n, 2});
    for (std::size_t j = 0; j < n; ++j) {
      y[j * 2] = lo[0] - pad[0] + (i + 0.5) * step0;
      y[j * 2 + 1] = lo[1] - pad[1] + (j + 0.5) * step1;
    }
    for (double ll : toy.model->RowLogLikelihood(batch, y)) total += std::exp(ll);
  }
  EXPECT_NEAR(total * step0 * step1, 1.0, 0.02);
}

TEST(Flow, NllGradientCheck) {
  Toy toy(1, SmallConfig(), 11);
  Randomize(toy.model.get(), 11, 0.2);
  cond::ConditioningBundle b = toy.bundles[0];
  const std::size_t keep = 2;
  b.symbols.resize(keep);
  b.durations = {5.3, 0.4};
  b.kinds.resize(keep);
  b.w = Tensor({keep, b.w.dim(1)},
               std::vector<double>(b.w.values().begin(), b.w.values().begin() + keep * b.w.dim(1)));
  cond::Batch batch = cond::Collate({&b}, 4);
  Tensor y({1, 4}, {0.53, 0.04, 0, 0});
  auto loss = [&](ad::Graph& g) {
    FlowTerms t = toy.model->Inverse(g, batch, y);
    return g.Scale(t.log_likelihood, -1.0 / t.tokens);
  };
  auto report = ad::GradCheck(loss, toy.model->store().parameters());
  EXPECT_TRUE(report.passed()) << report.worst;
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(Flow, PaddingInvariance) {
  Toy toy(3, SmallConfig(), 21);
  Randomize(toy.model.get(), 21);
  Rng rng(4);
  cond::Batch alone = toy.Batch({0});
  cond::Batch padded = toy.Batch({0}, 64);
  ASSERT_GT(padded.length, alone.length);
  Tensor y = RandomY(alone, &rng, 3.0);
  Tensor yp(padded.valid.shape());
  for (std::size_t t = 0; t < alone.length; ++t) yp[t] = y[t];
  EXPECT_NEAR(toy.model->LogLikelihood(alone, y), toy.model->LogLikelihood(padded, yp), 1e-9);

  // Batched with other utterances: log-likelihoods add up.
  cond::Batch both = toy.Batch({0, 1});
  Tensor y1 = RandomY(toy.Batch({1}), &rng, 3.0);
  Tensor yb(both.valid.shape());
  for (std::size_t t = 0; t < toy.bundles[0].length(); ++t) yb[t] = y[t];
  for (std::size_t t = 0; t < toy.bundles[1].length(); ++t) yb[both.length + t] = y1[t];
  double separate = toy.model->LogLikelihood(alone, y) + toy.model->LogLikelihood(toy.Batch({1}), y1);
  EXPECT_NEAR(toy.model->LogLikelihood(both, yb), separate, 1e-9);
}

TEST(Flow, CheckpointRoundTrip) {
  Toy toy(3, SmallConfig(), 31);
  Randomize(toy.model.get(), 31);
  ad::Checkpoint ck = toy.model->ToCheckpoint();
  auto back = CauliflowModel::FromCheckpoint(ck);
  cond::Batch batch = toy.Batch({0, 1, 2});
  Rng rng(3);
  Tensor y = RandomY(batch, &rng);
  EXPECT_EQ(back->LogLikelihood(batch, y), toy.model->LogLikelihood(batch, y));
  EXPECT_EQ(back->stats().mean_speech_rate, toy.model->stats().mean_speech_rate);
  EXPECT_EQ(back->speakers().Speakers(), toy.model->speakers().Speakers());
  ck.metadata["kind"] = "other";
  EXPECT_THROW(CauliflowModel::FromCheckpoint(ck), CorpusError);
}

TEST(Flow, SamplingTemperature) {
  Toy toy(6, SmallConfig(), 41);
  Randomize(toy.model.get(), 41, 0.1);
  const auto& prompts = toy.data.corpus.utterances;
  auto a = SampleDurations(*toy.model, prompts, toy.data.corpus, 0.0, {}, 1);
  auto b = SampleDurations(*toy.model, prompts, toy.data.corpus, 0.0, {}, 2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].durations, b[i].durations);
  auto c = SampleDurations(*toy.model, prompts, toy.data.corpus, 1.0, {}, 1);
  auto d = SampleDurations(*toy.model, prompts, toy.data.corpus, 1.0, {}, 2);
  bool differ = false;
  for (std::size_t i = 0; i < c.size(); ++i) differ = differ || c[i].real != d[i].real;
  EXPECT_TRUE(differ);
  // Batching does not change the draws.
  auto e = SampleDurations(*toy.model, prompts, toy.data.corpus, 1.0, {}, 1, 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_EQ(c[i].real.size(), e[i].real.size());
    for (std::size_t t = 0; t < c[i].real.size(); ++t) EXPECT_NEAR(c[i].real[t], e[i].real[t], 1e-9);
  }
  for (const auto& s : c) {
    for (std::size_t t = 0; t < s.durations.size(); ++t) {
      EXPECT_EQ(s.durations[t], std::round(s.durations[t]));
      EXPECT_GE(s.durations[t], 0.0);
    }
  }
  EXPECT_THROW(SampleDurations(*toy.model, prompts, toy.data.corpus, -1.0, {}, 1), ConfigError);
}

TEST(FlowTraining, ImprovesAndIsDeterministic) {
  synth::GeneratorSpec spec = synth::GeneratorSpec::Default();
  spec.speaker_dim = 8;
  auto train = synth::GenerateSplit(spec, "train", 160);
  auto dev = synth::GenerateSplit(spec, "dev", 40);
  FlowTrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  tc.learning_rate = 3e-3;
  auto run = [&]() {
    auto m = std::make_unique<CauliflowModel>(SmallConfig(), train.corpus.inventory,
                                              spec.WordFeatureDim(), spec.speaker_dim, 3);
    FlowTrainResult r = TrainFlow(m.get(), train.corpus, dev.corpus, tc);
    return std::make_pair(std::move(m), r);
  };
  auto [m1, r1] = run();
  auto [m2, r2] = run();
  ASSERT_EQ(r1.curve.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(r1.curve[e].train_nll, r2.curve[e].train_nll);
    EXPECT_EQ(r1.curve[e].dev_nll, r2.curve[e].dev_nll);
  }
  double previous = r1.initial_dev_nll;
  for (const auto& rec : r1.curve) {
    EXPECT_LT(rec.dev_nll, previous) << "epoch " << rec.epoch;
    previous = rec.dev_nll;
  }
  EXPECT_EQ(r1.best_epoch, 3u);
  EXPECT_EQ(r1.best_dev_nll, r1.curve.back().dev_nll);
  auto dev_bundles = TrainingBundles(*m1, dev.corpus);
  EXPECT_NEAR(MeanNll(*m1, dev_bundles, 0), MeanNll(*m2, dev_bundles, 0), 0.0);
}

TEST(FlowTraining, DivergenceAborts) {
  synth::GeneratorSpec spec = synth::GeneratorSpec::Default();
  spec.speaker_dim = 8;
  auto train = synth::GenerateSplit(spec, "train", 16);
  auto dev = synth::GenerateSplit(spec, "dev", 4);
  FlowTrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.learning_rate = 1e3;
  tc.clip_norm = 0.0;
  CauliflowModel m(SmallConfig(), train.corpus.inventory, spec.WordFeatureDim(), spec.speaker_dim, 3);
  EXPECT_THROW(TrainFlow(&m, train.corpus, dev.corpus, tc), Error);
}

}  // namespace
}  // namespace cauliflow::flow
