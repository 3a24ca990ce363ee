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

#include "cauliflow/checks/invariants.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "cauliflow/autodiff/grad_check.h"
#include "cauliflow/common/rng.h"
#include "cauliflow/flow/flow.h"
#include "cauliflow/flow/train.h"
#include "cauliflow/metrics/metrics.h"
#include "cauliflow/synthdata/generator.h"

namespace cauliflow::checks {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

flow::FlowConfig ToyConfig(std::size_t group) {
  flow::FlowConfig c;
  c.steps = 3;
  c.group = group;
  c.cond_channels = 4;
  c.hidden = 6;
  c.encoder.embed_dim = 6;
  c.encoder.conv_layers = 1;
  c.encoder.dilations = {1, 2};
  return c;
}

synth::GeneratorSpec ToySpec(uint64_t seed) {
  synth::GeneratorSpec spec = synth::GeneratorSpec::Default();
  spec.speaker_dim = 8;
  spec.noise_dims = 2;
  spec.seed = seed;
  return spec;
}

struct ToyFlow {
  synth::GeneratedSplit data;
  std::unique_ptr<flow::CauliflowModel> model;
  std::vector<cond::ConditioningBundle> bundles;

  ToyFlow(std::size_t count, std::size_t group, uint64_t seed) {
    synth::GeneratorSpec spec = ToySpec(seed);
    data = synth::GenerateSplit(spec, "toy", count);
    model = std::make_unique<flow::CauliflowModel>(ToyConfig(group), data.corpus.inventory,
                                                   spec.WordFeatureDim(), spec.speaker_dim, seed);
    model->SetContext(cond::SpeakerTable::FromCorpus(data.corpus),
                      corpus::ComputeCorpusStats(data.corpus.utterances));
    bundles = flow::TrainingBundles(*model, data.corpus);
  }

  void Randomize(uint64_t seed, double sd) {
    Rng rng(seed);
    for (ad::Parameter* p : model->store().parameters()) {
      Tensor v = p->value;
      for (double& x : v.mutable_data()) x += rng.Normal(0.0, sd);
      p->Assign(v);
    }
  }
};

cond::ConditioningBundle Truncate(cond::ConditioningBundle b, std::size_t keep) {
  keep = std::min(keep, b.length());
  b.symbols.resize(keep);
  b.durations.resize(keep);
  b.kinds.resize(keep);
  b.w = Tensor({keep, b.w.dim(1)},
               std::vector<double>(b.w.values().begin(), b.w.values().begin() + keep * b.w.dim(1)));
  return b;
}

Tensor RandomValid(const cond::Batch& batch, Rng* rng, double scale) {
  Tensor y(batch.valid.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = batch.valid[i] != 0.0 ? scale * rng->Normal() : 0.0;
  }
  return y;
}

Tensor Latent(const flow::CauliflowModel& m, const cond::Batch& batch, const Tensor& y) {
  Graph g(false);
  return flow::Unsqueeze(g.value(m.Inverse(g, batch, y).z));
}

std::string Format(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// F-beta from explicit prediction and label vectors.
double BruteFbeta(std::size_t tp, std::size_t fp, std::size_t fn, double beta) {
  std::vector<int> pred, gold;
  for (std::size_t i = 0; i < tp; ++i) pred.push_back(1), gold.push_back(1);
  for (std::size_t i = 0; i < fp; ++i) pred.push_back(1), gold.push_back(0);
  for (std::size_t i = 0; i < fn; ++i) pred.push_back(0), gold.push_back(1);
  double hit = 0, said = 0, real = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    hit += pred[i] && gold[i];
    said += pred[i];
    real += gold[i];
  }
  if (hit == 0) return 0.0;
  const double b2 = beta * beta;
  return (1 + b2) * hit / ((1 + b2) * hit + b2 * (real - hit) + (said - hit));
}

double BruteJsd(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, double> pa, pb;
  for (int v : a) pa[std::min(v, 201)] += 1.0 / a.size();
  for (int v : b) pb[std::min(v, 201)] += 1.0 / b.size();
  double kl_a = 0, kl_b = 0;
  for (int bin = 0; bin <= 201; ++bin) {
    const double p = pa.count(bin) ? pa[bin] : 0.0, q = pb.count(bin) ? pb[bin] : 0.0;
    const double m = 0.5 * (p + q);
    if (p > 0) kl_a += p * std::log(p / m);
    if (q > 0) kl_b += q * std::log(q / m);
  }
  return 0.5 * kl_a + 0.5 * kl_b;
}

// Nearest-rank percentile without sorting.
double BrutePercentile(const std::vector<double>& err, double q) {
  const std::size_t n = err.size();
  const std::size_t rank = std::min<std::size_t>(n, static_cast<std::size_t>(q * n / 100.0) + 1);
  for (double v : err) {
    std::size_t below = 0, upto = 0;
    for (double w : err) {
      below += w < v;
      upto += w <= v;
    }
    if (below < rank && rank <= upto) return v;
  }
  return std::nan("");
}

}  // namespace

CheckResult FlowRoundTrip(std::size_t trials, uint64_t seed) {
  CheckResult r{"flow round trip", true, 0.0, ""};
  Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.Split(t);
    const std::size_t group = rng.Bernoulli(0.5) ? 2 : 4;
    ToyFlow toy(8, group, 1000 + seed * 7919 + t);
    toy.Randomize(rng.UniformInt(1u << 30), 0.3);
    cond::Batch batch = cond::Collate({&toy.bundles[0], &toy.bundles[1], &toy.bundles[2]}, group);
    Tensor y = RandomValid(batch, &rng, 10.0);
    Tensor back = toy.model->Forward(batch, Latent(*toy.model, batch, y));
    double worst = 0.0, ymax = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      worst = std::max(worst, std::abs(back[i] - y[i]));
      ymax = std::max(ymax, std::abs(y[i]));
    }
    r.value = std::max(r.value, worst / (1.0 + ymax));
  }
  r.passed = r.value <= 1e-6;
  r.detail = std::to_string(trials) + " triples, max relative error " + Format(r.value);
  return r;
}

CheckResult FlowLogDet(std::size_t trials, uint64_t seed) {
  CheckResult r{"flow log-det", true, 0.0, ""};
  Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.Split(t);
    ToyFlow toy(8, 4, 2000 + seed * 7919 + t);
    toy.Randomize(rng.UniformInt(1u << 30), 0.3);
    const std::size_t keep = 5 + t % 4;
    cond::ConditioningBundle b = Truncate(toy.bundles[0], keep);
    cond::Batch batch = cond::Collate({&b}, 4);
    Tensor y = RandomValid(batch, &rng, 2.0);
    Graph g(false);
    const double analytic = g.value(toy.model->Inverse(g, batch, y).log_det).item();
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
      Tensor zp = Latent(*toy.model, batch, plus), zm = Latent(*toy.model, batch, minus);
      for (std::size_t i = 0; i < n; ++i) jac(i, j) = (zp[idx[i]] - zm[idx[i]]) / (2 * h);
    }
    const double numeric = std::log(std::abs(jac.partialPivLu().determinant()));
    r.value = std::max(r.value, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
  r.passed = r.value <= 1e-4;
  r.detail = std::to_string(trials) + " flows, max relative error " + Format(r.value);
  return r;
}

CheckResult FlowDensity(uint64_t seed) {
  CheckResult r{"density normalisation", false, 0.0, ""};
  synth::GeneratorSpec spec = ToySpec(seed);
  auto train = synth::GenerateSplit(spec, "train", 32);
  auto dev = synth::GenerateSplit(spec, "dev", 8);
  flow::CauliflowModel model(ToyConfig(2), train.corpus.inventory, spec.WordFeatureDim(),
                             spec.speaker_dim, seed);
  flow::FlowTrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  tc.seed = seed;
  flow::TrainFlow(&model, train.corpus, dev.corpus, tc);
  auto bundles = flow::TrainingBundles(model, dev.corpus);
  cond::ConditioningBundle b = Truncate(bundles[0], 2);
  cond::Batch one = cond::Collate({&b}, 2);
  // Locate the mass by mapping a spread of latents forward.
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (double u : {-6.0, -3.0, 0.0, 3.0, 6.0}) {
    for (double v : {-6.0, -3.0, 0.0, 3.0, 6.0}) {
      Tensor y = model.Forward(one, Tensor({1, 2}, {u, v}));
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::min(lo[k], y[k]);
        hi[k] = std::max(hi[k], y[k]);
      }
    }
  }
  const std::size_t n = 400;
  std::vector<const cond::ConditioningBundle*> rows(n, &b);
  cond::Batch batch = cond::Collate(rows, 2);
  const double pad[2] = {0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])};
  const double step0 = (hi[0] - lo[0] + 2 * pad[0]) / n;
  const double step1 = (hi[1] - lo[1] + 2 * pad[1]) / n;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor y({n, 2});
    for (std::size_t j = 0; j < n; ++j) {
      y[j * 2] = lo[0] - pad[0] + (i + 0.5) * step0;
      y[j * 2 + 1] = lo[1] - pad[1] + (j + 0.5) * step1;
    }
    for (double ll : model.RowLogLikelihood(batch, y)) total += std::exp(ll);
  }
  r.value = total * step0 * step1;
  r.passed = r.value >= 0.98 && r.value <= 1.02;
  r.detail = "integral " + Format(r.value) + " over a 400x400 grid";
  return r;
}

CheckResult OpGradients(uint64_t seed) {
  CheckResult r{"op gradients", true, 0.0, ""};
  Rng rng(seed);
  ad::ParameterStore store;
  auto make = [&](ad::Shape shape, double lo = -2.0, double hi = 2.0) {
    Tensor t(shape);
    for (double& v : t.mutable_data()) v = lo + (hi - lo) * rng.Uniform();
    return store.Create("p" + std::to_string(store.parameters().size()), t);
  };
  auto* a = make({2, 3});
  auto* b = make({2, 3});
  auto* w = make({2, 3});
  auto* s = make({1});
  auto* pos = make({2, 3}, 0.2, 2.0);
  auto* m3 = make({2, 3, 4});
  auto* m2 = make({4, 2});
  auto* x = make({2, 7, 3});
  auto* k = make({3, 3, 2});
  auto* table = make({5, 3});
  auto* c = make({2, 2});
  const Tensor mask({2, 3}, {0, 1, 0, 1, 0, 0});
  using Case = std::pair<std::string, std::function<Var(Graph&)>>;
  const std::vector<Case> cases = {
      {"add", [&](Graph& g) { return g.Sum(g.Mul(g.Add(g.Param(a), g.Param(b)), g.Param(w))); }},
      {"sub", [&](Graph& g) { return g.Sum(g.Mul(g.Sub(g.Param(a), g.Param(b)), g.Param(w))); }},
      {"mul", [&](Graph& g) { return g.Sum(g.Mul(g.Param(a), g.Mul(g.Param(a), g.Param(b)))); }},
      {"scale", [&](Graph& g) { return g.Sum(g.Exp(g.Scale(g.Param(a), -0.7))); }},
      {"add_scalar", [&](Graph& g) { return g.Sum(g.Tanh(g.AddScalar(g.Param(a), 0.3))); }},
      {"broadcast",
       [&](Graph& g) { return g.Sum(g.Mul(g.Broadcast(g.Param(s), {2, 3}), g.Param(w))); }},
      {"exp", [&](Graph& g) { return g.Sum(g.Mul(g.Exp(g.Param(a)), g.Param(w))); }},
      {"log", [&](Graph& g) { return g.Sum(g.Mul(g.Log(g.Param(pos)), g.Param(w))); }},
      {"tanh", [&](Graph& g) { return g.Sum(g.Mul(g.Tanh(g.Param(a)), g.Param(w))); }},
      {"sigmoid", [&](Graph& g) { return g.Sum(g.Mul(g.Sigmoid(g.Param(a)), g.Param(w))); }},
      {"softplus", [&](Graph& g) { return g.Sum(g.Mul(g.Softplus(g.Param(a)), g.Param(w))); }},
      {"matmul", [&](Graph& g) { return g.Sum(g.Tanh(g.Matmul(g.Param(m3), g.Param(m2)))); }},
      {"conv1d",
       [&](Graph& g) { return g.Sum(g.Tanh(g.Conv1d(g.Param(x), g.Param(k), 2))); }},
      {"embedding",
       [&](Graph& g) {
         return g.Sum(g.Tanh(g.Embedding(g.Param(table), {0, 3, 3, 1}, {2, 2})));
       }},
      {"mean", [&](Graph& g) { return g.Mean(g.Mul(g.Param(a), g.Exp(g.Param(b)))); }},
      {"concat_slice",
       [&](Graph& g) {
         Var cat = g.Concat({g.Param(a), g.Param(c)}, 1);
         return g.Sum(g.Tanh(g.Slice(cat, 1, 1, 4)));
       }},
      {"masked_fill",
       [&](Graph& g) { return g.Sum(g.Exp(g.MaskedFill(g.Param(a), mask, 0.5))); }},
      {"reshape",
       [&](Graph& g) {
         return g.Sum(g.Mul(g.Reshape(g.Param(a), {3, 2}), g.Reshape(g.Param(w), {3, 2})));
       }},
  };
  std::string failed;
  for (const auto& [name, closure] : cases) {
    auto report = ad::GradCheck(closure, store.parameters());
    r.value = std::max(r.value, report.max_rel_error);
    if (!report.passed()) failed += " " + name;
  }
  r.passed = failed.empty() && r.value <= 1e-4;
  r.detail = std::to_string(cases.size()) + " op cases, max relative error " + Format(r.value) +
             (failed.empty() ? "" : ", failing:" + failed);
  return r;
}

CheckResult FlowNllGradient(uint64_t seed) {
  CheckResult r{"flow NLL gradient", false, 0.0, ""};
  ToyFlow toy(8, 4, seed);
  toy.Randomize(seed, 0.2);
  cond::ConditioningBundle b = Truncate(toy.bundles[0], 2);
  b.durations = {5.3, 0.4};
  cond::Batch batch = cond::Collate({&b}, 4);
  Tensor y({1, 4}, {0.53, 0.04, 0, 0});
  auto loss = [&](Graph& g) {
    flow::FlowTerms t = toy.model->Inverse(g, batch, y);
    return g.Scale(t.log_likelihood, -1.0 / t.tokens);
  };
  auto report = ad::GradCheck(loss, toy.model->store().parameters());
  r.value = report.max_rel_error;
  r.passed = report.passed() && r.value <= 1e-4;
  r.detail = std::to_string(report.coordinates) + " coordinates, max relative error " +
             Format(r.value);
  return r;
}

CheckResult MetricOracles(std::size_t instances, uint64_t seed) {
  CheckResult r{"metric oracles", true, 0.0, ""};
  Rng rng(seed);
  const double betas[] = {0.25, 0.5, 1.0, 2.0};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t tp = rng.UniformInt(30), fp = rng.UniformInt(30), fn = rng.UniformInt(30);
    const double beta = betas[rng.UniformInt(4)];
    const double f = metrics::Fbeta(tp, fp, fn, beta).f;
    r.value = std::max(r.value, std::abs(f - BruteFbeta(tp, fp, fn, beta)));

    std::vector<int> pa(1 + rng.UniformInt(80)), pb(1 + rng.UniformInt(80));
    for (int& v : pa) v = static_cast<int>(rng.UniformInt(230));
    for (int& v : pb) v = static_cast<int>(rng.UniformInt(230));
    const double jsd = metrics::Jsd(std::vector<double>(pa.begin(), pa.end()),
                                    std::vector<double>(pb.begin(), pb.end()));
    r.value = std::max(r.value, std::abs(jsd - BruteJsd(pa, pb)));

    const std::size_t n = 1 + rng.UniformInt(60);
    std::vector<double> pred(n), gold(n), err(n);
    for (std::size_t j = 0; j < n; ++j) {
      pred[j] = static_cast<double>(rng.UniformInt(50));
      gold[j] = static_cast<double>(rng.UniformInt(50));
      err[j] = std::abs(pred[j] - gold[j]);
    }
    const double q = 1.0 + static_cast<double>(rng.UniformInt(100));
    r.value = std::max(r.value,
                       std::abs(metrics::PercentileL1(pred, gold, q) - BrutePercentile(err, q)));
  }
  r.passed = r.value <= 1e-12;
  r.detail = std::to_string(instances) + " instances per metric, max difference " + Format(r.value);
  return r;
}

std::vector<CheckResult> RunSelfTest() {
  return {FlowRoundTrip(), FlowLogDet(), FlowDensity(), OpGradients(), FlowNllGradient(),
          MetricOracles()};
}

}  // namespace cauliflow::checks
