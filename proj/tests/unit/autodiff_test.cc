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
#include <filesystem>
#include <fstream>
#include <functional>

#include <gtest/gtest.h>

#include "cauliflow/autodiff/adam.h"
#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/autodiff/grad_check.h"
#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/layers.h"
#include "cauliflow/common/error.h"
#include "cauliflow/common/rng.h"

namespace cauliflow::ad {
namespace {

Tensor RandomTensor(Shape shape, Rng* rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = lo + (hi - lo) * rng->Uniform();
  return t;
}

void ExpectGradOk(const std::function<Var(Graph&)>& f,
                  const std::vector<Parameter*>& inputs) {
  GradCheckReport r = GradCheck(f, inputs);
  EXPECT_TRUE(r.passed()) << "worst: " << r.worst;
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_GT(r.coordinates, 0u);
}

TEST(GraphTest, AddElementwise) {
  Graph g;
  Var a = g.Input(Tensor::Vector({1, 2}));
  Var b = g.Input(Tensor::Vector({3, 4}));
  EXPECT_EQ(g.value(g.Add(a, b)).values(), (std::vector<double>{4, 6}));
}

TEST(GraphTest, MatmulIdentity) {
  Rng rng(1);
  Graph g;
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Tensor a = RandomTensor({3, 3}, &rng);
  Var out = g.Matmul(g.Input(eye), g.Input(a));
  EXPECT_EQ(g.value(out), a);
}

// Kernel [1, 1] at dilation 2 with same padding: left pad = 1, so output t
// sums x[t - 1] and x[t + 1].
TEST(GraphTest, DilatedConvByHand) {
  Graph g;
  Var x = g.Input(Tensor({4, 1}, {1, 0, 0, 0}));
  Var k = g.Input(Tensor({2, 1, 1}, {1, 1}));
  EXPECT_EQ(g.value(g.Conv1d(x, k, 2)).values(), (std::vector<double>{0, 1, 0, 0}));

  Var x2 = g.Input(Tensor({5, 1}, {1, 2, 3, 4, 5}));
  Var k3 = g.Input(Tensor({3, 1, 1}, {1, 10, 100}));
  // Taps read t-2, t, t+2.
  EXPECT_EQ(g.value(g.Conv1d(x2, k3, 2)).values(),
            (std::vector<double>{310, 420, 531, 42, 53}));
}

TEST(GraphTest, BackwardSquare) {
  ParameterStore store;
  Parameter* x = store.Create("x", Tensor::Vector({1, 2, 3}));
  Graph g;
  Var v = g.Param(x);
  g.Backward(g.Sum(g.Mul(v, v)));
  EXPECT_EQ(x->grad.values(), (std::vector<double>{2, 4, 6}));
}

TEST(GraphTest, SigmoidSlopeAtZero) {
  ParameterStore store;
  Parameter* x = store.Create("x", Tensor::Scalar(0.0));
  Graph g;
  g.Backward(g.Sigmoid(g.Param(x)));
  EXPECT_DOUBLE_EQ(x->grad.item(), 0.25);
}

TEST(GraphTest, LossMustBeScalar) {
  ParameterStore store;
  Parameter* x = store.Create("x", Tensor::Vector({1, 2}));
  Graph g;
  Var v = g.Param(x);
  EXPECT_THROW(g.Backward(v), ShapeError);
}

TEST(GraphTest, DetectsMutationAfterForward) {
  ParameterStore store;
  Parameter* x = store.Create("x", Tensor::Vector({1, 2}));
  Graph g;
  Var loss = g.Sum(g.Param(x));
  x->Assign(Tensor::Vector({3, 4}));
  EXPECT_THROW(g.Backward(loss), Error);
}

TEST(GraphTest, LogOfNonPositiveNamesOp) {
  Graph g;
  try {
    g.Log(g.Input(Tensor::Vector({1.0, -1.0})));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(GraphTest, OverflowNamesOp) {
  Graph g;
  try {
    g.Exp(g.Input(Tensor::Vector({1000.0})));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(GraphTest, ShapeMismatchThrows) {
  Graph g;
  Var a = g.Input(Tensor::Vector({1, 2}));
  Var b = g.Input(Tensor::Vector({1, 2, 3}));
  EXPECT_THROW(g.Add(a, b), ShapeError);
  EXPECT_THROW(g.Matmul(a, b), ShapeError);
}

TEST(GraphTest, NoGradGraphRecordsNoGradients) {
  ParameterStore store;
  Parameter* x = store.Create("x", Tensor::Vector({1, 2}));
  Graph g(false);
  Var v = g.Param(x);
  EXPECT_FALSE(g.requires_grad(v));
}

// Every op kind against central differences on inputs drawn from [-2, 2].
class OpGradTest : public ::testing::Test {
 protected:
  Parameter* Make(const std::string& name, Shape shape, double lo = -2.0,
                  double hi = 2.0) {
    return store_.Create(name, RandomTensor(std::move(shape), &rng_, lo, hi));
  }
  Rng rng_{2024};
  ParameterStore store_;
};

TEST_F(OpGradTest, Add) {
  auto* a = Make("a", {2, 3});
  auto* b = Make("b", {2, 3});
  auto* w = Make("w", {2, 3});
  ExpectGradOk([&](Graph& g) {
    return g.Sum(g.Mul(g.Add(g.Param(a), g.Param(b)), g.Param(w)));
  }, {a, b});
}

TEST_F(OpGradTest, SubMul) {
  auto* a = Make("a", {4});
  auto* b = Make("b", {4});
  ExpectGradOk([&](Graph& g) {
    Var d = g.Sub(g.Param(a), g.Param(b));
    return g.Sum(g.Mul(d, g.Mul(d, g.Param(a))));
  }, {a, b});
}

TEST_F(OpGradTest, ScaleAddScalarBroadcast) {
  auto* a = Make("a", {3});
  auto* s = Make("s", {1});
  auto* w = Make("w", {2, 2});
  ExpectGradOk([&](Graph& g) {
    Var x = g.AddScalar(g.Scale(g.Param(a), -1.7), 0.3);
    Var b = g.Broadcast(g.Param(s), {2, 2});
    return g.Add(g.Sum(g.Mul(x, x)), g.Sum(g.Mul(b, g.Param(w))));
  }, {a, s});
}

TEST_F(OpGradTest, Unary) {
  auto* a = Make("a", {5});
  auto* pos = Make("pos", {5}, 0.2, 2.0);
  ExpectGradOk([&](Graph& g) {
    Var x = g.Param(a);
    Var total = g.Add(g.Sum(g.Exp(x)), g.Sum(g.Tanh(g.Scale(x, 1.3))));
    total = g.Add(total, g.Sum(g.Mul(g.Sigmoid(x), x)));
    total = g.Add(total, g.Sum(g.Mul(g.Softplus(x), x)));
    return g.Add(total, g.Sum(g.Mul(g.Log(g.Param(pos)), g.Param(pos))));
  }, {a, pos});
}

TEST_F(OpGradTest, MatmulBatched) {
  auto* a = Make("a", {2, 3, 4});
  auto* b = Make("b", {4, 2});
  auto* w = Make("w", {2, 3, 2});
  ExpectGradOk([&](Graph& g) {
    return g.Sum(g.Mul(g.Matmul(g.Param(a), g.Param(b)), g.Param(w)));
  }, {a, b});
}

TEST_F(OpGradTest, Conv1dDilated) {
  for (int dilation : {1, 2, 3}) {
    auto* x = Make("x" + std::to_string(dilation), {2, 7, 3});
    auto* k = Make("k" + std::to_string(dilation), {3, 3, 2});
    auto* w = Make("w" + std::to_string(dilation), {2, 7, 2});
    ExpectGradOk([&](Graph& g) {
      return g.Sum(g.Mul(g.Conv1d(g.Param(x), g.Param(k), dilation), g.Param(w)));
    }, {x, k});
  }
}

TEST_F(OpGradTest, EvenTapConv) {
  auto* x = Make("x", {6, 2});
  auto* k = Make("k", {2, 2, 3});
  auto* w = Make("w", {6, 3});
  ExpectGradOk([&](Graph& g) {
    return g.Sum(g.Mul(g.Conv1d(g.Param(x), g.Param(k), 2), g.Param(w)));
  }, {x, k});
}

TEST_F(OpGradTest, Embedding) {
  auto* table = Make("table", {5, 3});
  auto* w = Make("w", {2, 2, 3});
  ExpectGradOk([&](Graph& g) {
    Var e = g.Embedding(g.Param(table), {0, 3, 3, 1}, {2, 2});
    return g.Sum(g.Mul(e, g.Param(w)));
  }, {table});
}

TEST_F(OpGradTest, MeanConcatSlice) {
  auto* a = Make("a", {2, 3});
  auto* b = Make("b", {2, 2});
  ExpectGradOk([&](Graph& g) {
    Var c = g.Concat({g.Param(a), g.Param(b)}, 1);
    Var s = g.Slice(c, 1, 1, 4);
    return g.Mean(g.Mul(s, g.Exp(s)));
  }, {a, b});
  auto* c = Make("c", {2, 3});
  auto* d = Make("d", {1, 3});
  ExpectGradOk([&](Graph& g) {
    Var cat = g.Concat({g.Param(c), g.Param(d)}, 0);
    return g.Sum(g.Tanh(g.Slice(cat, 0, 1, 3)));
  }, {c, d});
}

TEST_F(OpGradTest, MaskedFillReshape) {
  auto* a = Make("a", {2, 3});
  Tensor mask({2, 3}, {0, 1, 0, 1, 0, 0});
  ExpectGradOk([&](Graph& g) {
    Var m = g.MaskedFill(g.Param(a), mask, 0.5);
    Var r = g.Reshape(m, {3, 2});
    return g.Sum(g.Mul(r, g.Exp(r)));
  }, {a});
}

TEST_F(OpGradTest, LinearAndHelpers) {
  ParameterStore params;
  Linear lin(&params, "lin", 3, 4, &rng_);
  auto* x = Make("x", {2, 5, 3});
  auto* s = Make("s", {4});
  std::vector<Parameter*> inputs = params.parameters();
  for (Parameter* p : inputs) {
    for (double& v : p->value.mutable_data()) v = 2.0 * rng_.Uniform() - 1.0;
  }
  inputs.push_back(x);
  inputs.push_back(s);
  Tensor valid({2, 5}, {1, 1, 1, 0, 0, 1, 1, 1, 1, 1});
  ExpectGradOk([&](Graph& g) {
    Var h = ScaleRows(g, lin(g, g.Param(x)), g.Param(s));
    h = MaskTime(g, GatedActivation(g, h), valid);
    Var per = g.Slice(g.Reshape(h, {2, 10}), 1, 0, 2);
    return g.Add(g.Sum(g.Mul(h, h)), g.Sum(g.Exp(ExpandOverTime(g, per, 3))));
  }, inputs);
}

TEST(LinearTest, ExactGradient) {
  Rng rng(9);
  ParameterStore params;
  Linear lin(&params, "lin", 3, 2, &rng);
  Tensor x({4, 3});
  for (double& v : x.mutable_data()) v = rng.Uniform();
  Graph g;
  g.Backward(g.Sum(lin(g, g.Input(x))));
  // d/dW_ij of sum(xW + b) = sum_rows x_i; d/db = row count.
  const Tensor& gw = params.Get("lin.weight").grad;
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0;
    for (std::size_t r = 0; r < 4; ++r) col += x[r * 3 + i];
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(gw[i * 2 + j], col);
  }
  EXPECT_EQ(params.Get("lin.bias").grad.values(), (std::vector<double>{4, 4}));
}

TEST(GraphTest, BackwardIsBitReproducible) {
  auto run = [] {
    Rng rng(77);
    ParameterStore params;
    Conv1dLayer conv(&params, "c", 3, 4, 3, 2, &rng);
    Linear lin(&params, "l", 4, 1, &rng);
    Tensor x = RandomTensor({2, 9, 3}, &rng);
    Graph g;
    Var y = lin(g, g.Tanh(conv(g, g.Input(x))));
    g.Backward(g.Mean(g.Mul(y, y)));
    std::vector<Tensor> grads;
    for (Parameter* p : params.parameters()) grads.push_back(p->grad);
    return grads;
  };
  EXPECT_EQ(run(), run());
}

TEST(AdamTest, ZeroGradLeavesParams) {
  ParameterStore params;
  Parameter* p = params.Create("p", Tensor::Vector({1.0, -2.0}));
  Adam adam;
  adam.Step(params);
  EXPECT_EQ(p->value.values(), (std::vector<double>{1.0, -2.0}));
}

// After one step m_hat = g and v_hat = g^2, so the move is
// lr * g / (|g| + eps).
TEST(AdamTest, FirstStepByHand) {
  ParameterStore params;
  Parameter* p = params.Create("p", Tensor::Vector({1.0, 1.0, 1.0}));
  p->grad = Tensor::Vector({0.5, -3.0, 1e-3});
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(cfg);
  adam.Step(params);
  for (std::size_t i = 0; i < 3; ++i) {
    double gi = std::vector<double>{0.5, -3.0, 1e-3}[i];
    double expected = 1.0 - 0.1 * gi / (std::abs(gi) + 1e-8);
    EXPECT_NEAR(p->value[i], expected, 1e-12);
  }
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(AdamTest, RejectsNonFiniteGradient) {
  ParameterStore params;
  Parameter* p = params.Create("p", Tensor::Vector({1.0}));
  p->grad = Tensor::Vector({std::nan("")});
  Adam adam;
  EXPECT_THROW(adam.Step(params), NumericError);
  EXPECT_EQ(p->value[0], 1.0);
}

TEST(AdamTest, ClipBoundsUpdateDirection) {
  ParameterStore params;
  Parameter* p = params.Create("p", Tensor::Vector({0.0, 0.0}));
  p->grad = Tensor::Vector({30.0, 40.0});
  AdamConfig cfg;
  cfg.clip_norm = 1.0;
  Adam adam(cfg);
  adam.Step(params);
  EXPECT_DOUBLE_EQ(adam.last_grad_norm(), 50.0);
  EXPECT_LT(p->value[0], 0.0);
  EXPECT_LT(p->value[1], 0.0);
}

TEST(AdamTest, IdenticalTrajectories) {
  auto run = [] {
    Rng rng(5);
    ParameterStore params;
    Linear lin(&params, "l", 2, 1, &rng);
    Adam adam;
    Tensor x = RandomTensor({8, 2}, &rng);
    for (int step = 0; step < 20; ++step) {
      params.ZeroGrad();
      Graph g;
      Var y = lin(g, g.Input(x));
      g.Backward(g.Mean(g.Mul(y, y)));
      adam.Step(params);
    }
    return params.Snapshot();
  };
  EXPECT_EQ(run(), run());
}

TEST(CheckpointTest, RoundTripsBitExactly) {
  Rng rng(11);
  ParameterStore params;
  Linear lin(&params, "enc.lin", 3, 5, &rng);
  params.Create("odd", Tensor::Vector({0.1, -0.0, 1e-300, 3.141592653589793}));
  auto path = std::filesystem::temp_directory_path() / "cauliflow_ckpt_test.bin";
  Checkpoint ckpt = MakeCheckpoint(params, {{"model", "test"}, {"seed", "11"}});
  SaveCheckpoint(path.string(), ckpt);
  Checkpoint back = LoadCheckpoint(path.string());
  EXPECT_EQ(back.metadata, ckpt.metadata);
  ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) EXPECT_EQ(back.tensors.at(name), t);
  std::filesystem::remove(path);
}

TEST(CheckpointTest, RejectsGarbage) {
  auto path = std::filesystem::temp_directory_path() / "cauliflow_ckpt_bad.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint";
  }
  EXPECT_THROW(LoadCheckpoint(path.string()), IoError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cauliflow::ad
